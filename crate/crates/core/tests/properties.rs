//! Invariants checked on random inputs.

use kleingreen::cli::{to_json, CircleSpec, GroupSpecFile, Metadata, PointSpec, SchottkyFile};
use kleingreen::fixtures;
use kleingreen::freegroup::{reduce, Letter, Word};
use kleingreen::fuchsian::substitute;
use kleingreen::green::{green_genus0, Divisor};
use kleingreen::h3geom::{angle_psi, apply_h3, foot_point, hyp_dist, ordist_feet, reduce_angle, Geodesic, H3Point};
use kleingreen::kleinian::assemble_g0;
use kleingreen::moebius::{cross_ratio, MoebiusMap, SpherePoint};
use num_complex::Complex64;
use proptest::prelude::*;

fn complex(scale: f64) -> impl Strategy<Value = Complex64> {
    (-scale..scale, -scale..scale).prop_map(|(re, im)| Complex64::new(re, im))
}

fn moebius() -> impl Strategy<Value = MoebiusMap> {
    (complex(2.0), complex(2.0), complex(2.0), complex(2.0))
        .prop_filter_map("well-conditioned", |(a, b, c, d)| {
            let det = a * d - b * c;
            (det.norm() > 0.2).then(|| MoebiusMap::new(a, b, c, d).ok()).flatten()
        })
}

/// Four finite points at least `0.05` apart.
fn quadruple() -> impl Strategy<Value = [SpherePoint; 4]> {
    [complex(3.0), complex(3.0), complex(3.0), complex(3.0)]
        .prop_filter("separated", |p| (0..4).all(|i| (0..i).all(|j| (p[i] - p[j]).norm() > 0.05)))
        .prop_map(|p| p.map(SpherePoint::from))
}

fn close(x: SpherePoint, y: SpherePoint, eps: f64) -> bool {
    x.chordal_distance(&y) <= eps
}

fn word(rank: u16, max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec((0..rank, any::<bool>()), 0..max_len)
        .prop_map(|v| reduce(&v.into_iter().map(|(i, inv)| if inv { Letter::inv(i) } else { Letter::gen(i) }).collect::<Vec<_>>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cross_ratio_is_moebius_invariant(p in quadruple(), h in moebius()) {
        let before = cross_ratio(p[0], p[1], p[2], p[3]).unwrap();
        let [a, b, c, d] = p.map(|z| h.apply(z));
        let after = cross_ratio(a, b, c, d).unwrap();
        prop_assert!(close(before, after, 1e-9), "{before} vs {after}");
    }

    #[test]
    fn compose_agrees_with_apply(f in moebius(), g in moebius(), z in complex(3.0)) {
        let z = SpherePoint::from(z);
        prop_assert!(close(f.compose(&g).apply(z), f.apply(g.apply(z)), 1e-9));
        prop_assert!(close(f.inverse().apply(f.apply(z)), z, 1e-9));
    }

    #[test]
    fn ordist_and_psi_follow_the_cross_ratio(p in quadruple()) {
        let [a, b, c, d] = p;
        let cr = cross_ratio(a, b, c, d).unwrap().finite().unwrap();
        prop_assert!((ordist_feet(a, b, c, d).unwrap() + cr.norm().ln()).abs() < 1e-9);
        prop_assert!(reduce_angle(angle_psi(a, b, c, d).unwrap() + cr.arg()).abs() < 1e-9);
    }

    #[test]
    fn ordist_is_antisymmetric(p in quadruple()) {
        let [a, b, c, d] = p;
        let v = ordist_feet(a, b, c, d).unwrap();
        prop_assert!((ordist_feet(b, a, c, d).unwrap() + v).abs() < 1e-9);
        prop_assert!((ordist_feet(a, b, d, c).unwrap() + v).abs() < 1e-9);
    }

    #[test]
    fn feet_are_equivariant(p in quadruple(), h in moebius()) {
        let [u, _, c, d] = p;
        let foot = foot_point(u, &Geodesic::new(c, d).unwrap()).unwrap();
        let moved = foot_point(h.apply(u), &Geodesic::new(h.apply(c), h.apply(d)).unwrap());
        // The image geodesic may run through ∞, where the foot is still defined.
        if let Ok(moved) = moved {
            let image = apply_h3(&h, foot);
            prop_assert!(hyp_dist(image, moved) < 1e-7, "{image:?} vs {moved:?}");
        }
    }

    #[test]
    fn extension_preserves_distance(h in moebius(), z in complex(2.0), w in complex(2.0), s in 0.1..3.0f64, t in 0.1..3.0f64) {
        let (p, q) = (H3Point::new(z, s).unwrap(), H3Point::new(w, t).unwrap());
        let d = hyp_dist(p, q);
        prop_assert!((hyp_dist(apply_h3(&h, p), apply_h3(&h, q)) - d).abs() < 1e-8 * d.max(1.0));
    }

    #[test]
    fn genus0_green_is_symmetric_and_invariant(p in quadruple(), h in moebius()) {
        let g = |p: [SpherePoint; 4]| green_genus0(&Divisor::pair(p[0], p[1]).unwrap(), &Divisor::pair(p[2], p[3]).unwrap()).unwrap();
        let v = g(p);
        prop_assert!((g([p[2], p[3], p[0], p[1]]) - v).abs() < 1e-12 * v.abs().max(1.0));
        prop_assert!((g([p[1], p[0], p[2], p[3]]) + v).abs() < 1e-12 * v.abs().max(1.0));
        prop_assert!((g(p.map(|z| h.apply(z))) - v).abs() < 1e-9 * v.abs().max(1.0));
    }

    #[test]
    fn reduction_is_a_group_law(u in word(3, 8), v in word(3, 8), w in word(3, 8)) {
        prop_assert_eq!(u.mul(&v).mul(&w), u.mul(&v.mul(&w)));
        prop_assert!(u.mul(&u.inverse()).is_empty());
        prop_assert_eq!(reduce(u.letters()), u.clone());
        prop_assert_eq!(u.inverse().inverse(), u);
    }

    #[test]
    fn substitution_is_a_homomorphism(u in word(2, 8), v in word(2, 8)) {
        let spec = fixtures::octagon();
        let s = |w: &Word| substitute(&spec, w).unwrap();
        prop_assert_eq!(s(&u.mul(&v)), s(&u).mul(&s(&v)));
    }

    #[test]
    fn g0_dictionary_is_a_homomorphism(u in word(3, 6), v in word(3, 6)) {
        let k = fixtures::k_mixed();
        let model = assemble_g0(&k).unwrap();
        // Rank 1 for Γ₀ and rank 2 for the octagon's F₀.
        let tag = |w: &Word| {
            w.map_letters(|l| if l.index == 0 { Letter::tagged(0, 0, l.inverse) } else { Letter::tagged(1, l.index - 1, l.inverse) })
        };
        let (u, v) = (tag(&u), tag(&v));
        let t = |w: &Word| model.to_gamma(w).unwrap();
        prop_assert_eq!(t(&u.mul(&v)), t(&u).mul(&t(&v)));
    }

    #[test]
    fn telescoping_keeps_the_divisor(pts in prop::collection::vec(complex(3.0), 3..6), mults in prop::collection::vec(-3i64..=3, 2..5)) {
        let n = pts.len().min(mults.len() + 1);
        let mut terms: Vec<(SpherePoint, i64)> = (0..n - 1).map(|k| (pts[k].into(), mults[k])).collect();
        let total: i64 = terms.iter().map(|t| t.1).sum();
        terms.push((pts[n - 1].into(), -total));
        terms.retain(|t| t.1 != 0);
        let distinct = (0..terms.len()).all(|i| (0..i).all(|j| terms[i].0 != terms[j].0));
        prop_assume!(distinct && !terms.is_empty());
        let d = Divisor::new(terms.clone()).unwrap();
        let mut balance: Vec<(SpherePoint, i64)> = Vec::new();
        for (x, y, m) in d.telescope(0) {
            for (z, k) in [(x, m), (y, -m)] {
                match balance.iter_mut().find(|e| e.0 == z) {
                    Some(e) => e.1 += k,
                    None => balance.push((z, k)),
                }
            }
        }
        balance.retain(|e| e.1 != 0);
        balance.sort_by_key(|a| a.0.to_string());
        terms.sort_by_key(|a| a.0.to_string());
        prop_assert_eq!(balance, terms);
    }

    #[test]
    fn spec_files_round_trip_exactly(centers in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 2), radius in 1e-3..1e2f64, base in (-5.0..5.0f64, -5.0..5.0f64)) {
        let file = GroupSpecFile::Schottky(SchottkyFile {
            metadata: Metadata::named("random", "round trip"),
            generators: None,
            circles: centers.iter().map(|&(x, y)| CircleSpec { center: [x, y], radius, outside: false }).collect(),
            basepoint: PointSpec::Finite([base.0, base.1]),
        });
        let text = to_json(&file);
        let back: GroupSpecFile = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(to_json(&back), text);
    }
}
