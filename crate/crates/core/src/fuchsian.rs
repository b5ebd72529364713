//! Fuchsian groups of compact surfaces and their associated Schottky groups.
//!
//! A Fuchsian group `F = ⟨f₁, …, f_{2p}⟩` uniformizing a genus-`p` surface acts
//! on both sides of its invariant circle. Killing the normal closure `N` of
//! `f_{p+1}, …, f_{2p}` leaves the free group `F₀ = ⟨f₁, …, f_p⟩ ≅ Γ`, where `Γ`
//! is a Schottky group uniformizing the upper boundary surface `S₀`. The
//! covering `J: H² → Ω(Γ)` is not computed: surface points are given in
//! `Ω(Γ)` coordinates, and `J` is only evaluated symbolically on the limit set
//! through `J(…f_{i₁}f_{i₀}(x₀)) = …γ_{i₁}γ_{i₀}(z₀)`.
//!
//! The Markov map `f_F(x) = g_i(x)` on `[P_i, P_{i+1})` codes the invariant
//! circle by itineraries over the labels `g_{4k+1} = f_{k+1}`,
//! `g_{4k+2} = f_{p+k+1}`, `g_{4k+3} = f_{k+1}⁻¹`, `g_{4k+4} = f_{p+k+1}⁻¹`.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freegroup::{conjugacy_reps, Letter, Word};
use crate::green::{green_pair_points, GreenResult};
use crate::moebius::{MapClass, MoebiusMap, SpherePoint};
use crate::periods::tau_entry;
use crate::schottky::{Circle, SchottkyGroup};
use crate::series::{sum_over_table, Graded};

/// Tolerance of the surface relation and of circle preservation.
pub const RELATION_TOL: f64 = 1e-9;
/// Chordal distance at which an itinerary orbit is taken to have closed up.
pub const PERIOD_TOL: f64 = 1e-12;

/// Boundary component on which the Green's function is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// The quotient of the upper side, uniformized by `Γ`.
    #[default]
    S0,
    /// The quotient of the lower side, uniformized by the mirror image of `Γ`.
    S1,
}

/// A genus-`p` Fuchsian (or quasi-Fuchsian) group with its Schottky partner.
#[derive(Debug, Clone)]
pub struct FuchsianSpec {
    generators: Vec<MoebiusMap>,
    circle: Option<Circle>,
    sides: Option<Vec<Circle>>,
    schottky: SchottkyGroup,
}

fn commutator(x: &MoebiusMap, y: &MoebiusMap) -> MoebiusMap {
    x.compose(y).compose(&x.inverse()).compose(&y.inverse())
}

fn relation_product<F: Fn(&MoebiusMap) -> MoebiusMap>(g: &[MoebiusMap], p: usize, first: F) -> MoebiusMap {
    (0..p).fold(MoebiusMap::identity(), |acc, i| acc.compose(&commutator(&first(&g[i]), &g[p + i])))
}

/// Residual of `∏ [f_i, f_{p+i}] = 1`, taking the smaller of the two orientation
/// conventions `[f_i, f_{p+i}]` and `[f_i⁻¹, f_{p+i}]` (the latter arises when each
/// side is the isometric circle of the generator leaving it).
pub fn relation_residual(generators: &[MoebiusMap]) -> f64 {
    let p = generators.len() / 2;
    let direct = relation_product(generators, p, |f| *f);
    let flipped = relation_product(generators, p, |f| f.inverse());
    let id = MoebiusMap::identity();
    direct.distance(&id).min(flipped.distance(&id))
}

fn preserves_circle(m: &MoebiusMap, c: &Circle) -> bool {
    (0..6).all(|k| match m.apply(c.point(k as f64).into()).finite() {
        Some(z) => ((z - c.center).norm() - c.radius).abs() <= RELATION_TOL * c.radius.max(1.0),
        None => false,
    })
}

impl FuchsianSpec {
    /// Validates generators `f₁..f_{2p}`, the optional invariant circle and
    /// polygon sides, and the associated Schottky group of genus `p`.
    pub fn new(
        generators: Vec<MoebiusMap>,
        circle: Option<Circle>,
        sides: Option<Vec<Circle>>,
        schottky: SchottkyGroup,
    ) -> Result<Self> {
        if generators.is_empty() || !generators.len().is_multiple_of(2) {
            return Err(Error::CountMismatch(format!("{} generators; expected 2p with p ≥ 1", generators.len())));
        }
        let p = generators.len() / 2;
        if schottky.genus() != p {
            return Err(Error::CountMismatch(format!(
                "Schottky group has genus {} but the Fuchsian group has genus {p}",
                schottky.genus()
            )));
        }
        for (i, g) in generators.iter().enumerate() {
            if g.classify() != MapClass::Loxodromic {
                return Err(Error::NotLoxodromic(format!("f{} is {}", i + 1, g.classify())));
            }
            if let Some(c) = &circle {
                if !preserves_circle(g, c) {
                    return Err(Error::NotCirclePreserving(i + 1));
                }
            }
        }
        if let Some(s) = &sides {
            if s.len() != 4 * p {
                return Err(Error::CountMismatch(format!("{} polygon sides; expected {}", s.len(), 4 * p)));
            }
        }
        let r = relation_residual(&generators);
        if !(r <= RELATION_TOL) {
            return Err(Error::RelationViolated(r));
        }
        Ok(FuchsianSpec { generators, circle, sides, schottky })
    }

    pub fn genus(&self) -> usize {
        self.generators.len() / 2
    }

    pub fn generators(&self) -> &[MoebiusMap] {
        &self.generators
    }

    pub fn invariant_circle(&self) -> Option<&Circle> {
        self.circle.as_ref()
    }

    pub fn sides(&self) -> Option<&[Circle]> {
        self.sides.as_deref()
    }

    pub fn schottky(&self) -> &SchottkyGroup {
        &self.schottky
    }

    /// Map of a letter over `f₁..f_{2p}` (index `i` is `f_{i+1}`).
    pub fn letter_map(&self, l: Letter) -> Result<MoebiusMap> {
        let g = self
            .generators
            .get(l.index as usize)
            .filter(|_| l.factor == 0)
            .ok_or_else(|| Error::NotAGenerator(l.to_string()))?;
        Ok(if l.inverse { g.inverse() } else { *g })
    }

    pub fn word_to_map(&self, w: &Word) -> Result<MoebiusMap> {
        w.letters()
            .iter()
            .try_fold(MoebiusMap::identity(), |acc, &l| Ok(acc.compose(&self.letter_map(l)?)))
    }

    /// `g_1..g_{4p}` in counterclockwise order.
    pub fn markov_labels(&self) -> Vec<Letter> {
        markov_labels(self.genus())
    }

    /// The Schottky group of the chosen side.
    pub fn side_group(&self, side: Side) -> Result<SchottkyGroup> {
        match side {
            Side::S0 => Ok(self.schottky.clone()),
            Side::S1 => mirror_group(&self.schottky),
        }
    }
}

/// Labels `g_{4k+1} = f_{k+1}`, `g_{4k+2} = f_{p+k+1}`, `g_{4k+3} = f_{k+1}⁻¹`, `g_{4k+4} = f_{p+k+1}⁻¹`.
pub fn markov_labels(p: usize) -> Vec<Letter> {
    (0..p as u16)
        .flat_map(|k| {
            let q = p as u16 + k;
            [Letter::gen(k), Letter::gen(q), Letter::inv(k), Letter::inv(q)]
        })
        .collect()
}

/// Complex-conjugate copy of a Schottky group: it uniformizes the mirror surface.
pub fn mirror_group(g: &SchottkyGroup) -> Result<SchottkyGroup> {
    let gens = g
        .generators()
        .iter()
        .map(|m| MoebiusMap::new(m.a.conj(), m.b.conj(), m.c.conj(), m.d.conj()))
        .collect::<Result<Vec<_>>>()?;
    let circles = g
        .circles()
        .iter()
        .map(|c| Circle { center: c.center.conj(), ..*c })
        .collect();
    let z0 = match g.basepoint() {
        SpherePoint::Finite(z) => SpherePoint::Finite(z.conj()),
        inf => inf,
    };
    SchottkyGroup::build(gens, circles, z0)
}

/// One arc `[P_i, P_{i+1})` of the Markov partition.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MarkovArc {
    /// Angle of `P_i` around the invariant circle, in `[0, 2π)`.
    pub start: f64,
    /// Angle of `Q_{i+1}`, the other endpoint of the side circle.
    pub side_end: f64,
    pub label: Letter,
}

/// The `4p` labelled arcs together with the maps the Markov map applies.
#[derive(Debug, Clone)]
pub struct MarkovPartition {
    circle: Circle,
    arcs: Vec<MarkovArc>,
    maps: Vec<MoebiusMap>,
}

fn angle_of(z: Complex64, c: &Circle) -> f64 {
    (z - c.center).arg().rem_euclid(TAU)
}

/// Endpoint angles `(P, Q)` of the arc of `c` cut out by `side`, `P` first counterclockwise.
fn side_endpoints(circle: &Circle, side: &Circle) -> Option<(f64, f64)> {
    let m = (side.center - circle.center) / circle.radius;
    let r = side.radius / circle.radius;
    let dist = m.norm();
    if dist == 0.0 {
        return None;
    }
    let cos = (1.0 + dist * dist - r * r) / (2.0 * dist);
    if !(-1.0..=1.0).contains(&cos) {
        return None;
    }
    let (phi, delta) = (m.arg(), cos.acos());
    Some(((phi - delta).rem_euclid(TAU), (phi + delta).rem_euclid(TAU)))
}

/// Isometric circle `|c z + d| = |det|^{1/2}` of a map with `c ≠ 0`.
fn isometric_circle(m: &MoebiusMap) -> Option<Circle> {
    let s = m.det().sqrt();
    let c = m.c / s;
    let d = m.d / s;
    if c.norm() < 1e-14 {
        return None;
    }
    Some(Circle::new(-d / c, 1.0 / c.norm()))
}

/// Isometric circles of the labels `g_1..g_{4p}`, taken where the invariant
/// circle is the unit circle and mapped back.
pub fn side_circles(spec: &FuchsianSpec, circle: &Circle) -> Result<Vec<Circle>> {
    let to_unit = MoebiusMap::new(
        Complex64::new(1.0, 0.0),
        -circle.center,
        Complex64::new(0.0, 0.0),
        Complex64::new(circle.radius, 0.0),
    )?;
    let back = to_unit.inverse();
    spec.markov_labels()
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let m = spec.letter_map(l)?;
            let iso = isometric_circle(&m.conjugate_by(&to_unit))
                .ok_or_else(|| Error::PolygonDataMissing(format!("g{} has no isometric circle", k + 1)))?;
            let center = back.apply(iso.center.into()).finite().expect("affine map");
            Ok(Circle::new(center, iso.radius * circle.radius))
        })
        .collect()
}

/// Builds the partition from the supplied polygon sides, or from the isometric
/// circles of the labels (taken relative to the normalized invariant circle).
pub fn build_markov(spec: &FuchsianSpec) -> Result<MarkovPartition> {
    let circle = *spec.invariant_circle().ok_or_else(|| {
        Error::PartitionUnavailable("no invariant circle: the group is treated as quasi-Fuchsian".into())
    })?;
    let labels = spec.markov_labels();
    let maps = labels.iter().map(|&l| spec.letter_map(l)).collect::<Result<Vec<_>>>()?;
    let sides: Vec<Circle> = match spec.sides() {
        Some(s) => s.to_vec(),
        None => side_circles(spec, &circle)?,
    };
    let mut arcs = Vec::with_capacity(sides.len());
    for (k, (side, &label)) in sides.iter().zip(&labels).enumerate() {
        let (start, side_end) = side_endpoints(&circle, side)
            .ok_or_else(|| Error::PolygonDataMissing(format!("side {} misses the invariant circle", k + 1)))?;
        arcs.push(MarkovArc { start, side_end, label });
    }
    let winding: f64 = (0..arcs.len())
        .map(|k| (arcs[(k + 1) % arcs.len()].start - arcs[k].start).rem_euclid(TAU))
        .sum();
    if (winding - TAU).abs() > 1e-9 || arcs.windows(2).any(|w| w[0].start == w[1].start) {
        return Err(Error::PolygonDataMissing("sides are not in counterclockwise order".into()));
    }
    Ok(MarkovPartition { circle, arcs, maps })
}

/// Itinerary prefix `x₀, x₁, …` of a point under the Markov map.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Itinerary {
    /// `symbols[n]` labels the arc containing `f_F^n(x)`.
    pub symbols: Vec<Letter>,
    /// `(start, period)` once the orbit is seen to return to an earlier point;
    /// the remaining symbols were then filled in by periodicity.
    pub periodic: Option<(usize, usize)>,
}

impl Itinerary {
    /// Whether no two consecutive symbols cancel.
    pub fn is_irreducible(&self) -> bool {
        self.symbols.windows(2).all(|w| !w[0].cancels(w[1]))
    }
}

impl MarkovPartition {
    pub fn arcs(&self) -> &[MarkovArc] {
        &self.arcs
    }

    pub fn circle(&self) -> &Circle {
        &self.circle
    }

    /// Index of the arc `[P_i, P_{i+1})` containing the angle `theta`.
    pub fn arc_index(&self, theta: f64) -> usize {
        let t = theta.rem_euclid(TAU);
        let n = self.arcs.len();
        (0..n)
            .find(|&k| {
                let width = (self.arcs[(k + 1) % n].start - self.arcs[k].start).rem_euclid(TAU);
                (t - self.arcs[k].start).rem_euclid(TAU) < width
            })
            .unwrap_or(n - 1)
    }

    /// Arc containing a point of the invariant circle (projected radially).
    pub fn arc_of(&self, x: SpherePoint) -> Result<usize> {
        let z = x.finite().ok_or_else(|| Error::Invalid("∞ is not on the invariant circle".into()))?;
        Ok(self.arc_index(angle_of(z, &self.circle)))
    }

    fn project(&self, z: Complex64) -> Complex64 {
        let v = z - self.circle.center;
        self.circle.center + v / v.norm() * self.circle.radius
    }

    /// One step of the Markov map.
    pub fn step(&self, x: SpherePoint) -> Result<(Letter, SpherePoint)> {
        let k = self.arc_of(x)?;
        let y = self.maps[k].apply(x).finite().ok_or_else(|| Error::Invalid("orbit left the circle".into()))?;
        Ok((self.arcs[k].label, self.project(y).into()))
    }

    /// First `n` symbols of the itinerary of `x`.
    pub fn itinerary(&self, x: SpherePoint, n: usize) -> Result<Itinerary> {
        let mut symbols = Vec::with_capacity(n);
        let mut seen: Vec<SpherePoint> = Vec::new();
        let mut x = x;
        let mut periodic = None;
        while symbols.len() < n {
            if let Some(j) = seen.iter().position(|s| s.chordal_distance(&x) < PERIOD_TOL) {
                let period = seen.len() - j;
                periodic = Some((j, period));
                while symbols.len() < n {
                    symbols.push(symbols[symbols.len() - period]);
                }
                break;
            }
            seen.push(x);
            let (l, y) = self.step(x)?;
            symbols.push(l);
            x = y;
        }
        Ok(Itinerary { symbols, periodic })
    }
}

/// Constant itineraries `z⁺(f) = (…, f⁻¹, f⁻¹)` and `z⁻(f) = (…, f, f)`,
/// checked symbolically: the fixed point lies in the arc with that label, so
/// the Markov map fixes it and the itinerary never changes.
pub fn fixed_point_codings_hold(spec: &FuchsianSpec, part: &MarkovPartition) -> Result<bool> {
    for (i, f) in spec.generators().iter().enumerate() {
        let (zp, zm) = f.fixed_points()?;
        let g = Letter::gen(i as u16);
        let up = part.arcs[part.arc_of(zp)?].label == g.inverse();
        let down = part.arcs[part.arc_of(zm)?].label == g;
        if !(up && down) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `f_i^{±1} ↦ γ_i^{±1}` for `i ≤ p`.
pub fn substitute(spec: &FuchsianSpec, w: &Word) -> Result<Word> {
    let p = spec.genus() as u16;
    if let Some(l) = w.letters().iter().find(|l| l.factor != 0 || l.index >= p) {
        return Err(Error::LetterOutsideF0(l.to_string()));
    }
    Ok(w.map_letters(|l| l))
}

/// `J` at the limit point `…w w (x₀)`, i.e. `z⁺(γ_w)` approximated at `depth`.
pub fn j_limit_point(spec: &FuchsianSpec, w: &Word, depth: usize) -> Result<SpherePoint> {
    let g = substitute(spec, w)?;
    spec.schottky().limit_point(&g, depth)
}

/// Green's function of `S₀` (or `S₁`) for points given in Schottky coordinates.
pub fn green_s0(
    spec: &FuchsianSpec,
    a: SpherePoint,
    b: SpherePoint,
    c: SpherePoint,
    d: SpherePoint,
    max_len: usize,
    side: Side,
) -> Result<GreenResult> {
    match side {
        Side::S0 => green_pair_points(spec.schottky(), a, b, c, d, max_len),
        Side::S1 => green_pair_points(&spec.side_group(Side::S1)?, a, b, c, d, max_len),
    }
}

/// `μ_{(a)−(b)}(f_i) = ∏_{h ∈ S(f_i)} w(z⁺(h)) / w(z⁻(h))`, `w(x) = (a − x)/(b − x)`,
/// with `z^±(u f_i u⁻¹) = u(z^±(γ_i))` on the Schottky side.
pub fn multiplier_product(spec: &FuchsianSpec, a: SpherePoint, b: SpherePoint, i: usize, max_len: usize) -> Result<Complex64> {
    let g = spec.schottky();
    if i >= g.genus() {
        return Err(Error::Invalid(format!("generator index out of range for genus {}", g.genus())));
    }
    let (za, zb) = match (a.finite(), b.finite()) {
        (Some(za), Some(zb)) => (za, zb),
        _ => return Err(Error::Invalid("the multiplier product needs finite a and b".into())),
    };
    let (zp, zm) = g.fixed_points(i);
    let w = |x: SpherePoint| -> Complex64 {
        match x.finite() {
            Some(x) => (za - x) / (zb - x),
            None => Complex64::new(1.0, 0.0),
        }
    };
    let word = Word::letter(Letter::gen(i as u16));
    let mut factors = Vec::new();
    for h in conjugacy_reps(g.alphabet(), &word, max_len)? {
        let k = (h.len() - 1) / 2;
        let u = g.word_to_map(&Word::from_letters(&h.letters()[..k]));
        factors.push(w(u.apply(zp)) / w(u.apply(zm)));
    }
    Ok(factors.iter().fold(Complex64::new(1.0, 0.0), |acc, f| acc * f))
}

/// `τ_ii` with the leading `log q_i` replaced by `log Q(f_i)`,
/// `Q(f) = <z⁺(γ), z⁻(γ), γ(z₁), z₁>`, for a chosen `z₁ = J(x₁)`.
pub fn tau_diag_via_q(spec: &FuchsianSpec, i: usize, z1: SpherePoint, max_len: usize) -> Result<Complex64> {
    let g = spec.schottky();
    let t = tau_entry(g, i, i, max_len)?;
    let (zp, zm) = g.fixed_points(i);
    let q = crate::moebius::cross_ratio(zp, zm, g.generators()[i].apply(z1), z1)?
        .finite()
        .ok_or_else(|| Error::CrossRatioDegenerate("Q(f)".into()))?;
    Ok(t - g.multiplier(i).ln() + q.ln())
}

/// Logarithm of the partial products of `W_{(a)−(b), x₀}(x) = ∏_{γ} w(γ z)/w(γ z₀)`
/// by generation, `z = J(x)`, `z₀` the Schottky base point.
pub fn w_product_log(spec: &FuchsianSpec, a: SpherePoint, b: SpherePoint, z: SpherePoint, max_len: usize) -> Result<Graded<Complex64>> {
    let g = spec.schottky();
    g.require_convergence()?;
    let z0 = g.basepoint();
    let table = g.word_table(max_len);
    sum_over_table(
        &table,
        max_len,
        |_| true,
        |k| {
            let h = &table.maps[k];
            crate::moebius::cross_ratio(a, b, h.apply(z), h.apply(z0))?
                .finite()
                .filter(|v| v.norm() > 0.0)
                .map(|v| v.ln())
                .ok_or_else(|| Error::CrossRatioDegenerate(table.words[k].to_string()))
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn labels_follow_the_pattern() {
        let l = markov_labels(1);
        assert_eq!(l, vec![Letter::gen(0), Letter::gen(1), Letter::inv(0), Letter::inv(1)]);
        let l = markov_labels(2);
        let names: Vec<String> = l.iter().map(|x| x.to_string()).collect();
        assert_eq!(names, ["g1", "g3", "g1^-1", "g3^-1", "g2", "g4", "g2^-1", "g4^-1"]);
    }

    #[test]
    fn octagon_partition_covers_the_circle() {
        let spec = fixtures::octagon();
        let part = build_markov(&spec).unwrap();
        assert_eq!(part.arcs().len(), 8);
        let total: f64 = (0..8).map(|k| (part.arcs()[(k + 1) % 8].start - part.arcs()[k].start).rem_euclid(TAU)).sum();
        assert!((total - TAU).abs() < 1e-12);
        for k in 0..8 {
            let mid = part.arcs()[k].start + 1e-6;
            assert_eq!(part.arc_index(mid), k);
        }
        assert!(fixed_point_codings_hold(&spec, &part).unwrap());
    }

    #[test]
    fn fixed_point_itineraries_are_constant() {
        let spec = fixtures::octagon();
        let part = build_markov(&spec).unwrap();
        for (i, f) in spec.generators().iter().enumerate() {
            let (zp, zm) = f.fixed_points().unwrap();
            let g = Letter::gen(i as u16);
            let up = part.itinerary(zp, 30).unwrap();
            let down = part.itinerary(zm, 30).unwrap();
            assert!(up.symbols.iter().all(|&s| s == g.inverse()), "z+ of f{}", i + 1);
            assert!(down.symbols.iter().all(|&s| s == g), "z- of f{}", i + 1);
            assert_eq!(up.periodic, Some((0, 1)));
        }
    }

    #[test]
    fn substitution_guard() {
        let spec = fixtures::octagon();
        let w: Word = "g1 g2^-1".parse().unwrap();
        assert_eq!(substitute(&spec, &w).unwrap(), w);
        let bad: Word = "g3".parse().unwrap();
        assert!(matches!(substitute(&spec, &bad), Err(Error::LetterOutsideF0(_))));
    }

    #[test]
    fn quasi_fuchsian_has_no_partition() {
        let spec = fixtures::quasi_fuchsian();
        assert!(matches!(build_markov(&spec), Err(Error::PartitionUnavailable(_))));
    }

    #[test]
    fn relation_is_checked() {
        let spec = fixtures::octagon();
        let mut gens = spec.generators().to_vec();
        gens.swap(0, 1);
        let err = FuchsianSpec::new(gens, None, None, spec.schottky().clone()).unwrap_err();
        assert!(matches!(err, Error::RelationViolated(_)));
    }

    #[test]
    fn mirror_side_is_the_conjugate_surface() {
        let spec = fixtures::octagon();
        let p = |a: f64, b: f64| SpherePoint::new(a, b);
        let q = |a: f64, b: f64| SpherePoint::new(a, -b);
        let s0 = green_s0(&spec, p(0.5, 0.5), p(-1.0, 1.5), p(0.2, -1.0), p(1.5, 0.3), 6, Side::S0).unwrap();
        let s1 = green_s0(&spec, q(0.5, 0.5), q(-1.0, 1.5), q(0.2, -1.0), q(1.5, 0.3), 6, Side::S1).unwrap();
        assert!((s0.value - s1.value).abs() < 1e-12);
    }

    #[test]
    fn period_diagonal_does_not_depend_on_the_anchor() {
        let spec = fixtures::octagon();
        let g = spec.schottky();
        for i in 0..g.genus() {
            let t = tau_entry(g, i, i, 6).unwrap();
            for z1 in [SpherePoint::new(0.5, 0.5), SpherePoint::new(-1.2, 0.1), SpherePoint::new(0.0, 2.5)] {
                let v = tau_diag_via_q(&spec, i, z1, 6).unwrap();
                // Equal up to the branch of the logarithm.
                let d = v - t;
                let turns = d.im / std::f64::consts::TAU;
                assert!(d.re.abs() < 1e-12 && (turns - turns.round()).abs() < 1e-12, "{i} {z1}: {v} vs {t}");
            }
        }
    }

    #[test]
    fn w_product_vanishes_at_the_base_point() {
        let spec = fixtures::octagon();
        let (a, b) = (SpherePoint::new(0.5, 0.5), SpherePoint::new(-1.0, 1.5));
        let z0 = spec.schottky().basepoint();
        let at_z0 = w_product_log(&spec, a, b, z0, 5).unwrap();
        assert!(at_z0.total().norm() < 1e-12);
        let moved = w_product_log(&spec, a, b, SpherePoint::new(0.2, -1.0), 5).unwrap();
        assert!(moved.total().is_finite());
    }
}
