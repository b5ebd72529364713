//! Reference groups used by tests, the self-check and the CLI.

use num_complex::Complex64;

use crate::fuchsian::{side_circles, FuchsianSpec};
use crate::kleinian::{FactorDomain, FactorInput, KleinianSpec};
use crate::moebius::{MoebiusMap, SpherePoint};
use crate::schottky::{pair, Circle, SchottkyGroup};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Unit circles at `-3, -3i, 3, 3i`.
pub fn gamma2_circles() -> Vec<Circle> {
    vec![
        Circle::new(c(-3.0, 0.0), 1.0),
        Circle::new(c(0.0, -3.0), 1.0),
        Circle::new(c(3.0, 0.0), 1.0),
        Circle::new(c(0.0, 3.0), 1.0),
    ]
}

/// Genus 2: `g₁(z) = 3 + 1/(z+3)`, `g₂(z) = 3i + 1/(z+3i)`, base point 0.
pub fn gamma2() -> SchottkyGroup {
    SchottkyGroup::from_circle_pairs(gamma2_circles(), SpherePoint::real(0.0)).expect("fixture is valid")
}

/// Genus 1: `z ↦ z/4` pairing `|z| = 2` (outside disc) with `|z| = 1/2`, base point 1.
pub fn cyclic_quarter() -> SchottkyGroup {
    cyclic(0.25)
}

/// Genus 1 dilation `z ↦ q z`, `0 < q < 1`, with discs `|z| > q^{-1/2}` and `|z| < q^{1/2}`.
pub fn cyclic(q: f64) -> SchottkyGroup {
    let g = MoebiusMap::dilation(c(q, 0.0)).expect("nonzero dilation");
    let r = q.sqrt();
    SchottkyGroup::build(
        vec![g],
        vec![Circle::exterior(c(0.0, 0.0), 1.0 / r), Circle::new(c(0.0, 0.0), r)],
        SpherePoint::real(1.0),
    )
    .expect("fixture is valid")
}

/// Genus 3 with six circles packed so that every neighbouring pair is `gap`
/// apart: four around the unit ring, one in the central hole and the outside
/// of a circle enclosing the ring. The ring circles are paired across by
/// [`pair`], the inner and outer ones by a dilation.
///
/// The ring alone is orthogonal to a common circle and has a thin limit set;
/// filling the interstices pushes the exponent above one as `gap → 0`.
pub fn near_tangent(gap: f64) -> SchottkyGroup {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let r = h - gap / 2.0;
    let inner = 1.0 - h - gap;
    let outer = 1.0 + h + gap;
    let circles = vec![
        Circle::new(c(-1.0, 0.0), r),
        Circle::new(c(0.0, -1.0), r),
        Circle::new(c(0.0, 0.0), inner),
        Circle::new(c(1.0, 0.0), r),
        Circle::new(c(0.0, 1.0), r),
        Circle::exterior(c(0.0, 0.0), outer),
    ];
    let gens = vec![
        pair(&circles[0], &circles[3]).expect("distinct circles"),
        pair(&circles[1], &circles[4]).expect("distinct circles"),
        MoebiusMap::dilation(c(outer / inner, 0.0)).expect("nonzero dilation"),
    ];
    SchottkyGroup::build(gens, circles, SpherePoint::new(0.5, 0.5)).expect("fixture is valid")
}

fn rotation(t: f64) -> MoebiusMap {
    let e = Complex64::from_polar(1.0, t / 2.0);
    MoebiusMap::new(e, c(0.0, 0.0), c(0.0, 0.0), e.conj()).expect("unimodular")
}

/// Hyperbolic translation of the unit disc by distance `t` along the diameter at angle `beta`.
fn disc_translation(beta: f64, t: f64) -> MoebiusMap {
    let (ch, sh) = ((t / 2.0).cosh(), (t / 2.0).sinh());
    let m = MoebiusMap::new(c(ch, 0.0), c(sh, 0.0), c(sh, 0.0), c(ch, 0.0)).expect("unimodular");
    rotation(beta).compose(&m).compose(&rotation(-beta))
}

/// Side pairing of the regular octagon with angles π/4: sends the side at angle
/// `alpha` to the side at angle `beta`.
fn octagon_pairing(alpha: f64, beta: f64) -> MoebiusMap {
    let d = (1.0 / (std::f64::consts::PI / 8.0).tan()).acosh();
    disc_translation(beta, 2.0 * d).compose(&rotation(beta + std::f64::consts::PI - alpha))
}

/// Generators `f₁..f₄` of the regular octagon group in the unit disc. Side
/// `k` sits at angle `(k−1)π/4`; `f₁: 1→3`, `f₃: 2→4`, `f₂: 5→7`, `f₄: 6→8`.
pub fn octagon_generators() -> Vec<MoebiusMap> {
    let a = |k: usize| (k as f64 - 1.0) * std::f64::consts::FRAC_PI_4;
    vec![
        octagon_pairing(a(1), a(3)),
        octagon_pairing(a(5), a(7)),
        octagon_pairing(a(2), a(4)),
        octagon_pairing(a(6), a(8)),
    ]
}

/// Genus-2 Fuchsian group of the regular octagon paired with [`gamma2`].
pub fn octagon() -> FuchsianSpec {
    FuchsianSpec::new(octagon_generators(), Some(Circle::new(c(0.0, 0.0), 1.0)), None, gamma2()).expect("fixture is valid")
}

/// The octagon group conjugated off the unit circle and entered without an
/// invariant circle, as a quasi-Fuchsian presentation.
pub fn quasi_fuchsian() -> FuchsianSpec {
    let h = MoebiusMap::new(c(1.0, 0.3), c(0.2, -0.1), c(0.1, 0.2), c(1.0, 0.0)).expect("invertible");
    let gens = octagon_generators().iter().map(|g| g.conjugate_by(&h)).collect();
    FuchsianSpec::new(gens, None, None, gamma2()).expect("fixture is valid")
}

/// Unit circles at `3 e^{ikπ/p}`, `k = 0..2p`, each paired with the opposite one.
pub fn ring(p: usize) -> SchottkyGroup {
    let circles = (0..2 * p)
        .map(|k| Circle::new(Complex64::from_polar(3.0, k as f64 * std::f64::consts::PI / p as f64), 1.0))
        .collect();
    SchottkyGroup::from_circle_pairs(circles, SpherePoint::real(0.0)).expect("fixture is valid")
}

fn octagon_factor(shift: Complex64) -> FactorInput {
    let t = MoebiusMap::translation(shift);
    let unit = Circle::new(c(0.0, 0.0), 1.0);
    let sides = side_circles(&octagon(), &unit).expect("octagon sides");
    FactorInput {
        generators: octagon_generators().iter().map(|g| g.conjugate_by(&t)).collect(),
        schottky: gamma2(),
        domain: Some(FactorDomain {
            disc: Circle::new(shift, 1.0),
            sides: sides.iter().map(|s| Circle::new(s.center + shift, s.radius)).collect(),
        }),
    }
}

/// `z ↦ z/4` and its square: a degenerate genus-1 factor whose partner is [`cyclic_quarter`].
fn commuting_factor() -> FactorInput {
    let q = MoebiusMap::dilation(c(0.25, 0.0)).expect("nonzero dilation");
    FactorInput { generators: vec![q, q.compose(&q)], schottky: cyclic_quarter(), domain: None }
}

/// No quasi-Fuchsian factors: `Γ₀ = Γ = Γ₂`.
pub fn k0() -> KleinianSpec {
    KleinianSpec::new(Vec::new(), Some(gamma2()), gamma2(), None).expect("fixture is valid")
}

/// One genus-1 factor and `Γ₀ = ⟨g₂⟩` of [`gamma2`]; `Γ = Γ₂` with `γ₀₁ ↦ g₂`, `q₁₁ ↦ g₁`.
pub fn k1() -> KleinianSpec {
    let g = gamma2_circles();
    let gamma0 = SchottkyGroup::from_circle_pairs(vec![g[1], g[3]], SpherePoint::real(0.0)).expect("valid");
    KleinianSpec::new(vec![commuting_factor()], Some(gamma0), gamma2(), Some(vec![1, 0])).expect("fixture is valid")
}

/// Two octagon groups, the second translated by 6, with `Γ` = [`ring`]`(4)`.
pub fn k2() -> KleinianSpec {
    KleinianSpec::new(vec![octagon_factor(c(0.0, 0.0)), octagon_factor(c(6.0, 0.0))], None, ring(4), None)
        .expect("fixture is valid")
}

/// The octagon group and a Schottky factor pairing `|z ∓ 20i| = 1`, with `Γ` = [`ring`]`(3)`.
pub fn k_mixed() -> KleinianSpec {
    let gamma0 = SchottkyGroup::from_circle_pairs(
        vec![Circle::new(c(0.0, -20.0), 1.0), Circle::new(c(0.0, 20.0), 1.0)],
        SpherePoint::real(0.0),
    )
    .expect("valid");
    KleinianSpec::new(vec![octagon_factor(c(0.0, 0.0))], Some(gamma0), ring(3), None).expect("fixture is valid")
}
