//! Green's functions of degree-zero divisors.
//!
//! On the sphere, `g((a) − (b), (c) − (d)) = log |<a, b, c, d>|`. For a Schottky
//! group the pairing is the group average of the same expression, corrected so
//! that the differential of the third kind `ν_{(a)−(b)}` has purely imaginary
//! `b`-periods:
//!
//! ```text
//! g = Σ_{h ∈ Γ} log|<a, b, h c, h d>| − Σ_j X_j(a, b) Σ_{h ∈ S(g_j)} log|<z⁺(h), z⁻(h), c, d>|
//! Σ_j X_j Re τ_ij = Σ_{h ∈ S(g_i)} log|<a, b, z⁺(h), z⁻(h)>|
//! ```
//!
//! `S(g)` is the conjugacy class of `g`. Every series is truncated at the same
//! word length. The additive normalization of the pairing is not needed: for
//! degree-zero divisors it cancels.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::freegroup::{conjugacy_reps, Letter, Word};
use crate::moebius::{log_abs_cross_ratio, SpherePoint};
use crate::periods::tau_matrix;
use crate::schottky::{SchottkyGroup, XKey};
use crate::series::{sum_over_table, sum_over_words, tail_estimate, Graded};

/// Distance (chordal) below which an orbit point is considered to hit the divisor.
pub const ORBIT_COLLISION_EPS: f64 = 1e-9;
/// Largest accepted condition number of `Re τ`.
pub const MAX_CONDITION: f64 = 1e10;

/// A finite formal sum of points with non-zero integer multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct Divisor {
    terms: Vec<(SpherePoint, i64)>,
}

impl Divisor {
    /// Builds a divisor; repeated points and zero multiplicities are rejected.
    pub fn new(terms: Vec<(SpherePoint, i64)>) -> Result<Self> {
        for (k, (x, m)) in terms.iter().enumerate() {
            if *m == 0 {
                return Err(Error::MalformedDivisor(format!("zero multiplicity at {x}")));
            }
            if terms[..k].iter().any(|(y, _)| y == x) {
                return Err(Error::MalformedDivisor(format!("point {x} repeated")));
            }
        }
        Ok(Divisor { terms })
    }

    /// `(a) − (b)`.
    pub fn pair(a: SpherePoint, b: SpherePoint) -> Result<Self> {
        Divisor::new(vec![(a, 1), (b, -1)])
    }

    pub fn terms(&self) -> &[(SpherePoint, i64)] {
        &self.terms
    }

    pub fn degree(&self) -> i64 {
        self.terms.iter().map(|(_, m)| m).sum()
    }

    pub fn scaled(&self, k: i64) -> Result<Self> {
        Divisor::new(self.terms.iter().map(|&(x, m)| (x, m * k)).collect())
    }

    fn require_degree_zero(&self) -> Result<()> {
        match self.degree() {
            0 => Ok(()),
            d => Err(Error::DegreeNotZero(d)),
        }
    }

    fn common_point(&self, other: &Divisor) -> Option<SpherePoint> {
        self.terms
            .iter()
            .find(|(x, _)| other.terms.iter().any(|(y, _)| x == y))
            .map(|(x, _)| *x)
    }

    /// `Σ_k m_k ((x_k) − (x_anchor))` over the non-anchor points; valid for degree zero.
    pub fn telescope(&self, anchor: usize) -> Vec<(SpherePoint, SpherePoint, i64)> {
        let x0 = self.terms[anchor].0;
        self.terms
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != anchor)
            .map(|(_, &(x, m))| (x, x0, m))
            .collect()
    }
}

fn check_pairing(a: &Divisor, b: &Divisor) -> Result<()> {
    a.require_degree_zero()?;
    b.require_degree_zero()?;
    if let Some(x) = a.common_point(b) {
        return Err(Error::SupportsIntersect(x.to_string()));
    }
    Ok(())
}

pub(crate) fn log_cr(a: SpherePoint, b: SpherePoint, c: SpherePoint, d: SpherePoint) -> Result<f64> {
    log_abs_cross_ratio(a, b, c, d).ok_or_else(|| Error::CrossRatioDegenerate(format!("<{a}, {b}, {c}, {d}>")))
}

/// `g(A, B)` on the sphere: `Σ m n log|<a, a₀, b, b₀>|` over telescoped pairs.
pub fn green_genus0(a: &Divisor, b: &Divisor) -> Result<f64> {
    check_pairing(a, b)?;
    let mut total = 0.0;
    for (x, x0, m) in a.telescope(0) {
        for (y, y0, n) in b.telescope(0) {
            total += (m * n) as f64 * log_cr(x, x0, y, y0)?;
        }
    }
    Ok(total)
}

/// Diagnostics of one evaluation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GreenResult {
    pub value: f64,
    pub max_len: usize,
    /// Estimated size of the omitted terms (all series together).
    pub tail: f64,
    /// Gate ratio of the group.
    pub rho: f64,
    /// Coefficients `X_j` for the first divisor.
    pub x: Vec<f64>,
    /// Condition number of `Re τ`.
    pub condition_number: f64,
    /// Tail of the group average.
    pub group_sum_tail: f64,
    /// Tails of the conjugacy-class sums, one per generator.
    pub class_sum_tails: Vec<f64>,
}

/// Conjugacy-class words of `g_j` with their fixed points.
pub(crate) fn class_fixed_points(group: &SchottkyGroup, j: usize, max_len: usize) -> Result<Vec<(Word, SpherePoint, SpherePoint)>> {
    let g = Word::letter(Letter::gen(j as u16));
    conjugacy_reps(group.alphabet(), &g, max_len)?
        .into_iter()
        .map(|h| {
            let (zp, zm) = group.word_to_map(&h).fixed_points()?;
            Ok((h, zp, zm))
        })
        .collect()
}

fn class_sum<F>(group: &SchottkyGroup, j: usize, max_len: usize, term: F) -> Result<Graded<f64>>
where
    F: Fn(SpherePoint, SpherePoint) -> Result<f64> + Sync,
{
    let data = class_fixed_points(group, j, max_len)?;
    let words: Vec<Word> = data.iter().map(|(w, _, _)| w.clone()).collect();
    sum_over_words(&words, max_len, |w| {
        let (_, zp, zm) = data.iter().find(|(h, _, _)| h == w).expect("word from the class");
        term(*zp, *zm)
    })
}

fn require_in_domain(group: &SchottkyGroup, pts: &[SpherePoint]) -> Result<()> {
    match pts.iter().find(|z| !group.fundamental_domain_contains(**z)) {
        Some(z) => Err(Error::PointNotInFundamentalDomain(z.to_string())),
        None => Ok(()),
    }
}

/// `Σ_{h ∈ S(g_i)} log|<a, b, z⁺(h), z⁻(h)>|`, graded by word length.
pub fn nu_b_period_graded(group: &SchottkyGroup, a: SpherePoint, b: SpherePoint, i: usize, max_len: usize) -> Result<Graded<f64>> {
    require_in_domain(group, &[a, b])?;
    group.require_convergence()?;
    if i >= group.genus() {
        return Err(Error::Invalid(format!("generator index out of range for genus {}", group.genus())));
    }
    class_sum(group, i, max_len, |zp, zm| log_cr(a, b, zp, zm))
}

/// Real part of the `b_i`-period of `ν_{(a)−(b)}`.
pub fn nu_b_period_real(group: &SchottkyGroup, a: SpherePoint, b: SpherePoint, i: usize, max_len: usize) -> Result<f64> {
    nu_b_period_graded(group, a, b, i, max_len).map(|s| s.total())
}

/// Solution of the `X` system with its diagnostics.
#[derive(Debug, Clone)]
pub struct XSolution {
    pub x: Vec<f64>,
    pub rhs: Vec<f64>,
    pub condition_number: f64,
    /// `‖Re τ · X − rhs‖_∞`.
    pub residual: f64,
}

fn point_key(z: SpherePoint) -> [u64; 4] {
    match z {
        SpherePoint::Infinity => [0, 0, 1, 0],
        SpherePoint::Finite(z) => [z.re.to_bits(), z.im.to_bits(), 0, 0],
    }
}

pub(crate) fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `Re τ · X = (Re ∫_{b_i} ν_{(a)−(b)})_i`.
pub fn solve_x(group: &SchottkyGroup, a: SpherePoint, b: SpherePoint, max_len: usize) -> Result<XSolution> {
    let p = group.genus();
    let rhs = (0..p)
        .map(|i| nu_b_period_real(group, a, b, i, max_len))
        .collect::<Result<Vec<_>>>()?;
    if p == 0 {
        return Ok(XSolution { x: Vec::new(), rhs, condition_number: 1.0, residual: 0.0 });
    }
    let key: XKey = (point_key(a), point_key(b), max_len);
    let tau = tau_matrix(group, max_len)?;
    let m = DMatrix::from_fn(p, p, |i, j| tau.entries[i][j].re);
    let cond = condition_number(&m);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let cached = group.cache.x.lock().unwrap().get(&key).cloned();
    let x = if let Some(x) = cached {
        x
    } else {
        let r = DVector::from_vec(rhs.clone());
        let sol = m.clone().lu().solve(&r).ok_or(Error::IllConditioned(f64::INFINITY))?;
        let x: Vec<f64> = sol.iter().copied().collect();
        group.cache.x.lock().unwrap().insert(key, x.clone());
        x
    };
    let residual = (0..p)
        .map(|i| ((0..p).map(|j| m[(i, j)] * x[j]).sum::<f64>() - rhs[i]).abs())
        .fold(0.0, f64::max);
    Ok(XSolution { x, rhs, condition_number: cond, residual })
}

/// The series that make up one point-pair evaluation, graded by word length.
#[derive(Debug, Clone)]
pub struct GreenSeries {
    /// `Σ_h log|<a, b, h c, h d>|`.
    pub group_sum: Graded<f64>,
    /// `Σ_{h ∈ S(g_j)} log|<z⁺(h), z⁻(h), c, d>|`, one per generator.
    pub class_sums: Vec<Graded<f64>>,
    pub x: XSolution,
}

impl GreenSeries {
    pub fn value(&self) -> f64 {
        self.group_sum.total()
            - self
                .x
                .x
                .iter()
                .zip(&self.class_sums)
                .map(|(xj, s)| xj * s.total())
                .sum::<f64>()
    }
}

fn last_active_magnitude(g: &Graded<f64>) -> f64 {
    let n = g.abs_by_length.len();
    g.abs_by_length[n.saturating_sub(2)..].iter().cloned().fold(0.0, f64::max)
}

fn chordal_hit(p: SpherePoint, targets: &[SpherePoint]) -> Option<f64> {
    targets
        .iter()
        .map(|t| p.chordal_distance(t))
        .find(|&d| d < ORBIT_COLLISION_EPS)
}

/// The graded series for `g((a) − (b), (c) − (d))` without domain checks.
pub(crate) fn pair_series_unchecked(
    group: &SchottkyGroup,
    a: SpherePoint,
    b: SpherePoint,
    c: SpherePoint,
    d: SpherePoint,
    max_len: usize,
) -> Result<GreenSeries> {
    let x = solve_x(group, a, b, max_len)?;
    let table = group.word_table(max_len);
    let group_sum = sum_over_table(
        &table,
        max_len,
        |_| true,
        |k| {
            let h = &table.maps[k];
            let (hc, hd) = (h.apply(c), h.apply(d));
            for p in [hc, hd] {
                if let Some(distance) = chordal_hit(p, &[a, b]) {
                    return Err(Error::OrbitCollision { word: table.words[k].to_string(), distance });
                }
            }
            log_cr(a, b, hc, hd)
        },
    )?;
    let class_sums = (0..group.genus())
        .map(|j| class_sum(group, j, max_len, |zp, zm| log_cr(zp, zm, c, d)))
        .collect::<Result<Vec<_>>>()?;
    Ok(GreenSeries { group_sum, class_sums, x })
}

fn result_from_series(group: &SchottkyGroup, s: &GreenSeries, max_len: usize) -> GreenResult {
    let rho = group.convergence().rho;
    let group_sum_tail = tail_estimate(s.group_sum.last_magnitude(), rho);
    let class_sum_tails: Vec<f64> = s
        .class_sums
        .iter()
        .map(|g| tail_estimate(last_active_magnitude(g), rho))
        .collect();
    let tail = group_sum_tail
        + s.x.x.iter().zip(&class_sum_tails).map(|(x, t)| x.abs() * t).sum::<f64>();
    GreenResult {
        value: s.value(),
        max_len,
        tail,
        rho,
        x: s.x.x.clone(),
        condition_number: s.x.condition_number,
        group_sum_tail,
        class_sum_tails,
    }
}

/// The graded series behind [`green_pair_points`], after all input checks.
pub fn green_pair_series(
    group: &SchottkyGroup,
    a: SpherePoint,
    b: SpherePoint,
    c: SpherePoint,
    d: SpherePoint,
    max_len: usize,
) -> Result<GreenSeries> {
    require_in_domain(group, &[a, b, c, d])?;
    for x in [a, b] {
        if x == c || x == d {
            return Err(Error::SupportsIntersect(x.to_string()));
        }
    }
    group.require_convergence()?;
    pair_series_unchecked(group, a, b, c, d, max_len)
}

/// `g((a) − (b), (c) − (d))` truncated at word length `max_len`.
pub fn green_pair_points(
    group: &SchottkyGroup,
    a: SpherePoint,
    b: SpherePoint,
    c: SpherePoint,
    d: SpherePoint,
    max_len: usize,
) -> Result<GreenResult> {
    let s = green_pair_series(group, a, b, c, d, max_len)?;
    Ok(result_from_series(group, &s, max_len))
}

/// `g(A, B)` by bilinear expansion over anchored pairs (anchor: first point of each).
pub fn green_divisors(group: &SchottkyGroup, a: &Divisor, b: &Divisor, max_len: usize) -> Result<GreenResult> {
    green_divisors_anchored(group, a, 0, b, 0, max_len)
}

/// [`green_divisors`] with explicit anchor indices into each divisor.
pub fn green_divisors_anchored(
    group: &SchottkyGroup,
    a: &Divisor,
    anchor_a: usize,
    b: &Divisor,
    anchor_b: usize,
    max_len: usize,
) -> Result<GreenResult> {
    check_pairing(a, b)?;
    if anchor_a >= a.terms().len() || anchor_b >= b.terms().len() {
        return Err(Error::MalformedDivisor("anchor index out of range".into()));
    }
    let pts: Vec<SpherePoint> = a.terms().iter().chain(b.terms()).map(|(x, _)| *x).collect();
    require_in_domain(group, &pts)?;
    group.require_convergence()?;
    let p = group.genus();
    let mut acc = GreenResult {
        value: 0.0,
        max_len,
        tail: 0.0,
        rho: group.convergence().rho,
        x: vec![0.0; p],
        condition_number: 1.0,
        group_sum_tail: 0.0,
        class_sum_tails: vec![0.0; p],
    };
    for (x, x0, m) in a.telescope(anchor_a) {
        let mut x_added = false;
        for (y, y0, n) in b.telescope(anchor_b) {
            let s = pair_series_unchecked(group, x, x0, y, y0, max_len)?;
            let r = result_from_series(group, &s, max_len);
            let k = (m * n) as f64;
            acc.value += k * r.value;
            acc.tail += k.abs() * r.tail;
            acc.group_sum_tail += k.abs() * r.group_sum_tail;
            for j in 0..p {
                acc.class_sum_tails[j] += k.abs() * r.class_sum_tails[j];
            }
            acc.condition_number = r.condition_number;
            if !x_added {
                for j in 0..p {
                    acc.x[j] += m as f64 * r.x[j];
                }
                x_added = true;
            }
        }
    }
    Ok(acc)
}

/// Five-point Laplacian of `c ↦ g((a) − (b), (c) − (d))` at `c` with step `h`,
/// `d` being the group's base point.
pub fn harmonicity_residual(group: &SchottkyGroup, a: SpherePoint, b: SpherePoint, c: SpherePoint, h: f64, max_len: usize) -> Result<f64> {
    harmonicity_residual_with(group, a, b, c, group.basepoint(), h, max_len)
}

/// [`harmonicity_residual`] with an explicit fixed point `d`.
pub fn harmonicity_residual_with(
    group: &SchottkyGroup,
    a: SpherePoint,
    b: SpherePoint,
    c: SpherePoint,
    d: SpherePoint,
    h: f64,
    max_len: usize,
) -> Result<f64> {
    let cz = c
        .finite()
        .ok_or_else(|| Error::Invalid("the Laplacian needs a finite evaluation point".into()))?;
    require_in_domain(group, &[a, b, c, d])?;
    group.require_convergence()?;
    // Singularities of the truncated function of c: preimages of a and b under
    // the words used, and the class fixed points.
    let table = group.word_table(max_len);
    let mut singular: Vec<SpherePoint> = Vec::new();
    for k in table.ball(max_len) {
        let inv = table.maps[k].inverse();
        singular.push(inv.apply(a));
        singular.push(inv.apply(b));
    }
    for j in 0..group.genus() {
        for (_, zp, zm) in class_fixed_points(group, j, max_len)? {
            singular.push(zp);
            singular.push(zm);
        }
    }
    singular.push(d);
    if let Some(s) = singular
        .iter()
        .filter_map(|s| s.finite())
        .find(|s| (s - cz).norm() < 10.0 * h)
    {
        return Err(Error::TooCloseToSingularity(format!("c = {c} is within {:e} of {}", 10.0 * h, SpherePoint::from(s))));
    }
    let f = |z: num_complex::Complex64| -> Result<f64> {
        pair_series_unchecked(group, a, b, z.into(), d, max_len).map(|s| s.value())
    };
    let i = num_complex::Complex64::i();
    let center = f(cz)?;
    let around = f(cz + h)? + f(cz - h)? + f(cz + i * h)? + f(cz - i * h)?;
    Ok(((around - 4.0 * center) / (h * h)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn pt(re: f64, im: f64) -> SpherePoint {
        SpherePoint::new(re, im)
    }

    #[test]
    fn genus0_examples() {
        let a = Divisor::pair(SpherePoint::real(2.0), SpherePoint::real(1.0)).unwrap();
        let b = Divisor::pair(SpherePoint::real(0.0), SpherePoint::Infinity).unwrap();
        assert!((green_genus0(&a, &b).unwrap() - 2f64.ln()).abs() < 1e-15);
        let c = pt(0.3, 0.2);
        assert!(matches!(Divisor::new(vec![(c, 1), (c, -1)]), Err(Error::MalformedDivisor(_))));
        let d = Divisor::new(vec![(c, 1)]).unwrap();
        assert_eq!(green_genus0(&a, &d), Err(Error::DegreeNotZero(1)));
        let e = Divisor::pair(SpherePoint::real(2.0), pt(5.0, 5.0)).unwrap();
        assert!(matches!(green_genus0(&a, &e), Err(Error::SupportsIntersect(_))));
    }

    #[test]
    fn trivial_group_matches_genus0() {
        let g = SchottkyGroup::trivial(SpherePoint::real(0.0));
        let (a, b, c, d) = (pt(0.5, 1.0), pt(-2.0, 0.1), pt(3.0, -1.0), pt(0.7, 0.7));
        let direct = green_genus0(&Divisor::pair(a, b).unwrap(), &Divisor::pair(c, d).unwrap()).unwrap();
        let r = green_pair_points(&g, a, b, c, d, 5).unwrap();
        assert_eq!(r.value, direct);
    }

    #[test]
    fn equal_points_give_zero() {
        let g = fixtures::gamma2();
        let c = pt(0.4, -0.3);
        let r = green_pair_points(&g, pt(0.5, 0.5), pt(-1.0, 1.0), c, c, 6).unwrap();
        assert_eq!(r.value, 0.0);
        let x = solve_x(&g, c, c, 6).unwrap();
        assert!(x.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cyclic_x_has_closed_form() {
        let g = fixtures::cyclic_quarter();
        let (a, b) = (pt(0.8, 0.6), pt(-1.2, 0.3));
        let x = solve_x(&g, a, b, 8).unwrap();
        let zero = SpherePoint::real(0.0);
        let expect = log_abs_cross_ratio(a, b, zero, SpherePoint::Infinity).unwrap() / 0.25f64.ln();
        assert!((x.x[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn gamma2_x_residual() {
        let g = fixtures::gamma2();
        let x = solve_x(&g, pt(0.5, 0.5), pt(-1.0, 1.5), 8).unwrap();
        assert!(x.residual <= 1e-12);
    }

    #[test]
    fn biadditivity_and_anchor_independence() {
        let g = fixtures::gamma2();
        let (a, b) = (pt(0.5, 0.5), pt(-1.0, 1.5));
        let bdiv = Divisor::new(vec![(pt(0.2, -1.0), 1), (pt(1.5, 0.3), 2), (pt(-0.4, -0.2), -3)]).unwrap();
        let one = green_divisors(&g, &Divisor::pair(a, b).unwrap(), &bdiv, 6).unwrap();
        let two = green_divisors(&g, &Divisor::pair(a, b).unwrap().scaled(2).unwrap(), &bdiv, 6).unwrap();
        assert!((two.value - 2.0 * one.value).abs() < 1e-12);
        let other = green_divisors_anchored(&g, &Divisor::pair(a, b).unwrap(), 1, &bdiv, 2, 6).unwrap();
        assert!((other.value - one.value).abs() < 1e-9);
    }

    #[test]
    fn guard_near_divisor() {
        let g = fixtures::gamma2();
        let a = pt(0.5, 0.5);
        let err = harmonicity_residual(&g, a, pt(-1.0, 1.5), pt(0.5 + 1e-3, 0.5), 1e-3, 6).unwrap_err();
        assert!(matches!(err, Error::TooCloseToSingularity(_)));
    }
}
