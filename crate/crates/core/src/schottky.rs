//! Classical Schottky groups.
//!
//! A group of genus `p` is given by loxodromic generators `g_1..g_p` and `2p`
//! discs with disjoint closures such that `g_i` carries the circle `C_i` onto
//! `C_{p+i}` and the complement of `D_i` into `D_{p+i}`. The closed fundamental
//! domain `X_Γ` is the sphere minus the open discs.
//!
//! A disc is normally the inside of its circle; `outside` selects the other
//! side (which then contains ∞). At most one disc can be of that kind.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::freegroup::{Alphabet, Letter, Word};
use crate::moebius::{MapClass, MoebiusMap, SpherePoint};
use crate::periods::PeriodMatrix;
use crate::series::tree_sum;

/// Sample points per circle for marking checks.
pub const MARKING_SAMPLES: usize = 64;
/// Relative tolerance for "lies on the image circle".
pub const MARKING_TOL: f64 = 1e-9;
/// Margin on the series ratio for the convergence gate.
pub const GATE_MARGIN: f64 = 0.05;
/// Upper bound on the number of words the default gate will enumerate.
const GATE_WORD_BUDGET: usize = 200_000;

/// A round disc on the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Complex64,
    pub radius: f64,
    /// The disc is `|z - center| > radius` (together with ∞).
    pub outside: bool,
}

impl Circle {
    pub fn new(center: Complex64, radius: f64) -> Self {
        Circle { center, radius, outside: false }
    }

    pub fn exterior(center: Complex64, radius: f64) -> Self {
        Circle { center, radius, outside: true }
    }

    pub fn point(&self, theta: f64) -> Complex64 {
        self.center + Complex64::from_polar(self.radius, theta)
    }

    /// `m` equally spaced points on the circle.
    pub fn samples(&self, m: usize) -> Vec<Complex64> {
        (0..m)
            .map(|k| self.point(2.0 * std::f64::consts::PI * k as f64 / m as f64))
            .collect()
    }

    /// Signed depth of `z` inside the disc: positive inside, zero on the circle.
    pub fn depth(&self, z: SpherePoint) -> f64 {
        match z {
            SpherePoint::Infinity => {
                if self.outside {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
            SpherePoint::Finite(z) => {
                let d = self.radius - (z - self.center).norm();
                if self.outside {
                    -d
                } else {
                    d
                }
            }
        }
    }

    /// Relative version of [`Circle::depth`].
    pub fn rel_depth(&self, z: SpherePoint) -> f64 {
        self.depth(z) / self.radius.max(1.0)
    }

    pub fn contains_open(&self, z: SpherePoint) -> bool {
        self.depth(z) > 0.0
    }

    /// A point well inside the disc, for orientation and marking checks.
    fn inner_points(&self) -> Vec<SpherePoint> {
        let ring = if self.outside { 2.0 } else { 0.5 };
        let shrunk = Circle { radius: self.radius * ring, ..*self };
        let mut v: Vec<SpherePoint> = shrunk.samples(MARKING_SAMPLES).into_iter().map(SpherePoint::from).collect();
        v.push(if self.outside { SpherePoint::Infinity } else { self.center.into() });
        v
    }

    /// Image of the disc under `m`, assuming the pole of `m` is off the circle.
    pub fn image(&self, m: &MoebiusMap) -> Result<Circle> {
        let pts: Vec<Complex64> = [0.0, 2.0, 4.0]
            .iter()
            .map(|&t| m.apply(self.point(t).into()).finite())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Invalid("circle maps through infinity".into()))?;
        let (center, radius) = circumcircle(pts[0], pts[1], pts[2])?;
        let pole = m.pole();
        // The image disc is bounded iff the pole lies outside the source disc.
        let outside = self.depth(pole) > 0.0;
        Ok(Circle { center, radius, outside })
    }
}

fn circumcircle(a: Complex64, b: Complex64, c: Complex64) -> Result<(Complex64, f64)> {
    let (b, c) = (b - a, c - a);
    let d = 2.0 * (b.re * c.im - b.im * c.re);
    if d.abs() < 1e-300 {
        return Err(Error::Invalid("image of circle is a line".into()));
    }
    let (bb, cc) = (b.norm_sqr(), c.norm_sqr());
    let ux = (c.im * bb - b.im * cc) / d;
    let uy = (b.re * cc - c.re * bb) / d;
    let u = Complex64::new(ux, uy);
    Ok((u + a, u.norm()))
}

/// Whether the closures of two discs are disjoint.
pub fn discs_disjoint(a: &Circle, b: &Circle) -> bool {
    let dist = (a.center - b.center).norm();
    match (a.outside, b.outside) {
        (false, false) => dist > a.radius + b.radius,
        (true, false) => dist + b.radius < a.radius,
        (false, true) => dist + a.radius < b.radius,
        (true, true) => false,
    }
}

/// The standard pairing `z ↦ c₂ + r₁r₂/(z − c₁)`, carrying the outside of the
/// first circle onto the inside of the second.
pub fn pair(from: &Circle, to: &Circle) -> Result<MoebiusMap> {
    let r = Complex64::new(from.radius * to.radius, 0.0);
    MoebiusMap::new(to.center, r - from.center * to.center, Complex64::new(1.0, 0.0), -from.center)
}

/// Outcome of the series-ratio test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converges,
    Diverges,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Converges => "converges",
            Verdict::Diverges => "diverges",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Generation sums of the Poincaré series at `s = 1` and what they imply.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceReport {
    pub max_len: usize,
    /// `σ_n(1)` for `n = 1..=max_len`.
    pub sums: Vec<f64>,
    /// `(σ_L / σ_{L-3})^{1/3}`.
    pub rho: f64,
    pub verdict: Verdict,
    /// Exponent at which the fitted growth rate crosses one.
    pub abscissa: f64,
    /// Point `w` of the chart `ζ = 1/(z − w)` used, `None` for the model coordinate.
    pub chart_pole: Option<[f64; 2]>,
}

impl ConvergenceReport {
    pub fn converges(&self) -> bool {
        self.verdict == Verdict::Converges
    }

    /// `Ok` when the gate is passed, else the error the series operations raise.
    pub fn require(&self) -> Result<()> {
        if self.converges() {
            Ok(())
        } else {
            Err(Error::ConvergenceNotEstablished { rho: self.rho, verdict: self.verdict.to_string() })
        }
    }
}

/// Every reduced word up to some length with its map, grouped by length.
#[derive(Debug)]
pub struct WordTable {
    pub max_len: usize,
    pub words: Vec<Word>,
    pub maps: Vec<MoebiusMap>,
    offsets: Vec<usize>,
}

impl WordTable {
    /// Index range of generation `n`.
    pub fn generation(&self, n: usize) -> std::ops::Range<usize> {
        self.offsets[n]..self.offsets[n + 1]
    }

    /// Index range of the ball of radius `n`.
    pub fn ball(&self, n: usize) -> std::ops::Range<usize> {
        0..self.offsets[n + 1]
    }

    pub fn index_of(&self, w: &Word) -> Option<usize> {
        if w.len() > self.max_len {
            return None;
        }
        let r = self.generation(w.len());
        self.words[r.clone()].binary_search_by(|x| x.cmp(w)).ok().map(|k| k + r.start)
    }
}

pub(crate) type XKey = ([u64; 4], [u64; 4], usize);

#[derive(Default)]
pub(crate) struct Cache {
    table: RwLock<Option<Arc<WordTable>>>,
    gate: OnceLock<ConvergenceReport>,
    pub(crate) tau: Mutex<HashMap<usize, Arc<PeriodMatrix>>>,
    pub(crate) x: Mutex<HashMap<XKey, Vec<f64>>>,
}

/// A validated marked Schottky group with its base point.
#[derive(Clone)]
pub struct SchottkyGroup {
    generators: Vec<MoebiusMap>,
    circles: Vec<Circle>,
    basepoint: SpherePoint,
    fixed: Vec<(SpherePoint, SpherePoint)>,
    multipliers: Vec<Complex64>,
    alphabet: Alphabet,
    pub(crate) cache: Arc<Cache>,
}

impl fmt::Debug for SchottkyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SchottkyGroup")
            .field("generators", &self.generators)
            .field("circles", &self.circles)
            .field("basepoint", &self.basepoint)
            .finish()
    }
}

impl SchottkyGroup {
    /// Validates the marking and caches fixed points and multipliers.
    pub fn build(generators: Vec<MoebiusMap>, circles: Vec<Circle>, basepoint: SpherePoint) -> Result<Self> {
        let p = generators.len();
        if circles.len() != 2 * p {
            return Err(Error::CountMismatch(format!(
                "{p} generators need {} circles, got {}",
                2 * p,
                circles.len()
            )));
        }
        let mut fixed = Vec::with_capacity(p);
        let mut multipliers = Vec::with_capacity(p);
        for (i, g) in generators.iter().enumerate() {
            match g.classify() {
                MapClass::Loxodromic => {}
                other => return Err(Error::NotLoxodromic(format!("generator {}: {other}", i + 1))),
            }
            fixed.push(g.fixed_points()?);
            multipliers.push(g.multiplier()?);
        }
        for i in 0..circles.len() {
            if circles[i].radius <= 0.0 || !circles[i].radius.is_finite() {
                return Err(Error::Invalid(format!("circle {} has non-positive radius", i + 1)));
            }
            for j in i + 1..circles.len() {
                if !discs_disjoint(&circles[i], &circles[j]) {
                    return Err(Error::CirclesOverlap(i + 1, j + 1));
                }
            }
        }
        for (i, g) in generators.iter().enumerate() {
            check_marking(i, g, &circles[i], &circles[p + i])?;
        }
        if circles.iter().any(|c| c.rel_depth(basepoint) > MARKING_TOL) {
            return Err(Error::BasepointOutsideDomain(basepoint.to_string()));
        }
        Ok(SchottkyGroup {
            generators,
            circles,
            basepoint,
            fixed,
            multipliers,
            alphabet: Alphabet::free(p),
            cache: Arc::default(),
        })
    }

    /// Group whose generators pair consecutive circle halves with [`pair`].
    pub fn from_circle_pairs(circles: Vec<Circle>, basepoint: SpherePoint) -> Result<Self> {
        if !circles.len().is_multiple_of(2) {
            return Err(Error::CountMismatch("odd number of circles".into()));
        }
        let p = circles.len() / 2;
        let gens = (0..p).map(|i| pair(&circles[i], &circles[p + i])).collect::<Result<Vec<_>>>()?;
        Self::build(gens, circles, basepoint)
    }

    /// The trivial group: only the identity, fundamental domain the sphere.
    pub fn trivial(basepoint: SpherePoint) -> Self {
        Self::build(Vec::new(), Vec::new(), basepoint).expect("trivial group is valid")
    }

    pub fn genus(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[MoebiusMap] {
        &self.generators
    }

    pub fn circles(&self) -> &[Circle] {
        &self.circles
    }

    pub fn basepoint(&self) -> SpherePoint {
        self.basepoint
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// `(z⁺, z⁻)` of generator `i` (0-based).
    pub fn fixed_points(&self, i: usize) -> (SpherePoint, SpherePoint) {
        self.fixed[i]
    }

    pub fn multiplier(&self, i: usize) -> Complex64 {
        self.multipliers[i]
    }

    /// Same group with a different base point.
    pub fn with_basepoint(&self, basepoint: SpherePoint) -> Result<Self> {
        Self::build(self.generators.clone(), self.circles.clone(), basepoint)
    }

    /// `h Γ h⁻¹` with discs and base point moved by `h`.
    pub fn conjugate(&self, h: &MoebiusMap) -> Result<Self> {
        let gens = self.generators.iter().map(|g| g.conjugate_by(h)).collect();
        let circles = self.circles.iter().map(|c| c.image(h)).collect::<Result<Vec<_>>>()?;
        Self::build(gens, circles, h.apply(self.basepoint))
    }

    pub fn letter_map(&self, l: Letter) -> MoebiusMap {
        let g = self.generators[l.index as usize];
        if l.inverse {
            g.inverse()
        } else {
            g
        }
    }

    fn check_letters(&self, w: &Word) -> Result<()> {
        match w.letters().iter().find(|l| !self.alphabet.contains(**l)) {
            Some(l) => Err(Error::Invalid(format!("letter {l} not in a rank-{} group", self.genus()))),
            None => Ok(()),
        }
    }

    /// The map of a word; `[x0, .., xn]` acts as `x0 ∘ .. ∘ xn`.
    pub fn word_to_map(&self, w: &Word) -> MoebiusMap {
        self.try_word_to_map(w).expect("word letters in range")
    }

    pub fn try_word_to_map(&self, w: &Word) -> Result<MoebiusMap> {
        self.check_letters(w)?;
        Ok(w.letters()
            .iter()
            .fold(MoebiusMap::identity(), |acc, &l| acc.compose(&self.letter_map(l))))
    }

    /// Index of the disc that contains the image of `X_Γ` under a word starting with `l`.
    pub fn disc_of_letter(&self, l: Letter) -> usize {
        let i = l.index as usize;
        if l.inverse {
            i
        } else {
            self.genus() + i
        }
    }

    /// The periodic extension of `w` to length at least `depth`, applied to `z₀`.
    pub fn limit_point(&self, w: &Word, depth: usize) -> Result<SpherePoint> {
        if w.is_empty() {
            return Err(Error::Invalid("limit point of the empty word".into()));
        }
        self.check_letters(w)?;
        let reps = depth.div_ceil(w.len()).max(1);
        // Apply letters to the point one at a time; the matrix of a long word
        // would lose its determinant to rounding.
        let ext = w.pow(reps);
        Ok(ext
            .letters()
            .iter()
            .rev()
            .fold(self.basepoint, |z, &l| self.letter_map(l).apply(z)))
    }

    /// Membership in the closed fundamental domain.
    pub fn fundamental_domain_contains(&self, z: SpherePoint) -> bool {
        self.circles.iter().all(|c| c.rel_depth(z) <= MARKING_TOL)
    }

    /// Reduced words up to `max_len` with their maps.
    pub fn word_table(&self, max_len: usize) -> Arc<WordTable> {
        if let Some(t) = self.cache.table.read().unwrap().as_ref() {
            if t.max_len >= max_len {
                return t.clone();
            }
        }
        let t = Arc::new(self.build_table(max_len));
        *self.cache.table.write().unwrap() = Some(t.clone());
        t
    }

    fn build_table(&self, max_len: usize) -> WordTable {
        let mut words = vec![Word::identity()];
        let mut maps = vec![MoebiusMap::identity()];
        let mut offsets = vec![0, 1];
        for n in 1..=max_len {
            let prev = offsets[n - 1]..offsets[n];
            let next: Vec<(Word, MoebiusMap)> = prev
                .into_par_iter()
                .flat_map_iter(|k| {
                    let (w, m) = (&words[k], maps[k]);
                    self.alphabet
                        .successors(w.last())
                        .map(move |l| (w.extended(l), m.compose(&self.letter_map(l))))
                        .collect::<Vec<_>>()
                })
                .collect();
            for (w, m) in next {
                words.push(w);
                maps.push(m);
            }
            offsets.push(words.len());
        }
        WordTable { max_len, words, maps, offsets }
    }

    /// `σ_n(s) = Σ_{|w| = n} |(w)'(z₀)|^s` in the model coordinate.
    pub fn generation_sum(&self, n: usize, s: f64) -> Result<f64> {
        let logs = self.log_derivatives(n, &Chart::Model)?;
        Ok(tree_sum(&logs.iter().map(|l| (s * l).exp()).collect::<Vec<_>>()))
    }

    fn log_derivatives(&self, n: usize, chart: &Chart) -> Result<Vec<f64>> {
        let table = self.word_table(n);
        let z = chart.to_chart(self.basepoint);
        table.maps[table.generation(n)]
            .par_iter()
            .zip(&table.words[table.generation(n)])
            .map(|(m, w)| {
                let m = chart.conjugate(m);
                log_abs_derivative(&m, z).ok_or_else(|| Error::DerivativePole(w.to_string()))
            })
            .collect()
    }

    /// Chart in which the gate measures derivatives: the model coordinate when
    /// ∞ is in `X_Γ`, otherwise `ζ = 1/(z − w)` for a point `w` of `X_Γ` far
    /// from all circles and distinct from `z₀`.
    fn gate_chart(&self) -> Chart {
        if self.fundamental_domain_contains(SpherePoint::Infinity) {
            return Chart::Model;
        }
        let n = self.circles.len() as f64;
        let mean = self.circles.iter().map(|c| c.center).sum::<Complex64>() / n;
        let spread = self
            .circles
            .iter()
            .map(|c| (c.center - mean).norm() + c.radius)
            .fold(0.0, f64::max);
        let mut best: Option<(f64, Complex64)> = None;
        for &f in &[0.0, 0.125, 0.25, 0.375, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0] {
            for k in 0..32 {
                let w = mean + Complex64::from_polar(spread * f, 2.0 * std::f64::consts::PI * k as f64 / 32.0);
                let wp = SpherePoint::from(w);
                if !self.fundamental_domain_contains(wp) || wp.chordal_distance(&self.basepoint) < 1e-3 {
                    continue;
                }
                let clearance = self
                    .circles
                    .iter()
                    .map(|c| -c.depth(wp) / c.radius)
                    .fold(f64::INFINITY, f64::min);
                if best.is_none_or(|(b, _)| clearance > b) {
                    best = Some((clearance, w));
                }
            }
        }
        match best {
            Some((_, w)) => Chart::Pole(w),
            None => Chart::Model,
        }
    }

    /// Default gate length: 8 for rank ≤ 2, shorter for higher rank so the
    /// enumeration stays within budget (never below 4).
    pub fn default_gate_length(&self) -> usize {
        let mut len = 8;
        while len > 4 && (0..=len).map(|n| self.alphabet.sphere_size(n)).sum::<usize>() > GATE_WORD_BUDGET {
            len -= 1;
        }
        len
    }

    /// Runs the series-ratio test with words up to `max_len` (at least 4).
    pub fn estimate_convergence(&self, max_len: usize) -> Result<ConvergenceReport> {
        if max_len < 4 {
            return Err(Error::Invalid("gate needs at least four generations".into()));
        }
        if self.genus() == 0 {
            return Ok(ConvergenceReport {
                max_len,
                sums: vec![0.0; max_len],
                rho: 0.0,
                verdict: Verdict::Converges,
                abscissa: 0.0,
                chart_pole: None,
            });
        }
        let chart = self.gate_chart();
        let logs: Vec<Vec<f64>> = (1..=max_len).map(|n| self.log_derivatives(n, &chart)).collect::<Result<_>>()?;
        let sigma = |n: usize, s: f64| tree_sum(&logs[n - 1].iter().map(|l| (s * l).exp()).collect::<Vec<_>>());
        let sums: Vec<f64> = (1..=max_len).map(|n| sigma(n, 1.0)).collect();
        let rate = |s: f64| (sigma(max_len, s) / sigma(max_len - 3, s)).powf(1.0 / 3.0);
        let rho = rate(1.0);
        let verdict = if rho < 1.0 - GATE_MARGIN {
            Verdict::Converges
        } else if rho > 1.0 + GATE_MARGIN {
            Verdict::Diverges
        } else {
            Verdict::Inconclusive
        };
        let abscissa = if rate(0.0) <= 1.0 {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0, 2.0);
            if rate(hi) > 1.0 {
                hi
            } else {
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if rate(mid) > 1.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        };
        Ok(ConvergenceReport {
            max_len,
            sums,
            rho,
            verdict,
            abscissa,
            chart_pole: match chart {
                Chart::Model => None,
                Chart::Pole(w) => Some([w.re, w.im]),
            },
        })
    }

    /// The gate at [`SchottkyGroup::default_gate_length`], computed once.
    pub fn convergence(&self) -> &ConvergenceReport {
        self.cache.gate.get_or_init(|| {
            self.estimate_convergence(self.default_gate_length())
                .expect("base point lies in the fundamental domain")
        })
    }

    /// Fails with `ConvergenceNotEstablished` unless the gate is passed.
    pub fn require_convergence(&self) -> Result<()> {
        self.convergence().require()
    }
}

fn check_marking(i: usize, g: &MoebiusMap, from: &Circle, to: &Circle) -> Result<()> {
    let violated = |pt: SpherePoint, reason: &str| Error::MarkingViolated {
        generator: i + 1,
        point: pt.to_string(),
        reason: reason.to_string(),
    };
    for z in from.samples(MARKING_SAMPLES) {
        let w = g.apply(z.into());
        if to.rel_depth(w).abs() > MARKING_TOL || w.is_infinite() {
            return Err(violated(z.into(), "image is off the paired circle"));
        }
    }
    for z in from.inner_points() {
        let w = g.apply(z);
        if to.rel_depth(w) >= -MARKING_TOL {
            return Err(violated(z, "disc image meets the paired disc"));
        }
    }
    Ok(())
}

enum Chart {
    Model,
    /// `ζ = 1/(z − w)`.
    Pole(Complex64),
}

impl Chart {
    fn map(&self) -> Option<MoebiusMap> {
        match self {
            Chart::Model => None,
            Chart::Pole(w) => Some(
                MoebiusMap::new(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), -w)
                    .expect("chart map is invertible"),
            ),
        }
    }

    fn to_chart(&self, z: SpherePoint) -> SpherePoint {
        self.map().map_or(z, |p| p.apply(z))
    }

    fn conjugate(&self, m: &MoebiusMap) -> MoebiusMap {
        self.map().map_or(*m, |p| m.conjugate_by(&p))
    }
}

/// `log |m'(z)|`; at `z = ∞` the derivative is taken after conjugating by `z ↦ 1/z`.
pub fn log_abs_derivative(m: &MoebiusMap, z: SpherePoint) -> Option<f64> {
    let den = match z {
        SpherePoint::Finite(z) => m.c * z + m.d,
        SpherePoint::Infinity => m.a,
    };
    let n = den.norm();
    if n == 0.0 {
        None
    } else {
        Some(-2.0 * n.ln())
    }
}
