//! Möbius maps on the Riemann sphere.
//!
//! Points are [`SpherePoint`]s; the point at infinity is a separate variant and
//! every formula that can meet it is evaluated in homogeneous coordinates, so no
//! large-number surrogate ever stands in for `∞`.
//!
//! The cross-ratio convention used throughout the crate is
//!
//! ```text
//! <a, b, c, d> = (a - c)(b - d) / ((b - c)(a - d))
//! ```
//!
//! i.e. the value at `c` divided by the value at `d` of the function
//! `x ↦ (a - x)/(b - x)`, which has divisor `(a) - (b)`. With this convention
//! `<2, 1, 0, ∞> = 2` and `log|<a,b,c,d>|` is the genus-zero Green's function of
//! the divisors `(a) - (b)` and `(c) - (d)`.

use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Absolute tolerance for point equality and determinant singularity.
pub const DEFAULT_EPS: f64 = 1e-12;

/// Tolerance on `tr^2` used by [`MoebiusMap::classify`].
pub const CLASSIFY_EPS: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A point of `P¹(ℂ)`.
#[derive(Debug, Clone, Copy)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    pub fn new(re: f64, im: f64) -> Self {
        SpherePoint::Finite(Complex64::new(re, im))
    }

    pub fn real(x: f64) -> Self {
        SpherePoint::Finite(Complex64::new(x, 0.0))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    pub fn finite(&self) -> Option<Complex64> {
        match *self {
            SpherePoint::Finite(z) => Some(z),
            SpherePoint::Infinity => None,
        }
    }

    /// Homogeneous coordinates `[x : y]`, scaled so that the larger entry has
    /// modulus 1.
    pub fn homogeneous(&self) -> (Complex64, Complex64) {
        match *self {
            SpherePoint::Infinity => (ONE, ZERO),
            SpherePoint::Finite(z) => {
                if z.norm() > 1.0 {
                    let s = z.norm();
                    (z / s, Complex64::new(1.0 / s, 0.0))
                } else {
                    (z, ONE)
                }
            }
        }
    }

    /// The point `[x : y]`; `y = 0` is infinity.
    pub fn from_homogeneous(x: Complex64, y: Complex64) -> Self {
        if y == ZERO {
            SpherePoint::Infinity
        } else {
            SpherePoint::Finite(x / y)
        }
    }

    /// Equality within an absolute tolerance on finite values.
    pub fn approx_eq(&self, other: &SpherePoint, eps: f64) -> bool {
        match (self, other) {
            (SpherePoint::Infinity, SpherePoint::Infinity) => true,
            (SpherePoint::Finite(a), SpherePoint::Finite(b)) => (a - b).norm() <= eps,
            _ => false,
        }
    }

    /// Chordal distance on the unit sphere, in `[0, 2]`.
    pub fn chordal_distance(&self, other: &SpherePoint) -> f64 {
        match (self, other) {
            (SpherePoint::Infinity, SpherePoint::Infinity) => 0.0,
            (SpherePoint::Finite(z), SpherePoint::Infinity)
            | (SpherePoint::Infinity, SpherePoint::Finite(z)) => 2.0 / (1.0 + z.norm_sqr()).sqrt(),
            (SpherePoint::Finite(a), SpherePoint::Finite(b)) => {
                2.0 * (a - b).norm() / ((1.0 + a.norm_sqr()).sqrt() * (1.0 + b.norm_sqr()).sqrt())
            }
        }
    }
}

impl PartialEq for SpherePoint {
    fn eq(&self, other: &Self) -> bool {
        self.approx_eq(other, DEFAULT_EPS)
    }
}

impl From<Complex64> for SpherePoint {
    fn from(z: Complex64) -> Self {
        SpherePoint::Finite(z)
    }
}

impl From<f64> for SpherePoint {
    fn from(x: f64) -> Self {
        SpherePoint::real(x)
    }
}

impl fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpherePoint::Infinity => write!(f, "inf"),
            SpherePoint::Finite(z) => write!(f, "{}{:+}i", z.re, z.im),
        }
    }
}

/// Classification of a Möbius map by the trace of its normalized matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MapClass {
    Identity,
    Parabolic,
    Elliptic,
    Loxodromic,
}

impl fmt::Display for MapClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MapClass::Identity => "identity",
            MapClass::Parabolic => "parabolic",
            MapClass::Elliptic => "elliptic",
            MapClass::Loxodromic => "loxodromic",
        };
        f.write_str(s)
    }
}

/// `z ↦ (a z + b)/(c z + d)`, stored with `ad - bc = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoebiusMap {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl MoebiusMap {
    /// Builds and normalizes the map with matrix `[[a, b], [c, d]]`.
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        MoebiusMap { a, b, c, d }.normalize()
    }

    pub fn from_real(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::new(a.into(), b.into(), c.into(), d.into())
    }

    pub fn identity() -> Self {
        MoebiusMap { a: ONE, b: ZERO, c: ZERO, d: ONE }
    }

    /// `z ↦ λ z`.
    pub fn dilation(lambda: Complex64) -> Result<Self> {
        Self::new(lambda, ZERO, ZERO, ONE)
    }

    /// `z ↦ z + t`.
    pub fn translation(t: Complex64) -> Self {
        MoebiusMap { a: ONE, b: t, c: ZERO, d: ONE }
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> Complex64 {
        self.a + self.d
    }

    /// Rescales to determinant one.
    pub fn normalize(self) -> Result<Self> {
        self.normalize_with(DEFAULT_EPS)
    }

    pub fn normalize_with(self, eps: f64) -> Result<Self> {
        let det = self.det();
        if det.norm() < eps {
            return Err(Error::SingularMatrix(det.norm()));
        }
        let k = det.sqrt().inv();
        Ok(MoebiusMap {
            a: self.a * k,
            b: self.b * k,
            c: self.c * k,
            d: self.d * k,
        })
    }

    pub fn apply(&self, z: SpherePoint) -> SpherePoint {
        match z {
            SpherePoint::Infinity => SpherePoint::from_homogeneous(self.a, self.c),
            SpherePoint::Finite(z) => {
                SpherePoint::from_homogeneous(self.a * z + self.b, self.c * z + self.d)
            }
        }
    }

    /// `self ∘ other`.
    ///
    /// The product of determinant-one matrices is not renormalized: for long
    /// words `ad - bc` is dominated by rounding in the entries, while the
    /// entries themselves stay accurate.
    pub fn compose(&self, other: &MoebiusMap) -> MoebiusMap {
        MoebiusMap {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    pub fn inverse(&self) -> MoebiusMap {
        MoebiusMap {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// `h ∘ self ∘ h⁻¹`.
    pub fn conjugate_by(&self, h: &MoebiusMap) -> MoebiusMap {
        h.compose(self).compose(&h.inverse())
    }

    pub fn power(&self, n: i64) -> MoebiusMap {
        let base = if n < 0 { self.inverse() } else { *self };
        let mut acc = MoebiusMap::identity();
        for _ in 0..n.unsigned_abs() {
            acc = acc.compose(&base);
        }
        acc
    }

    /// Projective distance to another map: `min(‖M - N‖, ‖M + N‖)` in the max norm.
    pub fn distance(&self, other: &MoebiusMap) -> f64 {
        let diff = |s: f64| {
            [
                self.a - other.a * s,
                self.b - other.b * s,
                self.c - other.c * s,
                self.d - other.d * s,
            ]
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
        };
        diff(1.0).min(diff(-1.0))
    }

    pub fn is_identity(&self, eps: f64) -> bool {
        self.distance(&MoebiusMap::identity()) <= eps
    }

    pub fn classify(&self) -> MapClass {
        self.classify_with(CLASSIFY_EPS)
    }

    pub fn classify_with(&self, eps: f64) -> MapClass {
        if self.is_identity(eps) {
            return MapClass::Identity;
        }
        let t2 = self.trace() * self.trace();
        if (t2 - 4.0).norm() <= eps {
            MapClass::Parabolic
        } else if t2.im.abs() <= eps && t2.re >= 0.0 && t2.re < 4.0 {
            MapClass::Elliptic
        } else {
            MapClass::Loxodromic
        }
    }

    fn require_loxodromic(&self) -> Result<()> {
        match self.classify() {
            MapClass::Loxodromic => Ok(()),
            other => Err(Error::NotLoxodromic(other.to_string())),
        }
    }

    /// Attracting and repelling fixed points `(z⁺, z⁻)`.
    pub fn fixed_points(&self) -> Result<(SpherePoint, SpherePoint)> {
        self.require_loxodromic()?;
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        // Roots of c z² + (d - a) z - b = 0 in homogeneous form, picking the
        // cancellation-free branch for each.
        let s = (self.trace() * self.trace() - 4.0).sqrt();
        let w1 = a - d + s;
        let w2 = a - d - s;
        let w = if w1.norm() >= w2.norm() { w1 } else { w2 };
        let r1 = (w, c * 2.0);
        let r2 = (-b * 2.0, w);
        // Eigenvalue on the eigenvector [x : y] is (c x + d y)/y = (a x + b y)/x.
        let eig = |(x, y): (Complex64, Complex64)| {
            if y.norm() >= x.norm() {
                (c * x + d * y) / y
            } else {
                (a * x + b * y) / x
            }
        };
        let p1 = SpherePoint::from_homogeneous(r1.0, r1.1);
        let p2 = SpherePoint::from_homogeneous(r2.0, r2.1);
        if eig(r1).norm() >= eig(r2).norm() {
            Ok((p1, p2))
        } else {
            Ok((p2, p1))
        }
    }

    /// The multiplier `q` with `|q| < 1`: the derivative at `z⁺`.
    pub fn multiplier(&self) -> Result<Complex64> {
        self.require_loxodromic()?;
        let t = self.trace();
        let s = (t * t - 4.0).sqrt();
        let l1 = (t + s) / 2.0;
        let l2 = (t - s) / 2.0;
        let big = if l1.norm() >= l2.norm() { l1 } else { l2 };
        Ok((big * big).inv())
    }

    /// Derivative `1/(c z + d)²` at a finite point; `None` at the pole.
    pub fn derivative_at(&self, z: Complex64) -> Option<Complex64> {
        let den = self.c * z + self.d;
        if den == ZERO {
            None
        } else {
            Some((den * den).inv())
        }
    }

    /// The pole `-d/c`, or infinity when `c = 0`.
    pub fn pole(&self) -> SpherePoint {
        SpherePoint::from_homogeneous(-self.d, self.c)
    }
}

impl Mul for MoebiusMap {
    type Output = MoebiusMap;

    fn mul(self, rhs: MoebiusMap) -> MoebiusMap {
        self.compose(&rhs)
    }
}

fn hdet(u: (Complex64, Complex64), v: (Complex64, Complex64)) -> Complex64 {
    u.0 * v.1 - u.1 * v.0
}

/// The cross-ratio `(a - c)(b - d) / ((b - c)(a - d))`, extended to infinity.
///
/// Returns [`Error::Indeterminate`] when numerator and denominator both vanish.
pub fn cross_ratio(
    a: SpherePoint,
    b: SpherePoint,
    c: SpherePoint,
    d: SpherePoint,
) -> Result<SpherePoint> {
    let (ha, hb, hc, hd) = (a.homogeneous(), b.homogeneous(), c.homogeneous(), d.homogeneous());
    let num = hdet(ha, hc) * hdet(hb, hd);
    let den = hdet(hb, hc) * hdet(ha, hd);
    if num.norm() <= DEFAULT_EPS * DEFAULT_EPS && den.norm() <= DEFAULT_EPS * DEFAULT_EPS {
        return Err(Error::Indeterminate);
    }
    Ok(SpherePoint::from_homogeneous(num, den))
}

/// `log|<a, b, c, d>|`; fails if the cross-ratio is 0, ∞ or indeterminate.
pub fn log_abs_cross_ratio(
    a: SpherePoint,
    b: SpherePoint,
    c: SpherePoint,
    d: SpherePoint,
) -> Option<f64> {
    if let (SpherePoint::Finite(a), SpherePoint::Finite(b), SpherePoint::Finite(c), SpherePoint::Finite(d)) =
        (a, b, c, d)
    {
        let num = (a - c) * (b - d);
        let den = (b - c) * (a - d);
        if num == ZERO || den == ZERO {
            return None;
        }
        return Some((num.norm() / den.norm()).ln());
    }
    match cross_ratio(a, b, c, d).ok()? {
        SpherePoint::Finite(z) if z != ZERO => Some(z.norm().ln()),
        _ => None,
    }
}
