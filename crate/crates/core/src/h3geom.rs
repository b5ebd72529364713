//! Upper half-space model of hyperbolic 3-space.
//!
//! A point is `(z, y)` with `z ∈ ℂ`, `y > 0`, metric `(|dz|² + dy²)/y²`.
//! Geodesics end on the sphere at infinity and are either vertical lines over a
//! finite point or half-circles orthogonal to the boundary plane.
//!
//! Everything here is computed from the geometry of feet and arc positions, so
//! the identities relating these quantities to cross-ratios are genuine checks.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::moebius::{MoebiusMap, SpherePoint, DEFAULT_EPS};

/// A point of the upper half-space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H3Point {
    pub z: Complex64,
    pub y: f64,
}

impl H3Point {
    pub fn new(z: Complex64, y: f64) -> Result<Self> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::Invalid(format!("height must be positive, got {y}")));
        }
        Ok(H3Point { z, y })
    }
}

/// Either a point on the sphere at infinity or an interior point.
#[derive(Debug, Clone, Copy)]
pub enum Locus {
    Boundary(SpherePoint),
    Interior(H3Point),
}

/// Oriented geodesic from `start` to `end`.
#[derive(Debug, Clone, Copy)]
pub struct Geodesic {
    start: SpherePoint,
    end: SpherePoint,
}

enum Shape {
    /// Vertical line over `base`; `upward` if oriented from `base` to ∞.
    Vertical { base: Complex64, upward: bool },
    /// Half-circle from `c` to `d`.
    Arc { c: Complex64, d: Complex64 },
}

impl Geodesic {
    pub fn new(start: SpherePoint, end: SpherePoint) -> Result<Self> {
        if start.approx_eq(&end, DEFAULT_EPS) {
            return Err(Error::Invalid("geodesic endpoints coincide".into()));
        }
        Ok(Geodesic { start, end })
    }

    pub fn start(&self) -> SpherePoint {
        self.start
    }

    pub fn end(&self) -> SpherePoint {
        self.end
    }

    fn shape(&self) -> Shape {
        match (self.start, self.end) {
            (SpherePoint::Finite(c), SpherePoint::Infinity) => Shape::Vertical { base: c, upward: true },
            (SpherePoint::Infinity, SpherePoint::Finite(d)) => Shape::Vertical { base: d, upward: false },
            (SpherePoint::Finite(c), SpherePoint::Finite(d)) => Shape::Arc { c, d },
            (SpherePoint::Infinity, SpherePoint::Infinity) => unreachable!("checked in Geodesic::new"),
        }
    }

    fn is_endpoint(&self, u: &SpherePoint) -> bool {
        u.approx_eq(&self.start, DEFAULT_EPS) || u.approx_eq(&self.end, DEFAULT_EPS)
    }
}

/// Foot of the perpendicular from `(w, y)` (with `y = 0` for a boundary point)
/// together with the signed arclength position of the foot along the geodesic.
///
/// Position is measured from the top of the arc (or from height 1 on a vertical
/// line) and increases towards the end point.
fn foot_with_position(w: Option<Complex64>, y: f64, g: &Geodesic) -> Result<(H3Point, f64)> {
    match g.shape() {
        Shape::Vertical { base, upward } => {
            let w = w.ok_or(Error::DegenerateFoot)?;
            let h2 = (w - base).norm_sqr() + y * y;
            if h2 == 0.0 {
                return Err(Error::DegenerateFoot);
            }
            let h = h2.sqrt();
            let s = if upward { h.ln() } else { -h.ln() };
            Ok((H3Point { z: base, y: h }, s))
        }
        Shape::Arc { c, d } => {
            let m = (c + d) * 0.5;
            let r = (d - c).norm() * 0.5;
            let e = (d - c) / (d - c).norm();
            let Some(w) = w else {
                return Ok((H3Point { z: m, y: r }, 0.0));
            };
            // The foot sits at angle θ on the arc m + r(cos θ e, sin θ), θ = π at c.
            // Minimizing the distance gives cos θ = 2rα / A with the quantities below;
            // 1 ± cos θ and sin θ are formed from products to avoid cancellation.
            let rel = w - m;
            let alpha = (rel * e.conj()).re;
            let big_a = r * r + rel.norm_sqr() + y * y;
            let near_c = (w - c).norm_sqr() + y * y; // A + 2rα
            let near_d = (w - d).norm_sqr() + y * y; // A - 2rα
            if near_c == 0.0 || near_d == 0.0 {
                return Err(Error::DegenerateFoot);
            }
            let cos_t = 2.0 * r * alpha / big_a;
            let sin_t = (near_c * near_d).sqrt() / big_a;
            let one_plus = near_c / big_a;
            let one_minus = near_d / big_a;
            if sin_t == 0.0 || !sin_t.is_finite() {
                return Err(Error::DegenerateFoot);
            }
            let foot = H3Point { z: m + e * (r * cos_t), y: r * sin_t };
            // s(θ) = -log tan(θ/2), tan(θ/2) = sin θ/(1 + cos θ) = (1 - cos θ)/sin θ.
            let s = if cos_t >= 0.0 {
                (one_plus / sin_t).ln()
            } else {
                (sin_t / one_minus).ln()
            };
            Ok((foot, s))
        }
    }
}

fn sphere_foot(u: &SpherePoint, g: &Geodesic) -> Result<(H3Point, f64)> {
    if g.is_endpoint(u) {
        return Err(Error::DegenerateFoot);
    }
    foot_with_position(u.finite(), 0.0, g)
}

/// The point on `g` closest to the boundary point `u`.
pub fn foot_point(u: SpherePoint, g: &Geodesic) -> Result<H3Point> {
    sphere_foot(&u, g).map(|(p, _)| p)
}

/// The point on `g` closest to the interior point `p`.
pub fn foot_point_interior(p: H3Point, g: &Geodesic) -> Result<H3Point> {
    foot_with_position(Some(p.z), p.y, g).map(|(f, _)| f)
}

/// Hyperbolic distance in the upper half-space.
pub fn hyp_dist(p: H3Point, q: H3Point) -> f64 {
    let chord = ((p.z - q.z).norm_sqr() + (p.y - q.y).powi(2)).sqrt();
    2.0 * (chord / (2.0 * (p.y * q.y).sqrt())).asinh()
}

/// Oriented distance along `{c, d}` (oriented from `c` to `d`) from the foot of
/// `a` to the foot of `b`.
pub fn ordist_feet(a: SpherePoint, b: SpherePoint, c: SpherePoint, d: SpherePoint) -> Result<f64> {
    let g = Geodesic::new(c, d)?;
    let (_, sa) = sphere_foot(&a, &g)?;
    let (_, sb) = sphere_foot(&b, &g)?;
    Ok(sb - sa)
}

/// Reduces an angle to `(-π, π]`.
pub fn reduce_angle(t: f64) -> f64 {
    let mut r = t.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// The map sending `c ↦ 0`, `d ↦ ∞`, `b ↦ 1`.
fn normalizing_map(b: SpherePoint, c: SpherePoint, d: SpherePoint) -> Result<MoebiusMap> {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let s = match (c, d) {
        (SpherePoint::Finite(c), SpherePoint::Finite(d)) => MoebiusMap::new(one, -c, one, -d)?,
        (SpherePoint::Infinity, SpherePoint::Finite(d)) => MoebiusMap::new(zero, one, one, -d)?,
        (SpherePoint::Finite(c), SpherePoint::Infinity) => MoebiusMap::new(one, -c, zero, one)?,
        (SpherePoint::Infinity, SpherePoint::Infinity) => {
            return Err(Error::Invalid("geodesic endpoints coincide".into()))
        }
    };
    match s.apply(b) {
        SpherePoint::Finite(sb) if sb.norm() > 0.0 => Ok(MoebiusMap::dilation(sb.inv())?.compose(&s)),
        _ => Err(Error::Indeterminate),
    }
}

/// Transport angle ψ of the pair `(a, b)` about `{c, d}`, in `(-π, π]`.
///
/// The quadruple is moved to `(z, 1, 0, ∞)` by an explicit Möbius map; rotation
/// about the vertical axis then carries the perpendicular from `1` to the one
/// from `z` through angle `arg z`, and ψ is its negative.
pub fn angle_psi(a: SpherePoint, b: SpherePoint, c: SpherePoint, d: SpherePoint) -> Result<f64> {
    let m = normalizing_map(b, c, d)?;
    match m.apply(a) {
        SpherePoint::Finite(z) if z.norm() > 0.0 => Ok(reduce_angle(-z.arg())),
        _ => Err(Error::Indeterminate),
    }
}

/// Distance from a point to a geodesic; infinite (an error) for boundary points.
pub fn dist_to_geodesic(u: Locus, g: &Geodesic) -> Result<f64> {
    match u {
        Locus::Boundary(_) => Err(Error::BoundaryPoint),
        Locus::Interior(p) => {
            let f = foot_point_interior(p, g)?;
            Ok(hyp_dist(p, f))
        }
    }
}

/// Poincaré extension of a Möbius map to the upper half-space.
pub fn apply_h3(m: &MoebiusMap, p: H3Point) -> H3Point {
    let den = m.c * p.z + m.d;
    let norm = den.norm_sqr() + m.c.norm_sqr() * p.y * p.y;
    let z = ((m.a * p.z + m.b) * den.conj() + m.a * m.c.conj() * (p.y * p.y)) / norm;
    H3Point { z, y: p.y / norm }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moebius::cross_ratio;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn axis() -> Geodesic {
        Geodesic::new(SpherePoint::real(0.0), SpherePoint::Infinity).unwrap()
    }

    #[test]
    fn feet_on_vertical_axis() {
        let f = foot_point(SpherePoint::real(2.0), &axis()).unwrap();
        assert!(f.z.norm() < 1e-15 && (f.y - 2.0).abs() < 1e-15);
        let f = foot_point(SpherePoint::real(1.0), &axis()).unwrap();
        assert!((f.y - 1.0).abs() < 1e-15);
        let f = foot_point(SpherePoint::new(0.0, 0.7), &axis()).unwrap();
        assert!((f.y - 0.7).abs() < 1e-15);
        assert_eq!(foot_point(SpherePoint::real(0.0), &axis()), Err(Error::DegenerateFoot));
    }

    #[test]
    fn foot_on_arc_minimizes_distance() {
        let g = Geodesic::new(SpherePoint::new(-1.0, 0.5), SpherePoint::new(2.0, 1.0)).unwrap();
        let p = H3Point::new(c(0.3, 2.0), 0.8).unwrap();
        let foot = foot_point_interior(p, &g).unwrap();
        let (cc, dd) = (c(-1.0, 0.5), c(2.0, 1.0));
        let (m, r, e) = ((cc + dd) * 0.5, (dd - cc).norm() * 0.5, (dd - cc) / (dd - cc).norm());
        let best = (1..20000)
            .map(|k| {
                let t = PI * k as f64 / 20000.0;
                hyp_dist(p, H3Point { z: m + e * (r * t.cos()), y: r * t.sin() })
            })
            .fold(f64::INFINITY, f64::min);
        assert!((hyp_dist(p, foot) - best).abs() < 1e-7);
        let on_arc = ((foot.z - m).norm_sqr() + foot.y * foot.y).sqrt();
        assert!((on_arc - r).abs() < 1e-12);
    }

    #[test]
    fn hyp_dist_examples() {
        let p = H3Point::new(c(0.0, 0.0), 1.0).unwrap();
        let q = H3Point::new(c(0.0, 0.0), std::f64::consts::E).unwrap();
        assert!((hyp_dist(p, q) - 1.0).abs() < 1e-15);
        assert_eq!(hyp_dist(p, p), 0.0);
    }

    #[test]
    fn hyp_dist_matches_arc_length_integration() {
        // (0,1) and (3,1) lie on the half-circle centred at 1.5.
        let (p, q) = (H3Point { z: c(0.0, 0.0), y: 1.0 }, H3Point { z: c(3.0, 0.0), y: 1.0 });
        let m = 1.5;
        let t0 = (1.0f64).atan2(-m);
        let t1 = (1.0f64).atan2(3.0 - m);
        // ds = dθ / sin θ on the half-circle; Simpson's rule.
        let n = 20000;
        let h = (t0 - t1) / n as f64;
        let f = |t: f64| 1.0 / t.sin();
        let mut acc = f(t1) + f(t0);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(t1 + h * k as f64);
        }
        let length = acc * h / 3.0;
        assert!((hyp_dist(p, q) - length).abs() < 1e-8);
    }

    #[test]
    fn ordist_examples() {
        let (two, one, zero) = (SpherePoint::real(2.0), SpherePoint::real(1.0), SpherePoint::real(0.0));
        let v = ordist_feet(two, one, zero, SpherePoint::Infinity).unwrap();
        assert!((v + 2f64.ln()).abs() < 1e-15);
        let a = SpherePoint::new(0.3, 0.4);
        assert_eq!(ordist_feet(a, a, zero, SpherePoint::new(5.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn ordist_matches_cross_ratio_on_arcs() {
        let pts = [c(1.0, 2.0), c(-0.5, 0.1), c(3.0, -1.0), c(0.2, 0.2)].map(SpherePoint::from);
        let v = ordist_feet(pts[0], pts[1], pts[2], pts[3]).unwrap();
        let cr = cross_ratio(pts[0], pts[1], pts[2], pts[3]).unwrap().finite().unwrap();
        assert!((v + cr.norm().ln()).abs() < 1e-12);
        // An infinite point off the geodesic has its foot at the top of the arc.
        let v = ordist_feet(SpherePoint::Infinity, pts[1], pts[2], pts[3]).unwrap();
        let cr = cross_ratio(SpherePoint::Infinity, pts[1], pts[2], pts[3]).unwrap().finite().unwrap();
        assert!((v + cr.norm().ln()).abs() < 1e-12);
    }

    #[test]
    fn psi_examples() {
        let (one, zero) = (SpherePoint::real(1.0), SpherePoint::real(0.0));
        let v = angle_psi(SpherePoint::new(0.0, 1.0), one, zero, SpherePoint::Infinity).unwrap();
        assert!((v + PI / 2.0).abs() < 1e-15);
        let v = angle_psi(SpherePoint::real(2.0), one, zero, SpherePoint::Infinity).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(angle_psi(zero, one, zero, SpherePoint::Infinity), Err(Error::Indeterminate));
    }

    #[test]
    fn distance_to_geodesic_examples() {
        let on_axis = H3Point::new(c(0.0, 0.0), 1.0).unwrap();
        assert_eq!(dist_to_geodesic(Locus::Interior(on_axis), &axis()).unwrap(), 0.0);
        let off = H3Point::new(c(1.0, 0.0), 1.0).unwrap();
        let d = dist_to_geodesic(Locus::Interior(off), &axis()).unwrap();
        assert!((d - 2f64.sqrt().acosh()).abs() < 1e-14);
        assert_eq!(
            dist_to_geodesic(Locus::Boundary(SpherePoint::real(1.0)), &axis()),
            Err(Error::BoundaryPoint)
        );
    }

    #[test]
    fn distance_to_vertical_geodesic_matches_minimization() {
        let off = H3Point::new(c(1.0, 0.0), 1.0).unwrap();
        let best = (1..100000)
            .map(|k| hyp_dist(off, H3Point { z: c(0.0, 0.0), y: k as f64 * 1e-4 }))
            .fold(f64::INFINITY, f64::min);
        let d = dist_to_geodesic(Locus::Interior(off), &axis()).unwrap();
        assert!((d - best).abs() < 1e-7);
    }

    #[test]
    fn extension_is_an_isometry() {
        let m = MoebiusMap::new(c(0.3, 1.0), c(2.0, 0.0), c(-0.7, 0.2), c(1.0, 1.0)).unwrap();
        let p = H3Point::new(c(0.5, -0.2), 0.3).unwrap();
        let q = H3Point::new(c(-1.0, 2.0), 1.7).unwrap();
        let before = hyp_dist(p, q);
        let after = hyp_dist(apply_h3(&m, p), apply_h3(&m, q));
        assert!((before - after).abs() < 1e-12);
    }
}
