//! Periods of the normalized differentials of the first kind.
//!
//! For a Schottky group the differential attached to `g_j` is the series
//! `ω_j = Σ_{h ∈ Γ/⟨g_j⟩} d log <h z⁺_j, h z⁻_j, z, z₀>`, whose `a`-periods are
//! `2πi δ_ij` and whose `b`-periods are
//!
//! ```text
//! τ_ij = Σ_{h ∈ ⟨g_i⟩\Γ/⟨g_j⟩} log <z⁺_i, z⁻_i, h z⁺_j, h z⁻_j>            (i ≠ j)
//! τ_ii = log q_i + the same sum over the non-trivial double cosets.
//! ```
//!
//! Logarithms are principal per term: real parts are branch-free, imaginary
//! parts are reported but not meaningful beyond `mod 2π`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freegroup::{is_coset_rep, is_double_coset_rep, Letter};
use crate::moebius::{cross_ratio, SpherePoint};
use crate::schottky::SchottkyGroup;
use crate::series::{sum_over_table, tail_estimate, tree_sum, Graded};

/// Truncated period matrix with per-entry tail estimates.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PeriodMatrix {
    pub max_len: usize,
    #[serde(serialize_with = "serialize_complex_matrix")]
    pub entries: Vec<Vec<Complex64>>,
    pub tails: Vec<Vec<f64>>,
}

fn serialize_complex_matrix<S: serde::Serializer>(m: &[Vec<Complex64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.len()))?;
    for row in m {
        let row: Vec<[f64; 2]> = row.iter().map(|z| [z.re, z.im]).collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

impl PeriodMatrix {
    pub fn genus(&self) -> usize {
        self.entries.len()
    }

    /// The real part as a row-major matrix.
    pub fn real(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|r| r.iter().map(|z| z.re).collect()).collect()
    }
}

fn log_cross_ratio(a: SpherePoint, b: SpherePoint, c: SpherePoint, d: SpherePoint) -> Option<Complex64> {
    match cross_ratio(a, b, c, d).ok()? {
        SpherePoint::Finite(z) if z.norm() > 0.0 => Some(z.ln()),
        _ => None,
    }
}

/// `τ_ij` as a series graded by word length (generator indices are 0-based).
pub fn tau_entry_graded(group: &SchottkyGroup, i: usize, j: usize, max_len: usize) -> Result<Graded<Complex64>> {
    group.require_convergence()?;
    let p = group.genus();
    if i >= p || j >= p {
        return Err(Error::Invalid(format!("period index out of range for genus {p}")));
    }
    let table = group.word_table(max_len);
    let (zpi, zmi) = group.fixed_points(i);
    let (zpj, zmj) = group.fixed_points(j);
    let (gi, gj) = (Letter::gen(i as u16), Letter::gen(j as u16));
    let mut series = sum_over_table(
        &table,
        max_len,
        |w| is_double_coset_rep(w, gi, gj, i == j),
        |k| {
            let h = &table.maps[k];
            log_cross_ratio(zpi, zmi, h.apply(zpj), h.apply(zmj))
                .ok_or_else(|| Error::CrossRatioDegenerate(table.words[k].to_string()))
        },
    )?;
    if i == j {
        let lq = group.multiplier(i).ln();
        series.by_length[0] += lq;
        series.abs_by_length[0] += lq.norm();
    }
    Ok(series)
}

/// Truncated `τ_ij`.
pub fn tau_entry(group: &SchottkyGroup, i: usize, j: usize, max_len: usize) -> Result<Complex64> {
    tau_entry_graded(group, i, j, max_len).map(|s| s.total())
}

/// The full truncated period matrix, cached on the group per length.
pub fn tau_matrix(group: &SchottkyGroup, max_len: usize) -> Result<Arc<PeriodMatrix>> {
    if let Some(m) = group.cache.tau.lock().unwrap().get(&max_len) {
        return Ok(m.clone());
    }
    let p = group.genus();
    let rho = group.convergence().rho;
    let mut entries = vec![vec![Complex64::new(0.0, 0.0); p]; p];
    let mut tails = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            let s = tau_entry_graded(group, i, j, max_len)?;
            entries[i][j] = s.total();
            tails[i][j] = tail_estimate(s.last_magnitude(), rho);
        }
    }
    let m = Arc::new(PeriodMatrix { max_len, entries, tails });
    group.cache.tau.lock().unwrap().insert(max_len, m.clone());
    Ok(m)
}

/// Trapezoid-rule integral of the truncated `ω_j` over the circle bounding
/// `D_{p+i}`, oriented so the disc lies on its left. Expected `2πi δ_ij`.
pub fn a_period_numeric(group: &SchottkyGroup, i: usize, j: usize, max_len: usize, samples: usize) -> Result<Complex64> {
    group.require_convergence()?;
    let p = group.genus();
    if i >= p || j >= p {
        return Err(Error::Invalid(format!("period index out of range for genus {p}")));
    }
    if samples == 0 {
        return Err(Error::Invalid("at least one sample point is needed".into()));
    }
    let table = group.word_table(max_len);
    let (zp, zm) = group.fixed_points(j);
    let gj = Letter::gen(j as u16);
    // Poles and zeros of the truncated differential.
    let mut poles: Vec<(Complex64, f64)> = Vec::new();
    for k in table.ball(max_len) {
        if !is_coset_rep(&table.words[k], gj) {
            continue;
        }
        let m = &table.maps[k];
        if let SpherePoint::Finite(a) = m.apply(zp) {
            poles.push((a, 1.0));
        }
        if let SpherePoint::Finite(b) = m.apply(zm) {
            poles.push((b, -1.0));
        }
    }
    let circle = group.circles()[p + i];
    let orientation = if circle.outside { -1.0 } else { 1.0 };
    let dtheta = 2.0 * std::f64::consts::PI / samples as f64;
    let values: Vec<Complex64> = (0..samples)
        .map(|k| {
            let e = Complex64::from_polar(1.0, dtheta * k as f64);
            let z = circle.center + e * circle.radius;
            let dz = Complex64::i() * e * circle.radius * dtheta * orientation;
            let terms: Vec<Complex64> = poles.iter().map(|&(a, r)| (z - a).inv() * r).collect();
            tree_sum(&terms) * dz
        })
        .collect();
    Ok(tree_sum(&values))
}
