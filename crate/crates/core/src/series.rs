//! Word-indexed sums evaluated generation by generation.
//!
//! Terms of one generation are computed in parallel and combined by a
//! fixed-shape pairwise reduction, so results do not depend on the thread count.

use std::ops::Add;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::freegroup::Word;
use crate::schottky::WordTable;

/// Pairwise sum of a slice in a fixed order.
pub fn tree_sum<T: Copy + Default + Add<Output = T>>(v: &[T]) -> T {
    match v.len() {
        0 => T::default(),
        n if n <= 8 => v.iter().fold(T::default(), |a, &b| a + b),
        n => {
            let (a, b) = v.split_at(n / 2);
            tree_sum(a) + tree_sum(b)
        }
    }
}

/// Size of a series term.
pub trait Magnitude {
    fn magnitude(&self) -> f64;
}

impl Magnitude for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Magnitude for Complex64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Per-length partial sums of a truncated series.
#[derive(Debug, Clone)]
pub struct Graded<T> {
    /// Contribution of the words of each length `0..=max_len`.
    pub by_length: Vec<T>,
    /// Sum of term magnitudes for each length.
    pub abs_by_length: Vec<f64>,
}

impl<T: Copy + Default + Add<Output = T>> Graded<T> {
    pub fn total(&self) -> T {
        self.by_length.iter().fold(T::default(), |a, &b| a + b)
    }

    pub fn last(&self) -> T {
        self.by_length.last().copied().unwrap_or_default()
    }

    /// Sum of term magnitudes in the last generation.
    pub fn last_magnitude(&self) -> f64 {
        self.abs_by_length.last().copied().unwrap_or(0.0)
    }

    pub fn max_len(&self) -> usize {
        self.by_length.len().saturating_sub(1)
    }

    pub fn add(&self, other: &Graded<T>) -> Graded<T> {
        let n = self.by_length.len().max(other.by_length.len());
        let get = |g: &Graded<T>, k: usize| g.by_length.get(k).copied().unwrap_or_default();
        let abs = |g: &Graded<T>, k: usize| g.abs_by_length.get(k).copied().unwrap_or_default();
        Graded {
            by_length: (0..n).map(|k| get(self, k) + get(other, k)).collect(),
            abs_by_length: (0..n).map(|k| abs(self, k) + abs(other, k)).collect(),
        }
    }

    /// Scales every term by `k`.
    pub fn scaled(&self, k: f64) -> Graded<T>
    where
        T: std::ops::Mul<f64, Output = T>,
    {
        Graded {
            by_length: self.by_length.iter().map(|&x| x * k).collect(),
            abs_by_length: self.abs_by_length.iter().map(|&x| x * k.abs()).collect(),
        }
    }

    /// Geometric-mean decay of the generation magnitudes over the last three
    /// generations, `(A_L / A_{L-3})^{1/3}`.
    pub fn decay_ratio(&self) -> Option<f64> {
        let l = self.max_len();
        if l < 4 {
            return None;
        }
        let (a, b) = (self.abs_by_length[l], self.abs_by_length[l - 3]);
        if b == 0.0 {
            return None;
        }
        Some((a / b).powf(1.0 / 3.0))
    }
}

/// Sums `term(k)` over the table entries `k` of length `≤ max_len` whose word
/// passes `keep`, grouped by length.
pub fn sum_over_table<T, K, F>(table: &WordTable, max_len: usize, keep: K, term: F) -> Result<Graded<T>>
where
    T: Copy + Default + Add<Output = T> + Send + Magnitude,
    K: Fn(&Word) -> bool + Sync,
    F: Fn(usize) -> Result<T> + Sync,
{
    let mut by_length = Vec::with_capacity(max_len + 1);
    let mut abs_by_length = Vec::with_capacity(max_len + 1);
    for n in 0..=max_len {
        let terms: Vec<T> = table
            .generation(n)
            .into_par_iter()
            .filter(|&k| keep(&table.words[k]))
            .map(&term)
            .collect::<Result<_>>()?;
        by_length.push(tree_sum(&terms));
        abs_by_length.push(tree_sum(&terms.iter().map(|t| t.magnitude()).collect::<Vec<_>>()));
    }
    Ok(Graded { by_length, abs_by_length })
}

/// Sums `term(w)` over an explicit list of words, grouped by word length.
pub fn sum_over_words<T, F>(words: &[Word], max_len: usize, term: F) -> Result<Graded<T>>
where
    T: Copy + Default + Add<Output = T> + Send + Magnitude,
    F: Fn(&Word) -> Result<T> + Sync,
{
    let mut by_length = Vec::with_capacity(max_len + 1);
    let mut abs_by_length = Vec::with_capacity(max_len + 1);
    for n in 0..=max_len {
        let terms: Vec<T> = words
            .par_iter()
            .filter(|w| w.len() == n)
            .map(&term)
            .collect::<Result<_>>()?;
        by_length.push(tree_sum(&terms));
        abs_by_length.push(tree_sum(&terms.iter().map(|t| t.magnitude()).collect::<Vec<_>>()));
    }
    Ok(Graded { by_length, abs_by_length })
}

/// Tail bound `|last| ρ/(1 − ρ)`; infinite when `ρ ≥ 1`.
pub fn tail_estimate(last: f64, rho: f64) -> f64 {
    if rho >= 1.0 {
        f64::INFINITY
    } else {
        last.abs() * rho / (1.0 - rho)
    }
}
