//! Wilcoxon signed-rank test for paired differences.
//!
//! Zeros are dropped, tied magnitudes share their average rank, and the
//! reported statistic is `W = min(W+, W-)`. For up to [`EXACT_MAX_N`]
//! nonzero differences the two-sided p-value comes from the exact null
//! distribution of `W+` (all `2^n` sign assignments, counted by dynamic
//! programming over doubled ranks so ties stay integral). Larger samples use
//! the normal approximation with tie and continuity corrections.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const MIN_NONZERO: usize = 5;
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Nonzero differences used.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(w_plus, w_minus)`.
    pub statistic: f64,
    pub p_value: f64,
    pub method: PValueMethod,
}

struct Ranked {
    /// Twice the (average) rank of each nonzero difference, so ties stay integral.
    doubled_ranks: Vec<u64>,
    positive: Vec<bool>,
    /// Sizes of tie groups among the magnitudes.
    ties: Vec<usize>,
}

impl Ranked {
    fn w_plus(&self) -> f64 {
        self.doubled_ranks
            .iter()
            .zip(&self.positive)
            .filter(|(_, &p)| p)
            .map(|(&r, _)| r as f64 / 2.0)
            .sum()
    }

    fn total(&self) -> f64 {
        let n = self.doubled_ranks.len() as f64;
        n * (n + 1.0) / 2.0
    }
}

fn rank(deltas: &[f64]) -> Result<Ranked> {
    if deltas.iter().any(|d| !d.is_finite()) {
        return Err(Error::Input("non-finite difference".into()));
    }
    let mut nz: Vec<f64> = deltas.iter().copied().filter(|&d| d != 0.0).collect();
    if nz.len() < MIN_NONZERO {
        return Err(Error::InsufficientData(format!(
            "{} nonzero differences, need at least {MIN_NONZERO}",
            nz.len()
        )));
    }
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let n = nz.len();
    let mut doubled_ranks = vec![0u64; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nz[j + 1].abs() == nz[i].abs() {
            j += 1;
        }
        // ranks i+1..=j+1 averaged, doubled: (i + 1) + (j + 1)
        let doubled = (i + j + 2) as u64;
        for r in &mut doubled_ranks[i..=j] {
            *r = doubled;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    Ok(Ranked {
        doubled_ranks,
        positive: nz.iter().map(|&d| d > 0.0).collect(),
        ties,
    })
}

fn result(r: &Ranked, p_value: f64, method: PValueMethod) -> WilcoxonResult {
    let w_plus = r.w_plus();
    let w_minus = r.total() - w_plus;
    WilcoxonResult {
        n: r.doubled_ranks.len(),
        w_plus,
        w_minus,
        statistic: w_plus.min(w_minus),
        p_value: p_value.min(1.0),
        method,
    }
}

/// Exact two-sided test. Counts stay exact in `f64` up to about 50 differences.
pub fn wilcoxon_exact(deltas: &[f64]) -> Result<WilcoxonResult> {
    let r = rank(deltas)?;
    let max_sum: u64 = r.doubled_ranks.iter().sum();
    // counts[s] = number of sign assignments whose doubled W+ equals s
    let mut counts = vec![0.0f64; max_sum as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &dr in &r.doubled_ranks {
        let dr = dr as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + dr] += counts[s];
            }
        }
        reach += dr;
    }
    let total = 2f64.powi(r.doubled_ranks.len() as i32);
    let w = result(&r, 0.0, PValueMethod::Exact);
    let threshold = (2.0 * w.statistic).round() as usize;
    let tail: f64 = counts[..=threshold].iter().sum();
    Ok(result(&r, 2.0 * tail / total, PValueMethod::Exact))
}

/// Normal approximation with tie-corrected variance and continuity correction.
pub fn wilcoxon_normal(deltas: &[f64]) -> Result<WilcoxonResult> {
    let r = rank(deltas)?;
    let n = r.doubled_ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = r.ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
    let w = result(&r, 0.0, PValueMethod::Normal);
    let z = ((w.statistic - mean).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(result(&r, erfc(z / std::f64::consts::SQRT_2), PValueMethod::Normal))
}

/// Exact for `n <= 20` nonzero differences, normal approximation above.
pub fn wilcoxon_signed_rank(deltas: &[f64]) -> Result<WilcoxonResult> {
    let nonzero = deltas.iter().filter(|&&d| d != 0.0).count();
    if nonzero <= EXACT_MAX_N {
        wilcoxon_exact(deltas)
    } else {
        wilcoxon_normal(deltas)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    /// Enumerates every sign assignment of the (average) ranks.
    fn brute_force_p(deltas: &[f64]) -> (f64, f64) {
        let nz: Vec<f64> = deltas.iter().copied().filter(|&d| d != 0.0).collect();
        let n = nz.len();
        let ranks: Vec<f64> = nz
            .iter()
            .map(|d| {
                let less = nz.iter().filter(|e| e.abs() < d.abs()).count() as f64;
                let equal = nz.iter().filter(|e| e.abs() == d.abs()).count() as f64;
                less + (equal + 1.0) / 2.0
            })
            .collect();
        let w_plus: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
        let total: f64 = ranks.iter().sum();
        let w = w_plus.min(total - w_plus);
        let mut le = 0u64;
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if s <= w + 1e-9 {
                le += 1;
            }
        }
        let one_sided = le as f64 / (1u64 << n) as f64;
        (w, (2.0 * one_sided).min(1.0))
    }

    #[test]
    fn five_positive_differences() {
        let r = wilcoxon_signed_rank(&[0.3, 1.2, 0.7, 2.0, 0.1]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.w_plus, 15.0);
        assert_eq!(r.method, PValueMethod::Exact);
        assert!((r.p_value / 2.0 - 1.0 / 32.0).abs() < 1e-15);
        assert!((r.p_value - 0.0625).abs() < 1e-15);
        let (w, p) = brute_force_p(&[0.3, 1.2, 0.7, 2.0, 0.1]);
        assert_eq!(w, 0.0);
        assert_eq!(p, r.p_value);
    }

    #[test]
    fn antisymmetric_differences() {
        let d = [1.0, -1.0, 2.0, -2.0, 3.0, -3.0];
        let r = wilcoxon_signed_rank(&d).unwrap();
        assert_eq!(r.w_plus, r.w_minus);
        assert!(r.p_value >= 0.99);
        assert_eq!(brute_force_p(&d).1, r.p_value);
    }

    #[test]
    fn zeros_are_dropped_and_few_nonzero_fail() {
        assert!(matches!(
            wilcoxon_signed_rank(&[0.0, 0.0, 1.0, 2.0, -1.0, 3.0]),
            Err(Error::InsufficientData(_))
        ));
        let r = wilcoxon_signed_rank(&[0.0, 1.0, 2.0, -1.5, 3.0, 4.0]).unwrap();
        assert_eq!(r.n, 5);
    }

    #[test]
    fn exact_matches_enumeration_with_ties() {
        let mut rng = crate::rng::SeededRng::from_seed(17);
        for _ in 0..40 {
            let n = rng.random_range(5..=14);
            // integer-valued deltas force plenty of ties
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(-4i32..=5) as f64).collect();
            let Ok(r) = wilcoxon_exact(&d) else { continue };
            let (w, p) = brute_force_p(&d);
            assert_eq!(r.statistic, w);
            assert!((r.p_value - p).abs() < 1e-12, "{d:?}");
        }
    }

    #[test]
    fn normal_tracks_exact_for_moderate_n() {
        let mut rng = crate::rng::SeededRng::from_seed(99);
        let normal = Normal::new(0.3, 1.0).unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let n = rng.random_range(12..=20);
            let d: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            let e = wilcoxon_exact(&d).unwrap().p_value;
            let a = wilcoxon_normal(&d).unwrap().p_value;
            worst = worst.max((e - a).abs());
        }
        assert!(worst < 0.02, "worst {worst}");
    }

    #[test]
    fn larger_samples_use_the_normal_route() {
        let mut rng = crate::rng::SeededRng::from_seed(5);
        let normal = Normal::new(0.5, 1.0).unwrap();
        let d: Vec<f64> = (0..25).map(|_| normal.sample(&mut rng)).collect();
        let r = wilcoxon_signed_rank(&d).unwrap();
        assert_eq!(r.method, PValueMethod::Normal);
        let exact = wilcoxon_exact(&d).unwrap();
        assert!((r.p_value - exact.p_value).abs() < 0.02);
    }

    #[test]
    fn invariant_under_scaling_and_sign_flip() {
        let d = [0.4, -1.1, 2.5, 0.9, 1.7, -0.2, 3.1, 0.05];
        let base = wilcoxon_signed_rank(&d).unwrap();
        let scaled: Vec<f64> = d.iter().map(|x| x * 7.5).collect();
        let flipped: Vec<f64> = d.iter().map(|x| -x).collect();
        let s = wilcoxon_signed_rank(&scaled).unwrap();
        let f = wilcoxon_signed_rank(&flipped).unwrap();
        assert_eq!((s.statistic, s.p_value), (base.statistic, base.p_value));
        assert_eq!((f.statistic, f.p_value), (base.statistic, base.p_value));
        assert_eq!(f.w_plus, base.w_minus);
    }
}
