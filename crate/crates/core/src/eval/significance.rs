//! Paired Wilcoxon signed-rank test and Bonferroni thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of non-zero differences evaluated by exact enumeration.
pub const EXACT_MAX_N: usize = 25;

/// Worst-case absolute gap between the exact and the normal-approximation two-sided
/// p-value over every possible statistic, for n = 1..=10 untied differences.
/// Index 0 is unused.
pub const APPROXIMATION_ERROR_BOUND: [f64; 11] = [
    0.0, 0.005, 0.13, 0.08, 0.05, 0.04, 0.04, 0.025, 0.025, 0.02, 0.02,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
    /// Every difference was zero.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Non-zero differences.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    /// min(W+, W−)
    pub statistic: f64,
    pub p_value: f64,
    pub method: WilcoxonMethod,
}

/// Mid-ranks of `values` (1-based), averaging over ties.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided exact p-value: twice the probability that W+ under random signs is at most `statistic`.
pub fn exact_p_value(ranks: &[f64], statistic: f64) -> f64 {
    // Mid-ranks are multiples of 1/2, so doubled ranks are integers.
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut ways = vec![0f64; total + 1];
    ways[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            ways[s] += ways[s - r];
        }
    }
    let limit = (statistic * 2.0).round() as usize;
    let tail: f64 = ways[..=limit.min(total)].iter().sum();
    (2.0 * tail / 2f64.powi(ranks.len() as i32)).min(1.0)
}

/// Two-sided normal-approximation p-value with tie and continuity corrections.
pub fn normal_p_value(ranks: &[f64], statistic: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((mean - statistic).abs() - 0.5).max(0.0) / var.sqrt();
    libm::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::validation(
            "wilcoxon",
            format!("need two non-empty paired lists, got lengths {} and {}", a.len(), b.len()),
        ));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Ok(WilcoxonResult {
            n: 0,
            w_plus: 0.0,
            w_minus: 0.0,
            statistic: 0.0,
            p_value: 1.0,
            method: WilcoxonMethod::Degenerate,
        });
    }
    let ranks = mid_ranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let w_minus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d < 0.0).map(|(_, r)| r).sum();
    let statistic = w_plus.min(w_minus);
    let (p_value, method) = if diffs.len() <= EXACT_MAX_N {
        (exact_p_value(&ranks, statistic), WilcoxonMethod::Exact)
    } else {
        (normal_p_value(&ranks, statistic), WilcoxonMethod::Normal)
    };
    Ok(WilcoxonResult {
        n: diffs.len(),
        w_plus,
        w_minus,
        statistic,
        p_value,
        method,
    })
}

/// # Panics
/// If `m` is 0 or `alpha` is outside (0, 1).
pub fn bonferroni(alpha: f64, m: usize) -> f64 {
    assert!(m >= 1, "need at least one comparison");
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    alpha / m as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub comparison: String,
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub adjusted_alpha: f64,
    pub significant: bool,
}

/// Tests every `(name, a, b)` comparison at a Bonferroni threshold over all of them.
pub fn significance_table(comparisons: &[(String, Vec<f64>, Vec<f64>)], alpha: f64) -> Result<Vec<SignificanceRow>> {
    if comparisons.is_empty() {
        return Ok(Vec::new());
    }
    let adjusted = bonferroni(alpha, comparisons.len());
    comparisons
        .iter()
        .map(|(name, a, b)| {
            let w = wilcoxon_signed_rank(a, b)?;
            Ok(SignificanceRow {
                comparison: name.clone(),
                n: w.n,
                statistic: w.statistic,
                p_value: w.p_value,
                adjusted_alpha: adjusted,
                significant: w.p_value < adjusted,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_positive_five() {
        let w = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
        assert_eq!((w.w_plus, w.w_minus, w.statistic), (15.0, 0.0, 0.0));
        assert_eq!(w.method, WilcoxonMethod::Exact);
        assert!((w.p_value - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn degenerate_and_symmetric() {
        let w = wilcoxon_signed_rank(&[0.3, 0.4], &[0.3, 0.4]).unwrap();
        assert_eq!((w.statistic, w.p_value, w.method), (0.0, 1.0, WilcoxonMethod::Degenerate));
        let w = wilcoxon_signed_rank(&[-1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(w.p_value, 1.0);
        assert!(wilcoxon_signed_rank(&[1.0], &[]).is_err());
    }

    #[test]
    fn mid_ranks_average_ties() {
        assert_eq!(mid_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn large_samples_use_normal_approximation() {
        let a: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        let w = wilcoxon_signed_rank(&a, &vec![0.0; 40]).unwrap();
        assert_eq!(w.method, WilcoxonMethod::Normal);
        assert!(w.p_value < 1e-6);
    }

    #[test]
    fn bonferroni_values() {
        assert_eq!(bonferroni(0.05, 4), 0.0125);
        assert_eq!(bonferroni(0.05, 1), 0.05);
        assert_eq!(bonferroni(0.05, 2), 0.025);
    }

    /// Brute force over all 2^n sign assignments.
    fn brute_force_p(ranks: &[f64], statistic: f64) -> f64 {
        let n = ranks.len();
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if w <= statistic + 1e-9 {
                hits += 1;
            }
        }
        (2.0 * hits as f64 / (1u64 << n) as f64).min(1.0)
    }

    #[test]
    fn approximation_bound_holds_for_small_n() {
        for (n, bound) in APPROXIMATION_ERROR_BOUND.iter().enumerate().skip(1) {
            let ranks: Vec<f64> = (1..=n).map(|r| r as f64).collect();
            let max_w = (n * (n + 1) / 2) as f64;
            let mut worst: f64 = 0.0;
            let mut w = 0.0;
            while w <= max_w / 2.0 {
                let gap = (exact_p_value(&ranks, w) - normal_p_value(&ranks, w)).abs();
                worst = worst.max(gap);
                w += 1.0;
            }
            assert!(worst <= *bound, "n={n}: {worst}");
        }
    }

    proptest! {
        #[test]
        fn dp_matches_enumeration(diffs in proptest::collection::vec(prop_oneof![-4i32..=-1, 1i32..=4], 1..12)) {
            let d: Vec<f64> = diffs.iter().map(|&x| x as f64).collect();
            let w = wilcoxon_signed_rank(&d, &vec![0.0; d.len()]).unwrap();
            let ranks = mid_ranks(&d.iter().map(|x| x.abs()).collect::<Vec<_>>());
            prop_assert!((w.p_value - brute_force_p(&ranks, w.statistic)).abs() < 1e-12);
            prop_assert!((w.w_plus + w.w_minus - (d.len() * (d.len() + 1)) as f64 / 2.0).abs() < 1e-9);
        }
    }
}
