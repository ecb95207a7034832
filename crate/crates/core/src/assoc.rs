//! Posterior draws to significance decisions.
//!
//! Two complementary decisions are produced per (SNP, trait) pair: an
//! equal-tailed credible interval checked for excluding zero, and a single
//! p-value aggregated from per-draw p-values with the Cauchy combination
//! rule, thresholded with a Bonferroni correction across the scan.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::types::PosteriorDraws;

/// Smallest and largest representable p-values after clamping.
pub const P_CLAMP_LO: f64 = 1e-15;
pub const P_CLAMP_HI: f64 = 1.0 - 1e-15;

/// Fewest retained draws accepted by the interval and p-value routines;
/// below this the empirical tails are too coarse to act on.
const MIN_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CredibleInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

/// Per-(SNP, trait) decision record.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub snp_id: String,
    pub trait_id: String,
    pub posterior_mean_beta: f64,
    pub ci: CredibleInterval,
    pub ci_significant: bool,
    pub cct_p: f64,
    pub bonferroni_significant: bool,
    /// Smallest equal-tailed level at which the interval excludes zero,
    /// |2*F(0) - 1| for the empirical CDF F of the draws. Stored here so
    /// ROC construction does not need to retain the draws themselves.
    pub credible_score: f64,
}

/// Linear-interpolation empirical quantile with plotting position
/// (k - 1)/(count - 1); `sorted` must be ascending.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let k = h.floor() as usize;
    if k + 1 >= n {
        return sorted[n - 1];
    }
    sorted[k] + (h - k as f64) * (sorted[k + 1] - sorted[k])
}

/// Equal-tailed credible interval: empirical quantiles at (1 - level)/2 and
/// 1 - (1 - level)/2 with linear interpolation between order statistics.
pub fn equal_tailed_interval(samples: &[f64], level: f64) -> Result<CredibleInterval> {
    if samples.len() < MIN_DRAWS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_DRAWS} samples for an equal-tailed interval, got {}",
            samples.len()
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "interval level must lie in (0, 1), got {level}"
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "samples contain a non-finite value".into(),
        ));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tail = (1.0 - level) / 2.0;
    Ok(CredibleInterval {
        lower: quantile_sorted(&sorted, tail),
        upper: quantile_sorted(&sorted, 1.0 - tail),
        level,
    })
}

/// One two-sided p-value per draw: p_t = 2 * Phi(-|beta_t| / s) with s the
/// sample standard deviation of the draws, clamped away from 0 and 1. For a
/// normal posterior this reduces to the classical Wald p-value.
pub fn per_draw_pvalues(beta_draws: &[f64]) -> Result<Vec<f64>> {
    let n = beta_draws.len();
    if n < MIN_DRAWS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_DRAWS} draws for per-draw p-values, got {n}"
        )));
    }
    if beta_draws.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "draws contain a non-finite value".into(),
        ));
    }
    let mean = beta_draws.iter().sum::<f64>() / n as f64;
    let var = beta_draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var <= 0.0 {
        return Err(Error::Degenerate(
            "draws have zero variance; the chain did not move".into(),
        ));
    }
    let sd = var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal parameters are valid");
    Ok(beta_draws
        .iter()
        .map(|&b| (2.0 * normal.cdf(-(b.abs() / sd))).clamp(P_CLAMP_LO, P_CLAMP_HI))
        .collect())
}

/// tan((0.5 - p) * pi), switching to the 1/(p*pi) tail approximation for
/// p below the clamp floor where the tangent loses precision.
fn cauchy_transform(p: f64) -> f64 {
    if p < P_CLAMP_LO {
        1.0 / (p * std::f64::consts::PI)
    } else {
        ((0.5 - p) * std::f64::consts::PI).tan()
    }
}

/// Cauchy combination of p-values: T = sum_k w_k tan((0.5 - p_k) pi) and
/// combined p = 0.5 - arctan(T)/pi. Weights default to uniform and must be
/// nonnegative and sum to one. The result is clamped to the same bounds as
/// the inputs so downstream consumers always see a p-value in (0, 1).
pub fn cct_combine(pvals: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    if pvals.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot combine an empty set of p-values".into(),
        ));
    }
    for &p in pvals {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "p-values must lie strictly in (0, 1), got {p}"
            )));
        }
    }
    let k = pvals.len();
    let uniform = vec![1.0 / k as f64; k];
    let weights = match weights {
        Some(w) => {
            if w.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "{} weights for {k} p-values",
                    w.len()
                )));
            }
            if w.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(Error::InvalidArgument(
                    "weights must be finite and nonnegative".into(),
                ));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "weights must sum to 1, got {total}"
                )));
            }
            w
        }
        None => &uniform,
    };
    let t: f64 = pvals
        .iter()
        .zip(weights)
        .map(|(&p, &w)| w * cauchy_transform(p))
        .sum();
    Ok((0.5 - t.atan() / std::f64::consts::PI).clamp(P_CLAMP_LO, P_CLAMP_HI))
}

/// Bonferroni decision: p < alpha / n_tests. Caller guarantees
/// alpha in (0, 1) and n_tests >= 1.
pub fn bonferroni(alpha: f64, n_tests: usize, p: f64) -> bool {
    assert!(n_tests > 0, "n_tests must be positive");
    p < alpha / n_tests as f64
}

/// Smallest equal-tailed level at which the interval excludes zero:
/// |2*F(0) - 1| where F is the empirical CDF of the draws, counting exact
/// zeros as half below. 0 means zero sits at the median; 1 means every draw
/// is on one side of zero.
pub fn exclusion_level(draws: &[f64]) -> f64 {
    assert!(!draws.is_empty(), "exclusion level of an empty draw set");
    let below = draws.iter().filter(|&&v| v < 0.0).count() as f64;
    let at = draws.iter().filter(|&&v| v == 0.0).count() as f64;
    let cdf_at_zero = (below + 0.5 * at) / draws.len() as f64;
    (2.0 * cdf_at_zero - 1.0).abs()
}

/// Runs both decision rules for every trait of one SNP's posterior draws.
/// The interval level is Bonferroni-adjusted to 1 - alpha/n_tests so the
/// interval and CCT decisions target the same family-wise rate.
///
/// The combined cct_p orders evidence strength across SNPs; it is not a
/// calibrated frequentist p-value under the null, because all draws of one
/// chain share the chain's location: the draws' marginal spread exceeds the
/// within-chain sd they are standardized by.
pub fn test_snp(
    draws: &PosteriorDraws,
    snp_id: &str,
    trait_ids: &[String],
    alpha: f64,
    n_tests: usize,
) -> Result<Vec<TestResult>> {
    draws.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if n_tests == 0 {
        return Err(Error::InvalidArgument("n_tests must be positive".into()));
    }
    let p = draws.n_traits();
    if trait_ids.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "{} trait ids for {p} traits",
            trait_ids.len()
        )));
    }
    let ci_level = 1.0 - alpha / n_tests as f64;
    let mut results = Vec::with_capacity(p);
    for (j, trait_id) in trait_ids.iter().enumerate() {
        let column: Vec<f64> = draws.beta1.column(j).iter().cloned().collect();
        let ci = equal_tailed_interval(&column, ci_level)?;
        let pvals = per_draw_pvalues(&column)?;
        let cct_p = cct_combine(&pvals, None)?;
        let posterior_mean_beta = column.iter().sum::<f64>() / column.len() as f64;
        results.push(TestResult {
            snp_id: snp_id.to_string(),
            trait_id: trait_id.clone(),
            posterior_mean_beta,
            ci,
            ci_significant: 0.0 < ci.lower || 0.0 > ci.upper,
            cct_p,
            bonferroni_significant: bonferroni(alpha, n_tests, cct_p),
            credible_score: exclusion_level(&column),
        });
    }
    Ok(results)
}
