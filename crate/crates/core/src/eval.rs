//! ROC construction, point-wise curve averaging, AUC, and Wilcoxon
//! comparisons between methods across repeated experiments.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::assoc::TestResult;
use crate::error::{Error, Result};

/// Default false-positive-rate grid for point-wise curve averaging:
/// 0.01 steps, fine enough that interpolation error is invisible at
/// figure scale.
pub const DEFAULT_ROC_GRID: usize = 101;

/// One receiver operating characteristic curve. `points` holds
/// (false positive rate, true positive rate) pairs from (0,0) to (1,1),
/// both coordinates nondecreasing. `thresholds` has one entry per point:
/// the score cutoff that produced it for a swept curve, or the grid
/// position for a curve produced by [`average_pointwise`].
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub thresholds: Vec<f64>,
}

impl RocCurve {
    pub fn new(points: Vec<(f64, f64)>, thresholds: Vec<f64>) -> Result<Self> {
        let curve = RocCurve { points, thresholds };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::InvalidArgument(
                "an ROC curve needs at least the two anchor points".into(),
            ));
        }
        if self.points.len() != self.thresholds.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points but {} thresholds",
                self.points.len(),
                self.thresholds.len()
            )));
        }
        if *self.points.first().unwrap() != (0.0, 0.0) || *self.points.last().unwrap() != (1.0, 1.0)
        {
            return Err(Error::InvalidArgument(
                "ROC curve must start at (0,0) and end at (1,1)".into(),
            ));
        }
        for w in self.points.windows(2) {
            if w[1].0 < w[0].0 || w[1].1 < w[0].1 {
                return Err(Error::InvalidArgument(
                    "ROC coordinates must be nondecreasing".into(),
                ));
            }
        }
        if self
            .points
            .iter()
            .any(|&(x, y)| !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y))
        {
            return Err(Error::InvalidArgument(
                "ROC coordinates must lie in [0,1]".into(),
            ));
        }
        Ok(())
    }
}

/// Per-trait AUC values for one experiment plus their average, the
/// aggregate column reported alongside the individual traits.
#[derive(Debug, Clone, PartialEq)]
pub struct AucSummary {
    pub per_trait_auc: Vec<f64>,
    pub averaged_auc: f64,
}

impl AucSummary {
    pub fn from_per_trait(per_trait_auc: Vec<f64>) -> Result<Self> {
        if per_trait_auc.is_empty() {
            return Err(Error::InvalidArgument("no per-trait AUC values".into()));
        }
        if per_trait_auc.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
            return Err(Error::InvalidArgument(
                "AUC values must lie in [0,1]".into(),
            ));
        }
        let averaged_auc = per_trait_auc.iter().sum::<f64>() / per_trait_auc.len() as f64;
        Ok(AucSummary {
            per_trait_auc,
            averaged_auc,
        })
    }
}

/// Which per-test score feeds the ROC sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    /// 1 - combined p-value: larger means stronger evidence.
    Cct,
    /// Smallest equal-tailed credible level excluding zero.
    Credible,
}

impl ScoreMode {
    pub fn label(&self) -> &'static str {
        match self {
            ScoreMode::Cct => "cct",
            ScoreMode::Credible => "credible",
        }
    }
}

/// One score per test row, oriented so larger = more significant.
pub fn extract_scores(results: &[TestResult], mode: ScoreMode) -> Vec<f64> {
    results
        .iter()
        .map(|r| match mode {
            ScoreMode::Cct => 1.0 - r.cct_p,
            ScoreMode::Credible => r.credible_score,
        })
        .collect()
}

/// Sweeps a threshold over the distinct score values, classifying
/// score >= threshold as a detection. Truth is the negation of
/// `null_mask`; the curve is anchored at (0,0) (threshold +inf) and
/// reaches (1,1) at the smallest score.
pub fn roc_from_scores(scores: &[f64], null_mask: &[bool]) -> Result<RocCurve> {
    if scores.len() != null_mask.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores but {} mask entries",
            scores.len(),
            null_mask.len()
        )));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    let n_pos = null_mask.iter().filter(|&&m| !m).count();
    let n_neg = null_mask.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate(
            "ROC needs both signal and null entries in the truth mask".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].partial_cmp(&scores[i]).unwrap());

    let mut points = Vec::with_capacity(scores.len() + 1);
    let mut thresholds = Vec::with_capacity(scores.len() + 1);
    points.push((0.0, 0.0));
    thresholds.push(f64::INFINITY);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let t = scores[order[k]];
        // Tied scores enter together: a threshold cannot separate them.
        while k < order.len() && scores[order[k]] == t {
            if null_mask[order[k]] {
                fp += 1;
            } else {
                tp += 1;
            }
            k += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        thresholds.push(t);
    }
    RocCurve::new(points, thresholds)
}

/// Trapezoidal area under the curve over FPR in [0,1]. Expects a valid
/// curve; vertical segments contribute nothing, so ties enter with half
/// credit exactly as in the rank formulation.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// TPR of the curve polyline at the given FPR. At an FPR where the curve
/// is vertical this returns the top of the segment, the best rate
/// attainable without exceeding that FPR.
fn interpolate_tpr(curve: &RocCurve, x: f64) -> f64 {
    let pts = &curve.points;
    let hi = pts.partition_point(|p| p.0 <= x);
    if hi > 0 && pts[hi - 1].0 == x {
        return pts[hi - 1].1;
    }
    // x is strictly between pts[hi-1].0 and pts[hi].0; anchors guarantee
    // both neighbors exist for x in (0,1).
    let (x0, y0) = pts[hi - 1];
    let (x1, y1) = pts[hi];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Resamples every curve onto a common FPR grid of `grid_size` points by
/// linear interpolation and averages the TPR values per grid point. The
/// returned curve stores the grid positions as its thresholds.
pub fn average_pointwise(curves: &[RocCurve], grid_size: usize) -> Result<RocCurve> {
    if curves.is_empty() {
        return Err(Error::InvalidArgument("no curves to average".into()));
    }
    if grid_size < 2 {
        return Err(Error::InvalidArgument(
            "averaging grid needs at least 2 points".into(),
        ));
    }
    for c in curves {
        c.validate()?;
    }
    let grid: Vec<f64> = (0..grid_size)
        .map(|k| k as f64 / (grid_size - 1) as f64)
        .collect();
    let mut points = Vec::with_capacity(grid_size);
    for &x in &grid {
        let mean_tpr =
            curves.iter().map(|c| interpolate_tpr(c, x)).sum::<f64>() / curves.len() as f64;
        points.push((x, mean_tpr.clamp(0.0, 1.0)));
    }
    // Interpolation hits the anchors exactly; force them against rounding.
    points[0] = (0.0, 0.0);
    *points.last_mut().unwrap() = (1.0, 1.0);
    RocCurve::new(points, grid)
}

/// Midranks (ties get the average of the positions they span), 1-based.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut s = 0;
    while s < idx.len() {
        let mut e = s;
        while e + 1 < idx.len() && values[idx[e + 1]] == values[idx[s]] {
            e += 1;
        }
        let mid = (s + e) as f64 / 2.0 + 1.0;
        for &i in &idx[s..=e] {
            ranks[i] = mid;
        }
        s = e + 1;
    }
    ranks
}

const EXACT_ENUMERATION_LIMIT: usize = 10;

/// One-sided two-sample rank-sum test of whether values in `sample_a`
/// tend to be larger than values in `sample_b`. Ties receive midranks.
/// Both samples of size <= 10: exact p by enumerating every assignment
/// of ranks to group a. Larger samples: normal approximation with
/// tie-corrected variance and 0.5 continuity correction. If every value
/// in both samples is identical the data carry no ordering information;
/// p = 0.5 is returned with a warning.
pub fn wilcoxon_rank_sum_one_sided(sample_a: &[f64], sample_b: &[f64]) -> Result<f64> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::InvalidArgument(
            "rank-sum test needs two nonempty samples".into(),
        ));
    }
    let pooled: Vec<f64> = sample_a.iter().chain(sample_b.iter()).copied().collect();
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "rank-sum samples must be finite".into(),
        ));
    }
    if pooled.iter().all(|&v| v == pooled[0]) {
        log::warn!("rank-sum samples are all identical; returning p = 0.5");
        return Ok(0.5);
    }

    let ranks = midranks(&pooled);
    let n_a = sample_a.len();
    let w: f64 = ranks[..n_a].iter().sum();

    let p = if n_a <= EXACT_ENUMERATION_LIMIT && sample_b.len() <= EXACT_ENUMERATION_LIMIT {
        rank_sum_exact_p(&ranks, n_a, w)
    } else {
        rank_sum_normal_p(&ranks, n_a, w)
    };
    Ok(p.clamp(f64::MIN_POSITIVE, 1.0))
}

/// P(rank sum of a random size-n_a subset >= w) over all subsets of the
/// observed ranks, conditioning on the observed tie pattern.
fn rank_sum_exact_p(ranks: &[f64], n_a: usize, w: f64) -> f64 {
    let n = ranks.len();
    let mut count = 0u64;
    let mut total = 0u64;
    // Lexicographic walk over all C(n, n_a) index subsets.
    let mut comb: Vec<usize> = (0..n_a).collect();
    loop {
        let sum: f64 = comb.iter().map(|&i| ranks[i]).sum();
        // Rank sums are multiples of 1/2; the slack only absorbs float
        // noise from the additions.
        if sum >= w - 1e-9 {
            count += 1;
        }
        total += 1;
        let mut j = n_a;
        while j > 0 {
            j -= 1;
            if comb[j] != j + n - n_a {
                comb[j] += 1;
                for k in j + 1..n_a {
                    comb[k] = comb[k - 1] + 1;
                }
                break;
            }
            if j == 0 {
                return count as f64 / total as f64;
            }
        }
    }
}

fn rank_sum_normal_p(ranks: &[f64], n_a: usize, w: f64) -> f64 {
    let n = ranks.len() as f64;
    let n_b = n - n_a as f64;
    let mean = n_a as f64 * (n + 1.0) / 2.0;

    let mut sorted = ranks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_term = 0.0;
    let mut s = 0;
    while s < sorted.len() {
        let mut e = s;
        while e + 1 < sorted.len() && sorted[e + 1] == sorted[s] {
            e += 1;
        }
        let t = (e - s + 1) as f64;
        tie_term += t * t * t - t;
        s = e + 1;
    }
    let var = n_a as f64 * n_b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 0.5;
    }
    // Continuity correction of half the rank-sum lattice step: integer
    // midranks step by 1, fractional midranks halve the step.
    let step = if ranks.iter().any(|r| r.fract() != 0.0) {
        0.5
    } else {
        1.0
    };
    let z = (w - mean - step / 2.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    normal.cdf(-z)
}

/// One-sided paired signed-rank test of whether `sample_a` tends to
/// exceed its paired `sample_b` value. Zero differences are dropped;
/// normal approximation with tie correction and continuity correction.
/// Reported alongside the rank-sum result when experiments are paired;
/// not used for any accept/reject decision here.
pub fn wilcoxon_signed_rank_one_sided(sample_a: &[f64], sample_b: &[f64]) -> Result<f64> {
    if sample_a.len() != sample_b.len() {
        return Err(Error::DimensionMismatch(format!(
            "paired samples of lengths {} and {}",
            sample_a.len(),
            sample_b.len()
        )));
    }
    if sample_a.is_empty() {
        return Err(Error::InvalidArgument(
            "signed-rank test needs nonempty samples".into(),
        ));
    }
    let diffs: Vec<f64> = sample_a
        .iter()
        .zip(sample_b)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "signed-rank differences must be finite".into(),
        ));
    }
    if diffs.is_empty() {
        log::warn!("all paired differences are zero; returning p = 0.5");
        return Ok(0.5);
    }

    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, &d)| d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let m = diffs.len() as f64;
    let mean = m * (m + 1.0) / 4.0;

    let mut sorted = ranks.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie_term = 0.0;
    let mut s = 0;
    while s < sorted.len() {
        let mut e = s;
        while e + 1 < sorted.len() && sorted[e + 1] == sorted[s] {
            e += 1;
        }
        let t = (e - s + 1) as f64;
        tie_term += t * t * t - t;
        s = e + 1;
    }
    let var = m * (m + 1.0) * (2.0 * m + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        log::warn!("signed-rank variance degenerate; returning p = 0.5");
        return Ok(0.5);
    }
    let z = (w_plus - mean - 0.5) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    Ok(normal.cdf(-z).clamp(f64::MIN_POSITIVE, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assoc::{exclusion_level, CredibleInterval};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    fn mask(signal: &[usize], d: usize) -> Vec<bool> {
        (0..d).map(|j| !signal.contains(&j)).collect()
    }

    /// Tie-adjusted Mann-Whitney probability computed by brute force:
    /// P(signal score > null score) + half credit for equal scores.
    fn mann_whitney(scores: &[f64], null_mask: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            if null_mask[i] {
                continue;
            }
            for (j, &sj) in scores.iter().enumerate() {
                if !null_mask[j] {
                    continue;
                }
                pairs += 1.0;
                if si > sj {
                    num += 1.0;
                } else if si == sj {
                    num += 0.5;
                }
            }
        }
        num / pairs
    }

    #[test]
    fn perfect_separation_hits_corner() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let m = mask(&[0, 1], 4);
        let curve = roc_from_scores(&scores, &m).unwrap();
        assert!(curve.points.contains(&(0.0, 1.0)));
        assert_relative_eq!(auc(&curve), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_scores_give_diagonal() {
        let scores = [0.5; 6];
        let m = mask(&[0, 1, 2], 6);
        let curve = roc_from_scores(&scores, &m).unwrap();
        assert_eq!(curve.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_relative_eq!(auc(&curve), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn auc_matches_rank_statistic_with_tie() {
        // 8 items, one tied pair straddling the classes.
        let scores = [0.9, 0.7, 0.7, 0.4, 0.8, 0.3, 0.2, 0.1];
        let m = mask(&[0, 1, 3], 8);
        let curve = roc_from_scores(&scores, &m).unwrap();
        assert_relative_eq!(auc(&curve), mann_whitney(&scores, &m), epsilon = 1e-12);
    }

    #[test]
    fn roc_rejects_bad_inputs() {
        assert!(roc_from_scores(&[1.0, 2.0], &[true, true]).is_err());
        assert!(roc_from_scores(&[1.0, 2.0], &[false, false]).is_err());
        assert!(roc_from_scores(&[1.0, f64::NAN], &[true, false]).is_err());
        assert!(roc_from_scores(&[1.0], &[true, false]).is_err());
        assert!(roc_from_scores(&[], &[]).is_err());
    }

    #[test]
    fn auc_of_hand_built_curves() {
        let diagonal =
            RocCurve::new(vec![(0.0, 0.0), (1.0, 1.0)], vec![f64::INFINITY, 0.0]).unwrap();
        assert_relative_eq!(auc(&diagonal), 0.5, epsilon = 1e-12);

        let perfect = RocCurve::new(
            vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)],
            vec![f64::INFINITY, 1.0, 0.0],
        )
        .unwrap();
        assert_relative_eq!(auc(&perfect), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn curve_validation_rejects_malformed() {
        assert!(RocCurve::new(vec![(0.0, 0.0)], vec![1.0]).is_err());
        assert!(RocCurve::new(vec![(0.0, 0.0), (1.0, 1.0)], vec![1.0]).is_err());
        assert!(RocCurve::new(vec![(0.1, 0.0), (1.0, 1.0)], vec![1.0, 0.0]).is_err());
        assert!(RocCurve::new(
            vec![(0.0, 0.0), (0.5, 0.9), (0.4, 1.0), (1.0, 1.0)],
            vec![0.0; 4]
        )
        .is_err());
    }

    /// Random nondecreasing curve through the anchors.
    fn random_curve(rng: &mut ChaCha20Rng, interior: usize) -> RocCurve {
        let mut xs: Vec<f64> = (0..interior).map(|_| rng.random::<f64>()).collect();
        let mut ys: Vec<f64> = (0..interior).map(|_| rng.random::<f64>()).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut points = vec![(0.0, 0.0)];
        points.extend(xs.into_iter().zip(ys));
        points.push((1.0, 1.0));
        let n = points.len();
        RocCurve::new(points, vec![0.0; n]).unwrap()
    }

    /// Walks segments directly, integrating each linear piece in closed
    /// form on a fine subgrid; independent of the trapezoid fold in auc.
    fn riemann_area(curve: &RocCurve, steps_per_segment: usize) -> f64 {
        let mut area = 0.0;
        for w in curve.points.windows(2) {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            if x1 == x0 {
                continue;
            }
            let h = (x1 - x0) / steps_per_segment as f64;
            for k in 0..steps_per_segment {
                let xm = x0 + (k as f64 + 0.5) * h;
                let ym = y0 + (y1 - y0) * (xm - x0) / (x1 - x0);
                area += ym * h;
            }
        }
        area
    }

    #[test]
    fn auc_matches_riemann_sum_on_random_curve() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let curve = random_curve(&mut rng, 48);
        let a = auc(&curve);
        assert_relative_eq!(a, riemann_area(&curve, 2000), epsilon = 1e-9);
    }

    #[test]
    fn averaging_one_curve_is_identity_up_to_grid() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let curve = random_curve(&mut rng, 20);
        let avg = average_pointwise(std::slice::from_ref(&curve), 401).unwrap();
        for &(x, y) in &avg.points {
            assert!((y - interpolate_tpr(&curve, x)).abs() < 1e-12);
        }
        // Fine resampling leaves the area almost unchanged.
        assert!((auc(&avg) - auc(&curve)).abs() < 1.0 / 401.0);
    }

    #[test]
    fn averaging_symmetric_curves_gives_diagonal() {
        // y = x^2 and y = 2x - x^2 sit symmetrically above and below the
        // diagonal at every FPR, so their point-wise mean is the diagonal.
        let n = 51;
        let lower: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let x = k as f64 / (n - 1) as f64;
                (x, x * x)
            })
            .collect();
        let upper: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let x = k as f64 / (n - 1) as f64;
                (x, 2.0 * x - x * x)
            })
            .collect();
        let c1 = RocCurve::new(lower, vec![0.0; n]).unwrap();
        let c2 = RocCurve::new(upper, vec![0.0; n]).unwrap();
        let avg = average_pointwise(&[c1, c2], DEFAULT_ROC_GRID).unwrap();
        for &(x, y) in &avg.points {
            assert!((y - x).abs() < 0.01, "({x}, {y}) off the diagonal");
        }
    }

    #[test]
    fn averaging_matches_elementwise_mean() {
        let mut rng = ChaCha20Rng::seed_from_u64(29);
        let curves: Vec<RocCurve> = (0..10).map(|_| random_curve(&mut rng, 15)).collect();
        let avg = average_pointwise(&curves, DEFAULT_ROC_GRID).unwrap();
        for (k, &(x, y)) in avg.points.iter().enumerate() {
            if k == 0 || k == avg.points.len() - 1 {
                continue;
            }
            let expect =
                curves.iter().map(|c| interpolate_tpr(c, x)).sum::<f64>() / curves.len() as f64;
            assert_relative_eq!(y, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn averaging_rejects_bad_inputs() {
        assert!(average_pointwise(&[], DEFAULT_ROC_GRID).is_err());
        let c = RocCurve::new(vec![(0.0, 0.0), (1.0, 1.0)], vec![1.0, 0.0]).unwrap();
        assert!(average_pointwise(std::slice::from_ref(&c), 1).is_err());
    }

    #[test]
    fn rank_sum_frozen_exact_case() {
        let p = wilcoxon_rank_sum_one_sided(&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(p, 1.0 / 20.0, epsilon = 1e-12);
    }

    #[test]
    fn rank_sum_identical_samples_near_half() {
        // Size 15 per group takes the normal-approximation path; the
        // symmetric configuration must land close to 0.5.
        let a: Vec<f64> = (1..=15).map(f64::from).collect();
        let p = wilcoxon_rank_sum_one_sided(&a, &a).unwrap();
        assert!((p - 0.5).abs() < 0.05, "p = {p}");
    }

    #[test]
    fn rank_sum_all_identical_is_degenerate() {
        let p = wilcoxon_rank_sum_one_sided(&[2.0; 4], &[2.0; 6]).unwrap();
        assert_relative_eq!(p, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rank_sum_exact_and_normal_agree_on_small_samples() {
        let cases: [(&[f64], &[f64]); 4] = [
            (&[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]),
            (&[1.0, 3.0, 5.0, 7.0], &[2.0, 4.0, 6.0, 8.0]),
            (&[2.0, 2.0, 3.0, 9.0], &[1.0, 2.0, 4.0, 4.0, 5.0]),
            (&[0.3, 0.5, 0.5, 0.9, 1.4, 2.0], &[0.1, 0.2, 0.5, 0.6, 1.1]),
        ];
        for (a, b) in cases {
            let pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
            let ranks = midranks(&pooled);
            let w: f64 = ranks[..a.len()].iter().sum();
            let exact = rank_sum_exact_p(&ranks, a.len(), w);
            let approx = rank_sum_normal_p(&ranks, a.len(), w);
            assert!(
                (exact - approx).abs() < 0.01,
                "exact {exact} vs approx {approx} for {a:?} vs {b:?}"
            );
        }
    }

    #[test]
    fn rank_sum_calibration_under_the_null() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let reps = 1000;
        let mut rejections = 0;
        for _ in 0..reps {
            let a: Vec<f64> = (0..100).map(|_| rng.sample(StandardNormal)).collect();
            let b: Vec<f64> = (0..100).map(|_| rng.sample(StandardNormal)).collect();
            if wilcoxon_rank_sum_one_sided(&a, &b).unwrap() <= 0.05 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / reps as f64;
        // 3.5 sigma binomial band around 0.05 for 1000 replications.
        assert!((rate - 0.05).abs() < 0.025, "rejection rate {rate}");
    }

    #[test]
    fn rank_sum_rejects_bad_inputs() {
        assert!(wilcoxon_rank_sum_one_sided(&[], &[1.0]).is_err());
        assert!(wilcoxon_rank_sum_one_sided(&[1.0], &[]).is_err());
        assert!(wilcoxon_rank_sum_one_sided(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn signed_rank_detects_paired_shift() {
        let b: Vec<f64> = (0..30).map(|k| k as f64 / 10.0).collect();
        let a: Vec<f64> = b.iter().map(|v| v + 0.5).collect();
        let p = wilcoxon_signed_rank_one_sided(&a, &b).unwrap();
        assert!(p < 1e-4, "p = {p}");
        // Reversed direction is far from significant.
        let p_rev = wilcoxon_signed_rank_one_sided(&b, &a).unwrap();
        assert!(p_rev > 0.99, "p = {p_rev}");
    }

    #[test]
    fn signed_rank_degenerate_pairs() {
        let a = [1.0, 2.0, 3.0];
        assert_relative_eq!(
            wilcoxon_signed_rank_one_sided(&a, &a).unwrap(),
            0.5,
            epsilon = 1e-12
        );
        assert!(wilcoxon_signed_rank_one_sided(&a, &a[..2]).is_err());
    }

    fn fake_result(cct_p: f64, credible_score: f64) -> TestResult {
        TestResult {
            snp_id: "snp".into(),
            trait_id: "qt".into(),
            posterior_mean_beta: 0.0,
            ci: CredibleInterval {
                lower: -1.0,
                upper: 1.0,
                level: 0.95,
            },
            ci_significant: false,
            cct_p,
            bonferroni_significant: false,
            credible_score,
        }
    }

    #[test]
    fn score_extraction_per_mode() {
        let results = vec![fake_result(0.02, 0.9), fake_result(0.7, 0.1)];
        let cct = extract_scores(&results, ScoreMode::Cct);
        assert_relative_eq!(cct[0], 0.98, epsilon = 1e-12);
        assert_relative_eq!(cct[1], 0.3, epsilon = 1e-12);
        let cred = extract_scores(&results, ScoreMode::Credible);
        assert_eq!(cred, vec![0.9, 0.1]);
        assert_eq!(ScoreMode::Cct.label(), "cct");
        assert_eq!(ScoreMode::Credible.label(), "credible");
    }

    #[test]
    fn credible_score_tracks_wald_tail_mass() {
        // For roughly normal draws the exclusion level approaches
        // 1 - (two-sided tail mass of 0 under the fitted normal).
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, 1.0).unwrap();
        for (mu, sd) in [(1.2, 1.0), (0.4, 0.8), (-0.9, 1.5)] {
            let draws: Vec<f64> = (0..5000)
                .map(|_| mu + sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let score = exclusion_level(&draws);
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let var =
                draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
            let wald_p = 2.0 * normal.cdf(-(mean.abs() / var.sqrt()));
            assert!(
                (score - (1.0 - wald_p)).abs() < 0.02,
                "mu {mu}: score {score} vs 1 - wald {}",
                1.0 - wald_p
            );
        }
    }

    #[test]
    fn auc_summary_averages_traits() {
        let s = AucSummary::from_per_trait(vec![0.8, 0.6]).unwrap();
        assert_relative_eq!(s.averaged_auc, 0.7, epsilon = 1e-12);
        assert!(AucSummary::from_per_trait(vec![]).is_err());
        assert!(AucSummary::from_per_trait(vec![1.2]).is_err());
    }

    #[test]
    fn auc_invariant_under_monotone_transform_hand_case() {
        let scores = [0.9, 0.7, 0.7, 0.4, 0.8, 0.3, 0.2, 0.1];
        let m = mask(&[0, 1, 3], 8);
        let base = auc(&roc_from_scores(&scores, &m).unwrap());
        let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        assert_relative_eq!(
            auc(&roc_from_scores(&exp, &m).unwrap()),
            base,
            epsilon = 1e-12
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn auc_invariant_under_affine_transform(
            raw in proptest::collection::vec(-50.0f64..50.0, 6..40),
            flags in proptest::collection::vec(any::<bool>(), 6..40),
            a in 0.1f64..10.0,
            b in -5.0f64..5.0,
        ) {
            let d = raw.len().min(flags.len());
            let scores = &raw[..d];
            let mut m = flags[..d].to_vec();
            // Guarantee both classes.
            m[0] = true;
            m[d - 1] = false;
            let base = auc(&roc_from_scores(scores, &m).unwrap());
            let mapped: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
            let transformed = auc(&roc_from_scores(&mapped, &m).unwrap());
            prop_assert!((base - transformed).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&base));
            // Trapezoid area equals the tie-adjusted rank statistic.
            prop_assert!((base - mann_whitney(scores, &m)).abs() < 1e-12);
        }
    }
}
