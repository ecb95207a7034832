//! Repeated simulate-scan-score experiments comparing the two models.
//!
//! Each repeat draws a fresh dataset from the configured generative setting,
//! scans it with both the independent-noise and the correlated-effects model,
//! and scores every (model, test mode, trait) combination by ROC/AUC against
//! the simulation truth. Across repeats the harness produces AUC mean/sd
//! tables, one-sided Wilcoxon comparisons of the correlated-effects model
//! against the baseline, and point-wise averaged ROC curves suitable for
//! plotting.
//!
//! Repeats are independent with seeds derived from the base seed, so results
//! are identical for any worker count.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    auc, average_pointwise, extract_scores, roc_from_scores, wilcoxon_rank_sum_one_sided,
    wilcoxon_signed_rank_one_sided, AucSummary, RocCurve, ScoreMode,
};
use crate::io::{fmt_f64, write_file};
use crate::scanner::{scan, ScanConfig};
use crate::seeding::mix;
use crate::simgen::{gen_dataset, SimConfig, SimDataset};
use crate::types::{ChainConfig, Hyperparameters, ModelKind};

pub const PER_REPEAT_FILE: &str = "per_repeat_auc.csv";
pub const AUC_TABLE_FILE: &str = "auc_mean_sd.csv";
pub const WILCOXON_FILE: &str = "wilcoxon.csv";
pub const CURVES_FILE: &str = "roc_curves.csv";

/// Pseudo trait id for the mean-over-traits AUC rows. Simulated traits are
/// named qt_1, qt_2, ... so this never collides.
pub const AVG_TRAIT: &str = "avg";

const MODELS: [ModelKind; 2] = [ModelKind::Lm, ModelKind::Lmm];
const MODES: [ScoreMode; 2] = [ScoreMode::Cct, ScoreMode::Credible];

/// Seed stream for the scan chain of one repeat; the dataset generator
/// reserves streams 1 through 4 of the same per-repeat seed.
const SCAN_SEED_STREAM: u64 = 5;
/// Seed stream used to redraw a dataset whose truth is single-class.
const RESAMPLE_SEED_STREAM: u64 = 1001;
const RESAMPLE_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateConfig {
    /// Generative setting shared by all repeats; its seed is the base seed
    /// and repeat r simulates with a seed derived from (seed, r).
    pub sim: SimConfig,
    pub repeats: usize,
    /// Sampler schedule for every scan; the chain seed is ignored and
    /// derived per repeat instead.
    pub chain: ChainConfig,
    pub alpha: f64,
    /// Number of grid points for the averaged ROC curves.
    pub grid_size: usize,
    /// Repeats run concurrently on this many workers; scans inside a repeat
    /// are single-threaded.
    pub worker_count: usize,
}

impl ReplicateConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.chain.validate()?;
        if self.repeats < 2 {
            return Err(Error::InvalidArgument(format!(
                "paired model comparison needs at least 2 repeats, got {}",
                self.repeats
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie strictly between 0 and 1, got {}",
                self.alpha
            )));
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidArgument(format!(
                "ROC grid needs at least 2 points, got {}",
                self.grid_size
            )));
        }
        if self.worker_count == 0 {
            return Err(Error::InvalidArgument(
                "worker_count must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// AUC of one (repeat, model, mode, trait) cell; trait_id is AVG_TRAIT for
/// the mean-over-traits row.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatAuc {
    pub repeat: usize,
    pub model: ModelKind,
    pub mode: ScoreMode,
    pub trait_id: String,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AucCell {
    pub model: ModelKind,
    pub mode: ScoreMode,
    pub trait_id: String,
    pub mean: f64,
    /// Sample standard deviation across repeats.
    pub sd: f64,
}

/// One-sided comparison "correlated-effects model scores higher than the
/// baseline" on the per-repeat AUC series of one (mode, trait) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonCell {
    pub mode: ScoreMode,
    pub trait_id: String,
    /// Unpaired rank-sum p-value.
    pub rank_sum_p: f64,
    /// Paired signed-rank p-value; repeats share datasets across models, so
    /// this is the more sensitive of the two.
    pub signed_rank_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveCell {
    pub model: ModelKind,
    pub mode: ScoreMode,
    pub trait_id: String,
    /// Point-wise average of the per-repeat curves on the common FPR grid.
    pub curve: RocCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSummary {
    pub trait_ids: Vec<String>,
    pub per_repeat: Vec<RepeatAuc>,
    pub mean_sd: Vec<AucCell>,
    pub wilcoxon: Vec<WilcoxonCell>,
    pub curves: Vec<CurveCell>,
}

impl ReplicateSummary {
    pub fn mean_auc(&self, model: ModelKind, mode: ScoreMode, trait_id: &str) -> Option<f64> {
        self.mean_sd
            .iter()
            .find(|c| c.model == model && c.mode == mode && c.trait_id == trait_id)
            .map(|c| c.mean)
    }

    /// Mean-over-traits AUC averaged across repeats; present for every run.
    pub fn averaged_mean_auc(&self, model: ModelKind, mode: ScoreMode) -> f64 {
        self.mean_auc(model, mode, AVG_TRAIT)
            .expect("avg row is always produced")
    }

    pub fn wilcoxon(&self, mode: ScoreMode, trait_id: &str) -> Option<&WilcoxonCell> {
        self.wilcoxon
            .iter()
            .find(|c| c.mode == mode && c.trait_id == trait_id)
    }

    /// Rank-sum p-value for the mean-over-traits series.
    pub fn averaged_rank_sum_p(&self, mode: ScoreMode) -> f64 {
        self.wilcoxon(mode, AVG_TRAIT)
            .expect("avg row is always produced")
            .rank_sum_p
    }
}

/// Per-repeat results in cell order (model-major, then mode, then trait).
struct RepeatOutput {
    trait_ids: Vec<String>,
    aucs: Vec<f64>,
    curves: Vec<RocCurve>,
}

fn cell_index(model_idx: usize, mode_idx: usize, trait_idx: usize, p: usize) -> usize {
    (model_idx * MODES.len() + mode_idx) * p + trait_idx
}

/// Draws the dataset for one repeat, redrawing with a bumped seed when the
/// truth is single-class (all null or all causal), which would make ROC
/// undefined. Returns the dataset together with the seed that produced it.
fn simulate_nondegenerate(sim: &SimConfig, repeat: usize) -> Result<(SimDataset, u64)> {
    let mut seed = mix(sim.seed, repeat as u64);
    for _ in 0..RESAMPLE_LIMIT {
        let cfg = SimConfig {
            seed,
            ..sim.clone()
        };
        let ds = gen_dataset(&cfg)?;
        let causal = ds.n_causal();
        if causal > 0 && causal < cfg.d {
            return Ok((ds, seed));
        }
        seed = mix(seed, RESAMPLE_SEED_STREAM);
    }
    Err(Error::Degenerate(format!(
        "no dataset with both causal and null markers in {RESAMPLE_LIMIT} draws \
         (d = {}, pi1 = {}); widen d or move pi1 away from 0 and 1",
        sim.d, sim.pi1
    )))
}

fn run_one_repeat(config: &ReplicateConfig, repeat: usize) -> Result<RepeatOutput> {
    let (ds, ds_seed) = simulate_nondegenerate(&config.sim, repeat)?;
    let scan_config = ScanConfig {
        model_kinds: MODELS.to_vec(),
        cov_spec: Some(config.sim.cov_spec.clone()),
        hyper: Hyperparameters::default_for(&ds.y),
        chain: ChainConfig {
            seed: mix(ds_seed, SCAN_SEED_STREAM),
            ..config.chain
        },
        alpha: config.alpha,
        n_tests_override: None,
        worker_count: 1,
        standardize: true,
    };
    let report = scan(&ds.x, &ds.y, &scan_config)?;

    // Truth restricted to markers that produced results; scan drops a whole
    // marker on failure, so rows stay marker-major and aligned with this.
    let surviving_mask: Vec<bool> = ds
        .null_mask
        .iter()
        .enumerate()
        .filter(|(j, _)| !report.failures.iter().any(|f| f.snp_index == *j))
        .map(|(_, null)| *null)
        .collect();

    let p = ds.y.trait_ids.len();
    let trait_pos: HashMap<&str, usize> =
        ds.y.trait_ids
            .iter()
            .enumerate()
            .map(|(t, id)| (id.as_str(), t))
            .collect();
    let mut grouped = vec![Vec::new(); MODELS.len() * p];
    for row in &report.results {
        let m = MODELS
            .iter()
            .position(|&k| k == row.model)
            .expect("scan only runs requested models");
        let t = trait_pos[row.result.trait_id.as_str()];
        grouped[m * p + t].push(row.result.clone());
    }

    let mut aucs = vec![0.0; MODELS.len() * MODES.len() * p];
    let mut curves = Vec::with_capacity(aucs.len());
    for (m, _) in MODELS.iter().enumerate() {
        for (mode_idx, &mode) in MODES.iter().enumerate() {
            for t in 0..p {
                let scores = extract_scores(&grouped[m * p + t], mode);
                let curve = roc_from_scores(&scores, &surviving_mask)?;
                aucs[cell_index(m, mode_idx, t, p)] = auc(&curve);
                curves.push(curve);
            }
        }
    }
    Ok(RepeatOutput {
        trait_ids: ds.y.trait_ids.clone(),
        aucs,
        curves,
    })
}

/// Runs the full experiment and aggregates across repeats.
pub fn run_replication(config: &ReplicateConfig) -> Result<ReplicateSummary> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("building worker pool: {e}")))?;
    let outputs: Vec<RepeatOutput> = pool.install(|| {
        use rayon::prelude::*;
        (0..config.repeats)
            .into_par_iter()
            .map(|r| run_one_repeat(config, r))
            .collect::<Result<_>>()
    })?;

    let trait_ids = outputs[0].trait_ids.clone();
    let p = trait_ids.len();

    let mut per_repeat = Vec::new();
    for (r, out) in outputs.iter().enumerate() {
        for (m, &model) in MODELS.iter().enumerate() {
            for (mode_idx, &mode) in MODES.iter().enumerate() {
                let per_trait: Vec<f64> = (0..p)
                    .map(|t| out.aucs[cell_index(m, mode_idx, t, p)])
                    .collect();
                let summary = AucSummary::from_per_trait(per_trait)?;
                for (t, trait_id) in trait_ids.iter().enumerate() {
                    per_repeat.push(RepeatAuc {
                        repeat: r,
                        model,
                        mode,
                        trait_id: trait_id.clone(),
                        auc: summary.per_trait_auc[t],
                    });
                }
                per_repeat.push(RepeatAuc {
                    repeat: r,
                    model,
                    mode,
                    trait_id: AVG_TRAIT.to_owned(),
                    auc: summary.averaged_auc,
                });
            }
        }
    }

    // Column labels: every simulated trait plus the mean-over-traits row.
    let mut columns: Vec<String> = trait_ids.clone();
    columns.push(AVG_TRAIT.to_owned());

    let series = |model: ModelKind, mode: ScoreMode, trait_id: &str| -> Vec<f64> {
        per_repeat
            .iter()
            .filter(|c| c.model == model && c.mode == mode && c.trait_id == trait_id)
            .map(|c| c.auc)
            .collect()
    };

    let mut mean_sd = Vec::new();
    let mut wilcoxon = Vec::new();
    for &mode in &MODES {
        for trait_id in &columns {
            for &model in &MODELS {
                let vals = series(model, mode, trait_id);
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let var =
                    vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
                mean_sd.push(AucCell {
                    model,
                    mode,
                    trait_id: trait_id.clone(),
                    mean,
                    sd: var.sqrt(),
                });
            }
            let lmm = series(ModelKind::Lmm, mode, trait_id);
            let lm = series(ModelKind::Lm, mode, trait_id);
            wilcoxon.push(WilcoxonCell {
                mode,
                trait_id: trait_id.clone(),
                rank_sum_p: wilcoxon_rank_sum_one_sided(&lmm, &lm)?,
                signed_rank_p: wilcoxon_signed_rank_one_sided(&lmm, &lm)?,
            });
        }
    }

    let mut curves = Vec::new();
    for (m, &model) in MODELS.iter().enumerate() {
        for (mode_idx, &mode) in MODES.iter().enumerate() {
            for (t, trait_id) in trait_ids.iter().enumerate() {
                let idx = cell_index(m, mode_idx, t, p);
                let reps: Vec<RocCurve> = outputs.iter().map(|o| o.curves[idx].clone()).collect();
                curves.push(CurveCell {
                    model,
                    mode,
                    trait_id: trait_id.clone(),
                    curve: average_pointwise(&reps, config.grid_size)?,
                });
            }
        }
    }

    Ok(ReplicateSummary {
        trait_ids,
        per_repeat,
        mean_sd,
        wilcoxon,
        curves,
    })
}

/// Writes the four summary tables into dir: per-repeat AUCs, the AUC
/// mean/sd table, the Wilcoxon table, and the averaged ROC curves in long
/// format. The caller owns the configuration echo.
pub fn write_replication_summary(dir: &Path, summary: &ReplicateSummary) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut out = String::from("repeat,model,mode,trait_id,auc\n");
    for c in &summary.per_repeat {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.repeat,
            c.model.as_str(),
            c.mode.label(),
            c.trait_id,
            fmt_f64(c.auc)
        );
    }
    write_file(&dir.join(PER_REPEAT_FILE), &out)?;

    let mut out = String::from("model,mode,trait_id,mean_auc,sd_auc\n");
    for c in &summary.mean_sd {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.model.as_str(),
            c.mode.label(),
            c.trait_id,
            fmt_f64(c.mean),
            fmt_f64(c.sd)
        );
    }
    write_file(&dir.join(AUC_TABLE_FILE), &out)?;

    let mut out = String::from("mode,trait_id,rank_sum_p,signed_rank_p\n");
    for c in &summary.wilcoxon {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            c.mode.label(),
            c.trait_id,
            fmt_f64(c.rank_sum_p),
            fmt_f64(c.signed_rank_p)
        );
    }
    write_file(&dir.join(WILCOXON_FILE), &out)?;

    let mut out = String::from("model,mode,trait_id,fpr,tpr\n");
    for c in &summary.curves {
        for &(fpr, tpr) in &c.curve.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                c.model.as_str(),
                c.mode.label(),
                c.trait_id,
                fmt_f64(fpr),
                fmt_f64(tpr)
            );
        }
    }
    write_file(&dir.join(CURVES_FILE), &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::case_preset;

    fn small_config() -> ReplicateConfig {
        ReplicateConfig {
            sim: SimConfig {
                n: 24,
                d: 8,
                pi1: 0.5,
                seed: 11,
                ..case_preset(1).unwrap()
            },
            repeats: 3,
            chain: ChainConfig {
                total_iterations: 300,
                burn_in: 100,
                thin: 1,
                seed: 0,
            },
            alpha: 0.05,
            grid_size: 21,
            worker_count: 1,
        }
    }

    #[test]
    fn summary_has_one_cell_per_combination() {
        let summary = run_replication(&small_config()).unwrap();
        let p = summary.trait_ids.len();
        assert_eq!(p, 2);
        // 3 repeats x 2 models x 2 modes x (2 traits + avg).
        assert_eq!(summary.per_repeat.len(), 3 * 2 * 2 * (p + 1));
        assert_eq!(summary.mean_sd.len(), 2 * 2 * (p + 1));
        assert_eq!(summary.wilcoxon.len(), 2 * (p + 1));
        assert_eq!(summary.curves.len(), 2 * 2 * p);
        for cell in &summary.curves {
            assert_eq!(cell.curve.points.len(), 21);
        }
        for cell in &summary.per_repeat {
            assert!((0.0..=1.0).contains(&cell.auc), "AUC {}", cell.auc);
        }
        for cell in &summary.wilcoxon {
            assert!(cell.rank_sum_p > 0.0 && cell.rank_sum_p <= 1.0);
            assert!(cell.signed_rank_p > 0.0 && cell.signed_rank_p <= 1.0);
        }
    }

    #[test]
    fn avg_rows_are_the_mean_of_trait_rows() {
        let summary = run_replication(&small_config()).unwrap();
        for r in 0..3 {
            for &model in &MODELS {
                for &mode in &MODES {
                    let cells: Vec<&RepeatAuc> = summary
                        .per_repeat
                        .iter()
                        .filter(|c| c.repeat == r && c.model == model && c.mode == mode)
                        .collect();
                    let (avg_rows, trait_rows): (Vec<&RepeatAuc>, Vec<&RepeatAuc>) =
                        cells.iter().copied().partition(|c| c.trait_id == AVG_TRAIT);
                    assert_eq!(avg_rows.len(), 1);
                    let mean =
                        trait_rows.iter().map(|c| c.auc).sum::<f64>() / trait_rows.len() as f64;
                    assert!((avg_rows[0].auc - mean).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn reruns_and_worker_counts_agree_exactly() {
        let config = small_config();
        let first = run_replication(&config).unwrap();
        let second = run_replication(&config).unwrap();
        assert_eq!(first, second);

        let wide = ReplicateConfig {
            worker_count: 3,
            ..config
        };
        assert_eq!(first, run_replication(&wide).unwrap());
    }

    #[test]
    fn single_marker_truth_cannot_be_balanced() {
        let sim = SimConfig {
            n: 10,
            d: 1,
            pi1: 0.5,
            ..case_preset(1).unwrap()
        };
        let err = simulate_nondegenerate(&sim, 0).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)), "{err}");
    }

    #[test]
    fn resampling_always_returns_two_class_truth() {
        // d = 2 at pi1 = 0.5 is single-class half the time, so over these
        // repeats the redraw path is exercised while every success must
        // come back two-class.
        let sim = SimConfig {
            n: 10,
            d: 2,
            pi1: 0.5,
            seed: 4,
            ..case_preset(1).unwrap()
        };
        let mut bumped = 0;
        for repeat in 0..40 {
            let (ds, seed) = simulate_nondegenerate(&sim, repeat).unwrap();
            assert_eq!(ds.n_causal(), 1);
            if seed != mix(sim.seed, repeat as u64) {
                bumped += 1;
            }
        }
        assert!(bumped > 0, "no repeat exercised the redraw path");
    }

    #[test]
    fn too_few_repeats_is_rejected() {
        let config = ReplicateConfig {
            repeats: 1,
            ..small_config()
        };
        let err = run_replication(&config).unwrap_err();
        assert!(err.to_string().contains("at least 2 repeats"), "{err}");
    }

    #[test]
    fn summary_files_have_stable_shape() {
        use tempfile::tempdir;

        let summary = run_replication(&small_config()).unwrap();
        let dir = tempdir().unwrap();
        write_replication_summary(dir.path(), &summary).unwrap();

        let auc = std::fs::read_to_string(dir.path().join(AUC_TABLE_FILE)).unwrap();
        assert_eq!(auc.lines().count(), 1 + summary.mean_sd.len());
        assert!(auc.starts_with("model,mode,trait_id,mean_auc,sd_auc\n"));

        let wilcoxon = std::fs::read_to_string(dir.path().join(WILCOXON_FILE)).unwrap();
        assert_eq!(wilcoxon.lines().count(), 1 + summary.wilcoxon.len());

        let curves = std::fs::read_to_string(dir.path().join(CURVES_FILE)).unwrap();
        assert_eq!(curves.lines().count(), 1 + 2 * 2 * 2 * 21);

        let first = std::fs::read(dir.path().join(CURVES_FILE)).unwrap();
        write_replication_summary(dir.path(), &summary).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join(CURVES_FILE)).unwrap());
    }
}
