//! Per-SNP scan orchestration: fit the requested models for every marker
//! column, run the association tests, and assemble a deterministic report
//! independent of worker count and completion order.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assoc::{bonferroni, test_snp, TestResult};
use crate::covariance::{build_g, CovarianceSpec, GMatrix};
use crate::error::{Error, Result};
use crate::sampler::run_gibbs;
use crate::seeding::mix;
use crate::types::{
    standardize_genotypes, ChainConfig, GenotypeMatrix, Hyperparameters, ModelKind, PhenotypeMatrix,
};

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Which models to fit per SNP; order is preserved in the report.
    pub model_kinds: Vec<ModelKind>,
    /// Trait covariance recipe; required when the mixed model is requested.
    pub cov_spec: Option<CovarianceSpec>,
    pub hyper: Hyperparameters,
    pub chain: ChainConfig,
    pub alpha: f64,
    /// Bonferroni family size; defaults to d * p over the scanned matrix.
    pub n_tests_override: Option<usize>,
    pub worker_count: usize,
    /// Standardize raw genotype columns before fitting. With this off,
    /// already-standardized input is required.
    #[serde(default = "default_true")]
    pub standardize: bool,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.model_kinds.is_empty() {
            return Err(Error::InvalidArgument(
                "scan requires at least one model kind".into(),
            ));
        }
        for (i, m) in self.model_kinds.iter().enumerate() {
            if self.model_kinds[..i].contains(m) {
                return Err(Error::InvalidArgument(format!(
                    "model kind {} requested twice",
                    m.as_str()
                )));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if self.model_kinds.contains(&ModelKind::Lmm) && self.cov_spec.is_none() {
            return Err(Error::InvalidArgument(
                "mixed model requested but no covariance specification given".into(),
            ));
        }
        if self.n_tests_override == Some(0) {
            return Err(Error::InvalidArgument(
                "n_tests_override must be positive".into(),
            ));
        }
        if self.worker_count == 0 {
            return Err(Error::InvalidArgument(
                "worker_count must be positive".into(),
            ));
        }
        self.chain.validate()
    }
}

/// One association test outcome tagged with the model that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub model: ModelKind,
    pub result: TestResult,
}

/// A SNP whose fit failed; the scan continues without it.
#[derive(Debug, Clone, PartialEq)]
pub struct SnpFailure {
    pub snp_index: usize,
    pub snp_id: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ScanReport {
    pub config: ScanConfig,
    /// Ordered by SNP index, then by the configured model order, then by
    /// trait order; failed SNPs contribute no rows.
    pub results: Vec<ScanRow>,
    pub failures: Vec<SnpFailure>,
    /// Wall-clock seconds spent fitting each SNP (all models together);
    /// failed SNPs keep the time spent before the failure.
    pub per_snp_seconds: Vec<f64>,
    pub total_seconds: f64,
    pub n_traits: usize,
    /// Bonferroni family size used for every test decision in `results`.
    pub n_tests: usize,
}

impl ScanReport {
    pub fn n_snps(&self) -> usize {
        self.per_snp_seconds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fitted = self.n_snps() - self.failures.len();
        let expected = fitted * self.n_traits * self.config.model_kinds.len();
        if self.results.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "report holds {} rows but {} SNPs x {} traits x {} models = {expected}",
                self.results.len(),
                fitted,
                self.n_traits,
                self.config.model_kinds.len()
            )));
        }
        if self
            .per_snp_seconds
            .iter()
            .chain(std::iter::once(&self.total_seconds))
            .any(|&t| !t.is_finite() || t < 0.0)
        {
            return Err(Error::InvalidArgument(
                "timing entries must be nonnegative".into(),
            ));
        }
        if self.failures.iter().any(|f| f.snp_index >= self.n_snps()) {
            return Err(Error::InvalidArgument(
                "failure record points past the scanned SNPs".into(),
            ));
        }
        Ok(())
    }
}

/// Stable chain seed for one (SNP, model) fit: the base seed from the
/// chain config mixed with the SNP index, then with a per-model tag.
/// Rerunning a single SNP with this seed reproduces its in-scan chain
/// exactly, regardless of worker count.
pub fn snp_chain_seed(base: u64, snp_index: usize, model: ModelKind) -> u64 {
    let tag = match model {
        ModelKind::Lm => 1,
        ModelKind::Lmm => 2,
    };
    mix(mix(base, snp_index as u64), tag)
}

struct SnpOutcome {
    rows: Vec<ScanRow>,
    seconds: f64,
    failure: Option<String>,
}

fn fit_one_snp(
    j: usize,
    x: &GenotypeMatrix,
    y: &PhenotypeMatrix,
    g: Option<&GMatrix>,
    config: &ScanConfig,
    n_tests: usize,
) -> SnpOutcome {
    let started = Instant::now();
    let column = x.values.column(j).into_owned();
    let mut rows = Vec::with_capacity(config.model_kinds.len() * y.n_traits());
    for &model in &config.model_kinds {
        let chain = ChainConfig {
            seed: snp_chain_seed(config.chain.seed, j, model),
            ..config.chain
        };
        let fit = run_gibbs(
            model,
            &column,
            y,
            if model == ModelKind::Lmm { g } else { None },
            &config.hyper,
            &chain,
        )
        .and_then(|draws| test_snp(&draws, &x.snp_ids[j], &y.trait_ids, config.alpha, n_tests));
        match fit {
            Ok(results) => rows.extend(results.into_iter().map(|result| ScanRow { model, result })),
            Err(e) => {
                return SnpOutcome {
                    rows: Vec::new(),
                    seconds: started.elapsed().as_secs_f64(),
                    failure: Some(format!("{} fit: {e}", model.as_str())),
                }
            }
        }
    }
    SnpOutcome {
        rows,
        seconds: started.elapsed().as_secs_f64(),
        failure: None,
    }
}

/// Standardizes each column independently, leaving a column untouched
/// when it cannot be processed (non-finite entries); such a column then
/// fails inside its own fit instead of aborting the whole scan.
fn standardize_tolerant(x: &GenotypeMatrix) -> GenotypeMatrix {
    let mut values = x.values.clone_owned();
    let mut constants = 0usize;
    for j in 0..values.ncols() {
        let column = GenotypeMatrix::new(
            values
                .column(j)
                .into_owned()
                .reshape_generic(nalgebra::Dyn(values.nrows()), nalgebra::Dyn(1)),
            vec![x.snp_ids[j].clone()],
        );
        if let Ok(column) = column {
            if let Ok((s, consts)) = standardize_genotypes(&column) {
                constants += consts.len();
                values.set_column(j, &s.values.column(0));
            }
        }
    }
    if constants > 0 {
        log::warn!("{constants} constant genotype column(s) centered but not scaled");
    }
    GenotypeMatrix {
        values,
        snp_ids: x.snp_ids.clone(),
        // Internal working copy only; columns that failed standardization
        // keep their defect and are rejected by their own fit.
        standardized: true,
    }
}

/// Fits every requested model to every SNP column and runs the
/// association tests. The trait covariance is built once and shared
/// read-only; each SNP is an independent task whose chain seed depends
/// only on (config seed, SNP index, model), so the report is identical
/// for any worker count. A failing SNP is recorded and skipped; the scan
/// errors only if every SNP fails.
pub fn scan(x: &GenotypeMatrix, y: &PhenotypeMatrix, config: &ScanConfig) -> Result<ScanReport> {
    let started = Instant::now();
    config.validate()?;
    y.validate()?;
    config.hyper.validate(y.n_traits())?;
    // Structural checks only: per-column defects (non-finite entries, bad
    // standardization moments) are isolated to the owning SNP's fit.
    if x.n_individuals() < 2 || x.n_snps() < 1 {
        return Err(Error::DimensionMismatch(format!(
            "genotype matrix needs n >= 2 and d >= 1, got n = {}, d = {}",
            x.n_individuals(),
            x.n_snps()
        )));
    }
    if x.snp_ids.len() != x.n_snps() {
        return Err(Error::DimensionMismatch(format!(
            "{} SNP ids for {} genotype columns",
            x.snp_ids.len(),
            x.n_snps()
        )));
    }
    if x.n_individuals() != y.n_individuals() {
        return Err(Error::DimensionMismatch(format!(
            "genotypes describe {} individuals but phenotypes {}",
            x.n_individuals(),
            y.n_individuals()
        )));
    }

    let standardized;
    let x = if x.standardized {
        x
    } else if config.standardize {
        standardized = standardize_tolerant(x);
        &standardized
    } else {
        return Err(Error::InvalidArgument(
            "genotypes are not standardized and standardization is disabled".into(),
        ));
    };

    let g = if config.model_kinds.contains(&ModelKind::Lmm) {
        // Validated by ScanConfig::validate above.
        Some(build_g(config.cov_spec.as_ref().unwrap(), y)?)
    } else {
        None
    };

    let d = x.n_snps();
    let p = y.n_traits();
    let n_tests = config.n_tests_override.unwrap_or(d * p);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| Error::ScanFailed(format!("worker pool: {e}")))?;
    let outcomes: Vec<SnpOutcome> = pool.install(|| {
        (0..d)
            .into_par_iter()
            .map(|j| fit_one_snp(j, x, y, g.as_ref(), config, n_tests))
            .collect()
    });

    let mut results = Vec::with_capacity(d * p * config.model_kinds.len());
    let mut failures = Vec::new();
    let mut per_snp_seconds = Vec::with_capacity(d);
    for (j, outcome) in outcomes.into_iter().enumerate() {
        per_snp_seconds.push(outcome.seconds);
        match outcome.failure {
            Some(message) => failures.push(SnpFailure {
                snp_index: j,
                snp_id: x.snp_ids[j].clone(),
                message,
            }),
            None => results.extend(outcome.rows),
        }
    }
    if failures.len() == d {
        return Err(Error::ScanFailed(format!(
            "all {d} SNPs failed; first: {} ({})",
            failures[0].snp_id, failures[0].message
        )));
    }
    for f in &failures {
        log::warn!("SNP {} ({}) failed: {}", f.snp_index, f.snp_id, f.message);
    }

    let report = ScanReport {
        config: config.clone(),
        results,
        failures,
        per_snp_seconds,
        total_seconds: started.elapsed().as_secs_f64(),
        n_traits: p,
        n_tests,
    };
    report.validate()?;
    Ok(report)
}

/// Rows whose combined p-value clears the Bonferroni threshold
/// alpha / n_tests, sorted by combined p-value ascending. The family
/// size is the one recorded in the report.
pub fn filter_significant(report: &ScanReport, alpha: f64) -> Result<Vec<ScanRow>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0,1), got {alpha}"
        )));
    }
    report.validate()?;
    let mut rows: Vec<ScanRow> = report
        .results
        .iter()
        .filter(|row| bonferroni(alpha, report.n_tests, row.result.cct_p))
        .cloned()
        .collect();
    rows.sort_by(|a, b| a.result.cct_p.partial_cmp(&b.result.cct_p).unwrap());
    Ok(rows)
}
