//! The four command flows. Each resolves its configuration (usage errors,
//! exit 2), runs the core work (runtime errors, exit 1), writes its output
//! directory including the resolved-config echo, and prints a short
//! summary to stdout.

use std::collections::HashMap;
use std::fs;

use spatial_lmm::assoc::TestResult;
use spatial_lmm::eval::{auc, average_pointwise, extract_scores, roc_from_scores, ScoreMode};
use spatial_lmm::io::{self, fmt_f64};
use spatial_lmm::replicate::{run_replication, write_replication_summary, AVG_TRAIT};
use spatial_lmm::scanner::{self, ScanConfig};
use spatial_lmm::simgen::gen_dataset;
use spatial_lmm::types::{Hyperparameters, ModelKind};

use crate::config::{
    resolve_evaluate, resolve_replicate, resolve_scan, resolve_simulate, write_evaluate_echo,
    write_replicate_echo, write_scan_echo, write_simulate_echo,
};
use crate::{runtime, usage, CliError, CliResult};
use crate::{EvaluateArgs, ReplicateArgs, ScanArgs, SimulateArgs};

pub fn simulate(args: &SimulateArgs) -> CliResult {
    let resolved = resolve_simulate(args)?;
    let ds = gen_dataset(&resolved.sim).map_err(runtime)?;
    io::write_dataset(&resolved.out, &ds, &resolved.sim).map_err(runtime)?;
    write_simulate_echo(&resolved)?;
    let causal = ds.null_mask.iter().filter(|&&null| !null).count();
    println!(
        "simulate: {} individuals x {} markers, {} traits, {} causal markers, seed {} -> {}",
        resolved.sim.n,
        resolved.sim.d,
        resolved.sim.p,
        causal,
        resolved.sim.seed,
        resolved.out.display()
    );
    Ok(())
}

pub fn scan(args: &ScanArgs) -> CliResult {
    let resolved = resolve_scan(args)?;
    let x = io::read_genotypes(&resolved.genotypes).map_err(usage)?;
    let y = io::read_phenotypes(&resolved.phenotypes).map_err(usage)?;
    if x.n_individuals() != y.n_individuals() {
        return Err(CliError::Usage(format!(
            "{} genotype rows but {} phenotype columns; the files describe different cohorts",
            x.n_individuals(),
            y.n_individuals()
        )));
    }
    let hyper = resolved
        .hyper
        .clone()
        .unwrap_or_else(|| Hyperparameters::default_for(&y));
    let config = ScanConfig {
        model_kinds: resolved.models.clone(),
        cov_spec: resolved.cov_spec.clone(),
        hyper: hyper.clone(),
        chain: resolved.chain,
        alpha: resolved.alpha,
        n_tests_override: resolved.n_tests_override,
        worker_count: resolved.workers,
        standardize: resolved.standardize,
    };
    config.validate().map_err(usage)?;
    hyper.validate(y.n_traits()).map_err(usage)?;

    let report = scanner::scan(&x, &y, &config).map_err(runtime)?;
    io::write_scan_report(&resolved.out, &report, &x.snp_ids).map_err(runtime)?;
    write_scan_echo(&resolved, &hyper)?;
    for f in &report.failures {
        eprintln!("warning: marker {} skipped: {}", f.snp_id, f.message);
    }
    println!(
        "scan: {} test rows ({} markers x {} traits x {} models), {} skipped, {:.1}s -> {}",
        report.results.len(),
        x.n_snps(),
        report.n_traits,
        config.model_kinds.len(),
        report.failures.len(),
        report.total_seconds,
        resolved.out.display()
    );
    Ok(())
}

pub fn replicate(args: &ReplicateArgs) -> CliResult {
    let resolved = resolve_replicate(args)?;
    let summary = run_replication(&resolved.rep).map_err(runtime)?;
    write_replication_summary(&resolved.out, &summary).map_err(runtime)?;
    write_replicate_echo(&resolved)?;
    for mode in [ScoreMode::Cct, ScoreMode::Credible] {
        let lmm = summary.averaged_mean_auc(ModelKind::Lmm, mode);
        let lm = summary.averaged_mean_auc(ModelKind::Lm, mode);
        println!(
            "replicate[{}]: mean AUC lmm {:.4} vs lm {:.4} (diff {:+.4}), rank-sum p {:.4}",
            mode.label(),
            lmm,
            lm,
            lmm - lm,
            summary.averaged_rank_sum_p(mode)
        );
    }
    println!(
        "replicate: {} repeats -> {}",
        resolved.rep.repeats,
        resolved.out.display()
    );
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult {
    let resolved = resolve_evaluate(args)?;
    let rows = io::read_results(&resolved.results).map_err(usage)?;
    let truth = io::read_truth(&resolved.truth).map_err(usage)?;
    let null_of: HashMap<&str, bool> = truth
        .snp_ids
        .iter()
        .map(String::as_str)
        .zip(truth.null_mask.iter().copied())
        .collect();

    // Group test rows by model and trait, keeping first-appearance order so
    // the output is stable across runs.
    let mut order: Vec<(ModelKind, String)> = Vec::new();
    let mut groups: HashMap<(ModelKind, String), Vec<TestResult>> = HashMap::new();
    for row in &rows {
        let key = (row.model, row.result.trait_id.clone());
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(row.result.clone());
    }

    let modes = [ScoreMode::Cct, ScoreMode::Credible];
    let mut auc_csv = String::from("model,mode,trait_id,auc\n");
    let mut curve_csv = String::from("model,mode,trait_id,fpr,tpr\n");
    // Per (model, mode): per-trait AUCs, for the trailing avg rows.
    let mut trait_aucs: HashMap<(ModelKind, usize), Vec<f64>> = HashMap::new();

    for (model, trait_id) in &order {
        let tests = &groups[&(*model, trait_id.clone())];
        let mask: Vec<bool> = tests
            .iter()
            .map(|t| {
                null_of.get(t.snp_id.as_str()).copied().ok_or_else(|| {
                    CliError::Usage(format!(
                        "results row references marker {} absent from the truth table",
                        t.snp_id
                    ))
                })
            })
            .collect::<CliResult<_>>()?;
        for (mi, mode) in modes.iter().enumerate() {
            let scores = extract_scores(tests, *mode);
            let curve = roc_from_scores(&scores, &mask).map_err(usage)?;
            let a = auc(&curve);
            auc_csv.push_str(&format!(
                "{},{},{},{}\n",
                model.as_str(),
                mode.label(),
                trait_id,
                fmt_f64(a)
            ));
            trait_aucs.entry((*model, mi)).or_default().push(a);
            let gridded = average_pointwise(&[curve], resolved.grid_size).map_err(runtime)?;
            for &(fpr, tpr) in &gridded.points {
                curve_csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    model.as_str(),
                    mode.label(),
                    trait_id,
                    fmt_f64(fpr),
                    fmt_f64(tpr)
                ));
            }
        }
    }
    for model in [ModelKind::Lm, ModelKind::Lmm] {
        for (mi, mode) in modes.iter().enumerate() {
            if let Some(aucs) = trait_aucs.get(&(model, mi)) {
                let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
                auc_csv.push_str(&format!(
                    "{},{},{},{}\n",
                    model.as_str(),
                    mode.label(),
                    AVG_TRAIT,
                    fmt_f64(mean)
                ));
            }
        }
    }

    fs::create_dir_all(&resolved.out)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", resolved.out.display())))?;
    let auc_path = resolved.out.join("auc.csv");
    fs::write(&auc_path, auc_csv)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", auc_path.display())))?;
    let curve_path = resolved.out.join("roc_curves.csv");
    fs::write(&curve_path, curve_csv)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", curve_path.display())))?;
    write_evaluate_echo(&resolved)?;
    println!(
        "evaluate: {} model/trait groups x {} score modes -> {}",
        order.len(),
        modes.len(),
        resolved.out.display()
    );
    Ok(())
}
