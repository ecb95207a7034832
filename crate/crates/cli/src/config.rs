//! Configuration file model, flag/config/default resolution, and echo
//! writing.
//!
//! Precedence: command-line flags override config-file values, which
//! override built-in defaults (for simulate and replicate the defaults of
//! the generative fields come from the chosen case preset). The resolved
//! echo a command writes is itself a valid config file and is the single
//! source of truth for what ran.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use spatial_lmm::covariance::{build_g_for_dimension, CovarianceSpec};
use spatial_lmm::eval::DEFAULT_ROC_GRID;
use spatial_lmm::io::{read_matrix, resolve_output_dir};
use spatial_lmm::replicate::ReplicateConfig;
use spatial_lmm::simgen::{case_preset, NoiseFamily, SimConfig};
use spatial_lmm::types::{ChainConfig, Hyperparameters, ModelKind};

use crate::{
    usage, CliError, CliResult, EvaluateArgs, NoiseArg, ReplicateArgs, ScanArgs, SimulateArgs,
};

/// Relative output paths are joined under this root when it is set, so
/// batch runs can redirect every artifact without editing configs.
pub const OUTPUT_ROOT_ENV: &str = "SPATIAL_LMM_OUTPUT_ROOT";
pub const ECHO_FILE: &str = "config.echo";

const VALID_CASES: &str = "1, 2, 3, 4, 5, 6";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub simulate: Option<SimSection>,
    pub scan: Option<ScanSection>,
    pub evaluate: Option<EvalSection>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<usize>,
    pub n: Option<usize>,
    pub d: Option<usize>,
    pub p: Option<usize>,
    pub pi1: Option<f64>,
    pub sigma_e: Option<f64>,
    pub sigma_p: Option<f64>,
    pub noise_family: Option<NoiseFamily>,
    pub seed: Option<u64>,
    /// Covariance structure; matrix fields may be given inline or as
    /// `<field>_file` paths to headerless CSV matrices.
    pub cov_spec: Option<toml::Value>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub genotypes: Option<PathBuf>,
    pub phenotypes: Option<PathBuf>,
    pub models: Option<Vec<String>>,
    pub alpha: Option<f64>,
    pub workers: Option<usize>,
    pub standardize: Option<bool>,
    pub n_tests_override: Option<usize>,
    pub chain: Option<ChainSection>,
    pub hyper: Option<HyperSection>,
    pub cov_spec: Option<toml::Value>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub total_iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub seed: Option<u64>,
}

/// Hyperparameters with mu0 as a plain list, the natural TOML shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d_rate: f64,
    pub mu0: Vec<f64>,
}

impl HyperSection {
    pub fn to_hyper(&self) -> Hyperparameters {
        Hyperparameters {
            a: self.a,
            b: self.b,
            c: self.c,
            d_rate: self.d_rate,
            mu0: nalgebra_vec(&self.mu0),
        }
    }

    pub fn from_hyper(h: &Hyperparameters) -> Self {
        HyperSection {
            a: h.a,
            b: h.b,
            c: h.c,
            d_rate: h.d_rate,
            mu0: h.mu0.iter().copied().collect(),
        }
    }
}

fn nalgebra_vec(v: &[f64]) -> spatial_lmm::nalgebra::DVector<f64> {
    spatial_lmm::nalgebra::DVector::from_column_slice(v)
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub repeats: Option<usize>,
    pub grid_size: Option<usize>,
    pub out: Option<PathBuf>,
    pub results: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// Directory the config file lives in; relative paths inside the file are
/// resolved against it so a config works from any working directory.
fn config_dir(config: Option<&Path>) -> PathBuf {
    config
        .and_then(Path::parent)
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn absolutize(path: &Path) -> CliResult<PathBuf> {
    std::path::absolute(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{}: no such file", path.display())))
    }
}

fn resolve_out(flag: Option<&Path>, section: Option<&Path>, default_name: &str) -> PathBuf {
    let requested = flag
        .or(section)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(default_name));
    resolve_output_dir(&requested, std::env::var(OUTPUT_ROOT_ENV).ok().as_deref())
}

/// Replaces any `<name>_file` key in a cov_spec table with the matrix
/// loaded from that CSV path (resolved against the config directory), then
/// deserializes the result.
fn resolve_cov_spec(value: toml::Value, base: &Path) -> CliResult<CovarianceSpec> {
    let mut value = value;
    if let toml::Value::Table(table) = &mut value {
        let file_keys: Vec<String> = table
            .keys()
            .filter(|k| k.ends_with("_file"))
            .cloned()
            .collect();
        for key in file_keys {
            let removed = table.remove(&key).expect("key came from the table");
            let toml::Value::String(rel) = removed else {
                return Err(CliError::Usage(format!(
                    "cov_spec.{key} must be a path string"
                )));
            };
            let target = key.trim_end_matches("_file").to_owned();
            if table.contains_key(&target) {
                return Err(CliError::Usage(format!(
                    "cov_spec gives both {target} and {key}; use one"
                )));
            }
            let path = base.join(rel);
            require_file(&path)?;
            let m = read_matrix(&path).map_err(usage)?;
            let rows: Vec<toml::Value> = (0..m.nrows())
                .map(|i| {
                    toml::Value::Array(
                        (0..m.ncols())
                            .map(|j| toml::Value::Float(m[(i, j)]))
                            .collect(),
                    )
                })
                .collect();
            table.insert(target, toml::Value::Array(rows));
        }
    }
    value
        .try_into()
        .map_err(|e| CliError::Usage(format!("cov_spec: {e}")))
}

fn resolve_noise(
    flag: Option<NoiseArg>,
    df: Option<f64>,
    from_config: Option<NoiseFamily>,
    from_preset: Option<NoiseFamily>,
) -> CliResult<NoiseFamily> {
    match (flag, df) {
        (Some(NoiseArg::StudentT), Some(v)) => Ok(NoiseFamily::StudentT { v }),
        (Some(NoiseArg::StudentT), None) => {
            Err(CliError::Usage("--noise student-t needs --df".into()))
        }
        (Some(NoiseArg::Normal), Some(_)) => Err(CliError::Usage(
            "--df only applies with --noise student-t".into(),
        )),
        (Some(NoiseArg::Normal), None) => Ok(NoiseFamily::Normal),
        (None, Some(_)) => Err(CliError::Usage("--df needs --noise student-t".into())),
        (None, None) => Ok(from_config.or(from_preset).unwrap_or(NoiseFamily::Normal)),
    }
}

fn pick<T>(flag: Option<T>, config: Option<T>, preset: Option<T>, what: &str) -> CliResult<T> {
    flag.or(config).or(preset).ok_or_else(|| {
        CliError::Usage(format!(
            "missing {what}: pass --case for a preset or set it in the config file"
        ))
    })
}

fn resolve_case(case: Option<usize>) -> CliResult<Option<SimConfig>> {
    match case {
        None => Ok(None),
        Some(c) => case_preset(c)
            .map(Some)
            .map_err(|_| CliError::Usage(format!("case must be one of {VALID_CASES}; got {c}"))),
    }
}

/// Builds the generative config from (flags, [simulate] section, preset).
fn resolve_sim_fields(
    section: &SimSection,
    base: &Path,
    case: Option<usize>,
    n: Option<usize>,
    seed: Option<u64>,
    noise: Option<NoiseArg>,
    df: Option<f64>,
) -> CliResult<(Option<usize>, SimConfig)> {
    let case = case.or(section.case);
    let preset = resolve_case(case)?;
    let pr = preset.as_ref();
    let cov_spec = match section.cov_spec.clone() {
        Some(v) => resolve_cov_spec(v, base)?,
        None => pick(None, None, pr.map(|p| p.cov_spec.clone()), "cov_spec")?,
    };
    let sim = SimConfig {
        n: pick(n, section.n, pr.map(|p| p.n), "n")?,
        d: pick(None, section.d, pr.map(|p| p.d), "d")?,
        p: pick(None, section.p, pr.map(|p| p.p), "p")?,
        pi1: pick(None, section.pi1, pr.map(|p| p.pi1), "pi1")?,
        sigma_e: pick(None, section.sigma_e, pr.map(|p| p.sigma_e), "sigma_e")?,
        sigma_p: pick(None, section.sigma_p, pr.map(|p| p.sigma_p), "sigma_p")?,
        cov_spec,
        noise_family: resolve_noise(noise, df, section.noise_family, pr.map(|p| p.noise_family))?,
        seed: seed.or(section.seed).or(pr.map(|p| p.seed)).unwrap_or(0),
    };
    sim.validate().map_err(usage)?;
    // Generation draws the shared effect from this structure, so it must be
    // buildable without data; this also rejects sample mode early.
    build_g_for_dimension(&sim.cov_spec, sim.p).map_err(usage)?;
    Ok((case, sim))
}

fn resolve_chain(
    section: Option<&ChainSection>,
    iters: Option<usize>,
    burn_in: Option<usize>,
    seed: Option<u64>,
) -> ChainConfig {
    let mut chain = ChainConfig::default();
    if let Some(s) = section {
        if let Some(v) = s.total_iterations {
            chain.total_iterations = v;
        }
        if let Some(v) = s.burn_in {
            chain.burn_in = v;
        }
        if let Some(v) = s.thin {
            chain.thin = v;
        }
        if let Some(v) = s.seed {
            chain.seed = v;
        }
    }
    if let Some(v) = iters {
        chain.total_iterations = v;
    }
    if let Some(v) = burn_in {
        chain.burn_in = v;
    }
    if let Some(v) = seed {
        chain.seed = v;
    }
    chain
}

pub struct ResolvedSimulate {
    pub case: Option<usize>,
    pub sim: SimConfig,
    pub out: PathBuf,
}

pub fn resolve_simulate(args: &SimulateArgs) -> CliResult<ResolvedSimulate> {
    let file = FileConfig::load(args.config.as_deref())?;
    let section = file.simulate.unwrap_or_default();
    let base = config_dir(args.config.as_deref());
    let (case, sim) = resolve_sim_fields(
        &section, &base, args.case, args.n, args.seed, args.noise, args.df,
    )?;
    Ok(ResolvedSimulate {
        case,
        sim,
        out: resolve_out(args.out.as_deref(), None, "simulate_out"),
    })
}

pub struct ResolvedScan {
    pub genotypes: PathBuf,
    pub phenotypes: PathBuf,
    pub models: Vec<ModelKind>,
    pub alpha: f64,
    pub workers: usize,
    pub standardize: bool,
    pub n_tests_override: Option<usize>,
    pub chain: ChainConfig,
    /// None derives weakly informative defaults from the phenotypes.
    pub hyper: Option<Hyperparameters>,
    pub cov_spec: Option<CovarianceSpec>,
    pub out: PathBuf,
}

pub fn resolve_scan(args: &ScanArgs) -> CliResult<ResolvedScan> {
    let file = FileConfig::load(args.config.as_deref())?;
    let section = file.scan.unwrap_or_default();
    let base = config_dir(args.config.as_deref());

    let (genotypes, phenotypes) = match (&args.data, &section.genotypes, &section.phenotypes) {
        (Some(dir), _, _) => (dir.join("genotypes.csv"), dir.join("phenotypes.csv")),
        (None, Some(g), Some(ph)) => (base.join(g), base.join(ph)),
        (None, None, None) => {
            return Err(CliError::Usage(
                "no input: pass --data DIR or set [scan] genotypes and phenotypes".into(),
            ))
        }
        _ => {
            return Err(CliError::Usage(
                "[scan] needs both genotypes and phenotypes".into(),
            ))
        }
    };
    let genotypes = absolutize(&genotypes)?;
    let phenotypes = absolutize(&phenotypes)?;
    require_file(&genotypes)?;
    require_file(&phenotypes)?;

    let model_names = args
        .models
        .clone()
        .or(section.models)
        .unwrap_or_else(|| vec!["lm".into(), "lmm".into()]);
    let models: Vec<ModelKind> = model_names
        .iter()
        .map(|name| ModelKind::parse(name).map_err(usage))
        .collect::<CliResult<_>>()?;

    let cov_spec = match section.cov_spec {
        Some(v) => Some(resolve_cov_spec(v, &base)?),
        None if models.contains(&ModelKind::Lmm) => Some(CovarianceSpec::SampleCovariance),
        None => None,
    };

    Ok(ResolvedScan {
        genotypes,
        phenotypes,
        models,
        alpha: args.alpha.or(section.alpha).unwrap_or(0.05),
        workers: args.workers.or(section.workers).unwrap_or(1),
        standardize: section.standardize.unwrap_or(true),
        n_tests_override: section.n_tests_override,
        chain: resolve_chain(section.chain.as_ref(), args.iters, args.burn_in, args.seed),
        hyper: section.hyper.as_ref().map(HyperSection::to_hyper),
        cov_spec,
        out: resolve_out(args.out.as_deref(), None, "scan_out"),
    })
}

pub struct ResolvedReplicate {
    pub case: Option<usize>,
    pub rep: ReplicateConfig,
    pub out: PathBuf,
}

pub fn resolve_replicate(args: &ReplicateArgs) -> CliResult<ResolvedReplicate> {
    let file = FileConfig::load(args.config.as_deref())?;
    let sim_section = file.simulate.unwrap_or_default();
    let scan_section = file.scan.unwrap_or_default();
    let eval_section = file.evaluate.unwrap_or_default();
    let base = config_dir(args.config.as_deref());

    let (case, sim) = resolve_sim_fields(
        &sim_section,
        &base,
        args.case,
        args.n,
        args.seed,
        args.noise,
        args.df,
    )?;
    let rep = ReplicateConfig {
        sim,
        repeats: args.repeats.or(eval_section.repeats).unwrap_or(20),
        chain: resolve_chain(scan_section.chain.as_ref(), args.iters, args.burn_in, None),
        alpha: args.alpha.or(scan_section.alpha).unwrap_or(0.05),
        grid_size: eval_section.grid_size.unwrap_or(DEFAULT_ROC_GRID),
        worker_count: args.workers.or(scan_section.workers).unwrap_or(1),
    };
    rep.validate().map_err(usage)?;
    Ok(ResolvedReplicate {
        case,
        rep,
        out: resolve_out(
            args.out.as_deref(),
            eval_section.out.as_deref(),
            "replicate_out",
        ),
    })
}

pub struct ResolvedEvaluate {
    pub results: PathBuf,
    pub truth: PathBuf,
    pub grid_size: usize,
    pub out: PathBuf,
}

pub fn resolve_evaluate(args: &EvaluateArgs) -> CliResult<ResolvedEvaluate> {
    let file = FileConfig::load(args.config.as_deref())?;
    let section = file.evaluate.unwrap_or_default();
    let base = config_dir(args.config.as_deref());

    let results = args
        .results
        .clone()
        .or_else(|| section.results.as_ref().map(|p| base.join(p)))
        .ok_or_else(|| CliError::Usage("missing --results (or [evaluate] results)".into()))?;
    let truth = args
        .truth
        .clone()
        .or_else(|| section.truth.as_ref().map(|p| base.join(p)))
        .ok_or_else(|| CliError::Usage("missing --truth (or [evaluate] truth)".into()))?;
    let results = absolutize(&results)?;
    let truth = absolutize(&truth)?;
    require_file(&results)?;
    require_file(&truth)?;
    Ok(ResolvedEvaluate {
        results,
        truth,
        grid_size: section.grid_size.unwrap_or(DEFAULT_ROC_GRID),
        out: resolve_out(args.out.as_deref(), section.out.as_deref(), "evaluate_out"),
    })
}

fn sim_echo_section(case: Option<usize>, sim: &SimConfig) -> CliResult<toml::Table> {
    #[derive(Serialize)]
    struct SimEcho<'a> {
        #[serde(skip_serializing_if = "Option::is_none")]
        case: Option<usize>,
        n: usize,
        d: usize,
        p: usize,
        pi1: f64,
        sigma_e: f64,
        sigma_p: f64,
        noise_family: &'a NoiseFamily,
        seed: u64,
        cov_spec: &'a CovarianceSpec,
    }
    to_table(&SimEcho {
        case,
        n: sim.n,
        d: sim.d,
        p: sim.p,
        pi1: sim.pi1,
        sigma_e: sim.sigma_e,
        sigma_p: sim.sigma_p,
        noise_family: &sim.noise_family,
        seed: sim.seed,
        cov_spec: &sim.cov_spec,
    })
}

fn to_table<T: Serialize>(value: &T) -> CliResult<toml::Table> {
    toml::Table::try_from(value).map_err(|e| CliError::Runtime(format!("writing echo: {e}")))
}

fn write_echo(dir: &Path, root: &toml::Table) -> CliResult<()> {
    let text =
        toml::to_string(root).map_err(|e| CliError::Runtime(format!("writing echo: {e}")))?;
    fs::write(dir.join(ECHO_FILE), text)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.join(ECHO_FILE).display())))
}

pub fn write_simulate_echo(resolved: &ResolvedSimulate) -> CliResult<()> {
    let mut root = toml::Table::new();
    root.insert(
        "simulate".into(),
        toml::Value::Table(sim_echo_section(resolved.case, &resolved.sim)?),
    );
    write_echo(&resolved.out, &root)
}

pub fn write_scan_echo(resolved: &ResolvedScan, hyper: &Hyperparameters) -> CliResult<()> {
    #[derive(Serialize)]
    struct ScanEcho<'a> {
        genotypes: &'a Path,
        phenotypes: &'a Path,
        models: Vec<&'static str>,
        alpha: f64,
        workers: usize,
        standardize: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        n_tests_override: Option<usize>,
        chain: &'a ChainConfig,
        hyper: HyperSection,
        #[serde(skip_serializing_if = "Option::is_none")]
        cov_spec: Option<&'a CovarianceSpec>,
    }
    let mut root = toml::Table::new();
    root.insert(
        "scan".into(),
        toml::Value::Table(to_table(&ScanEcho {
            genotypes: &resolved.genotypes,
            phenotypes: &resolved.phenotypes,
            models: resolved.models.iter().map(|m| m.as_str()).collect(),
            alpha: resolved.alpha,
            workers: resolved.workers,
            standardize: resolved.standardize,
            n_tests_override: resolved.n_tests_override,
            chain: &resolved.chain,
            hyper: HyperSection::from_hyper(hyper),
            cov_spec: resolved.cov_spec.as_ref(),
        })?),
    );
    write_echo(&resolved.out, &root)
}

pub fn write_replicate_echo(resolved: &ResolvedReplicate) -> CliResult<()> {
    #[derive(Serialize)]
    struct ScanPart<'a> {
        alpha: f64,
        workers: usize,
        chain: &'a ChainConfig,
    }
    #[derive(Serialize)]
    struct EvalPart {
        repeats: usize,
        grid_size: usize,
    }
    let mut root = toml::Table::new();
    root.insert(
        "simulate".into(),
        toml::Value::Table(sim_echo_section(resolved.case, &resolved.rep.sim)?),
    );
    root.insert(
        "scan".into(),
        toml::Value::Table(to_table(&ScanPart {
            alpha: resolved.rep.alpha,
            workers: resolved.rep.worker_count,
            chain: &resolved.rep.chain,
        })?),
    );
    root.insert(
        "evaluate".into(),
        toml::Value::Table(to_table(&EvalPart {
            repeats: resolved.rep.repeats,
            grid_size: resolved.rep.grid_size,
        })?),
    );
    write_echo(&resolved.out, &root)
}

pub fn write_evaluate_echo(resolved: &ResolvedEvaluate) -> CliResult<()> {
    #[derive(Serialize)]
    struct EvalEcho<'a> {
        results: &'a Path,
        truth: &'a Path,
        grid_size: usize,
    }
    let mut root = toml::Table::new();
    root.insert(
        "evaluate".into(),
        toml::Value::Table(to_table(&EvalEcho {
            results: &resolved.results,
            truth: &resolved.truth,
            grid_size: resolved.grid_size,
        })?),
    );
    write_echo(&resolved.out, &root)
}
