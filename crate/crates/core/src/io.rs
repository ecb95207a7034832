//! Reading and writing the on-disk formats: dataset directories
//! (genotypes.csv, phenotypes.csv, truth.csv, meta.toml), scan report
//! tables (results.csv, significant.csv, timing.csv), and headerless
//! matrix files. All tables are comma-separated with LF line endings;
//! floats print in shortest round-trip form so reading a file back
//! recovers bit-identical values.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::assoc::{CredibleInterval, TestResult};
use crate::error::{Error, Result};
use crate::scanner::{ScanReport, ScanRow};
use crate::simgen::{SimConfig, SimDataset};
use crate::types::{GenotypeMatrix, ModelKind, PhenotypeMatrix};

pub const GENOTYPES_FILE: &str = "genotypes.csv";
pub const PHENOTYPES_FILE: &str = "phenotypes.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const META_FILE: &str = "meta.toml";
pub const RESULTS_FILE: &str = "results.csv";
pub const SIGNIFICANT_FILE: &str = "significant.csv";
pub const TIMING_FILE: &str = "timing.csv";

const RESULT_COLUMNS: [&str; 10] = [
    "model",
    "snp_id",
    "trait_id",
    "posterior_mean_beta",
    "ci_lower",
    "ci_upper",
    "ci_significant",
    "cct_p",
    "bonferroni_significant",
    "credible_score",
];

/// Shortest representation that parses back to the same f64; integral
/// magnitudes keep a decimal point so columns stay visibly numeric. Every
/// numeric CSV column in this crate and downstream tools uses this format.
pub fn fmt_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

fn parse_f64(field: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("expected a number, got {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(
            path,
            line,
            format!("non-finite value {field:?} (missing values are not permitted)"),
        ));
    }
    Ok(v)
}

fn parse_bool(field: &str, path: &Path, line: usize) -> Result<bool> {
    match field.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::parse(
            path,
            line,
            format!("expected true or false, got {other:?}"),
        )),
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(1, |p| p.line() as usize);
    if e.is_io_error() {
        if let csv::ErrorKind::Io(source) = e.into_kind() {
            return Error::io(path, source);
        }
        unreachable!("is_io_error implies Io kind");
    }
    Error::parse(path, line, e.to_string())
}

/// All records of a delimited file with their 1-based line numbers.
/// Flexible widths: callers enforce expected field counts so the error
/// message can say what was expected where.
fn read_records(path: &Path) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        rows.push((line, rec));
    }
    Ok(rows)
}

fn expect_fields(rec: &csv::StringRecord, want: usize, path: &Path, line: usize) -> Result<()> {
    if rec.len() != want {
        return Err(Error::parse(
            path,
            line,
            format!("expected {want} fields, got {}", rec.len()),
        ));
    }
    Ok(())
}

/// First row: SNP ids. Each following row: one individual's values.
pub fn write_genotypes(path: &Path, x: &GenotypeMatrix) -> Result<()> {
    let mut out = String::new();
    out.push_str(&x.snp_ids.join(","));
    out.push('\n');
    for i in 0..x.values.nrows() {
        let row: Vec<String> = (0..x.values.ncols())
            .map(|j| fmt_f64(x.values[(i, j)]))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_file(path, &out)
}

/// Reads a genotype table; the result is marked unstandardized, leaving
/// any scaling decision to the scan configuration.
pub fn read_genotypes(path: &Path) -> Result<GenotypeMatrix> {
    let rows = read_records(path)?;
    if rows.len() < 2 {
        return Err(Error::parse(path, 1, "expected a header row and data rows"));
    }
    let snp_ids: Vec<String> = rows[0].1.iter().map(|s| s.trim().to_owned()).collect();
    if snp_ids.iter().any(String::is_empty) {
        return Err(Error::parse(path, rows[0].0, "empty SNP id in header"));
    }
    let d = snp_ids.len();
    let n = rows.len() - 1;
    let mut values = DMatrix::zeros(n, d);
    for (i, (line, rec)) in rows[1..].iter().enumerate() {
        expect_fields(rec, d, path, *line)?;
        for (j, f) in rec.iter().enumerate() {
            values[(i, j)] = parse_f64(f, path, *line)?;
        }
    }
    GenotypeMatrix::new(values, snp_ids)
}

/// First row: "trait_id" plus individual ids. Each following row: one
/// trait's values across individuals.
pub fn write_phenotypes(path: &Path, y: &PhenotypeMatrix) -> Result<()> {
    let n = y.n_individuals();
    let mut out = String::from("trait_id");
    for i in 0..n {
        let _ = write!(out, ",ind_{i}");
    }
    out.push('\n');
    for (t, id) in y.trait_ids.iter().enumerate() {
        out.push_str(id);
        for i in 0..n {
            let _ = write!(out, ",{}", fmt_f64(y.values[(t, i)]));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_phenotypes(path: &Path) -> Result<PhenotypeMatrix> {
    let rows = read_records(path)?;
    if rows.len() < 2 {
        return Err(Error::parse(
            path,
            1,
            "expected a header row and trait rows",
        ));
    }
    let (header_line, header) = &rows[0];
    if header.len() < 2 || header.get(0).map(str::trim) != Some("trait_id") {
        return Err(Error::parse(
            path,
            *header_line,
            "header must start with trait_id followed by individual ids",
        ));
    }
    let n = header.len() - 1;
    let p = rows.len() - 1;
    let mut values = DMatrix::zeros(p, n);
    let mut trait_ids = Vec::with_capacity(p);
    for (t, (line, rec)) in rows[1..].iter().enumerate() {
        expect_fields(rec, n + 1, path, *line)?;
        let id = rec[0].trim();
        if id.is_empty() {
            return Err(Error::parse(path, *line, "empty trait id"));
        }
        trait_ids.push(id.to_owned());
        for i in 0..n {
            values[(t, i)] = parse_f64(&rec[i + 1], path, *line)?;
        }
    }
    PhenotypeMatrix::new(values, trait_ids)
}

/// Ground truth of a simulated dataset: which SNPs carry signal and the
/// effect row that generated each one.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTable {
    pub snp_ids: Vec<String>,
    pub trait_ids: Vec<String>,
    pub null_mask: Vec<bool>,
    /// d x p true effect matrix.
    pub true_beta: DMatrix<f64>,
}

/// First row: snp_id, null, then one beta column per trait.
pub fn write_truth(path: &Path, truth: &TruthTable) -> Result<()> {
    let mut out = String::from("snp_id,null");
    for id in &truth.trait_ids {
        let _ = write!(out, ",beta_{id}");
    }
    out.push('\n');
    for j in 0..truth.snp_ids.len() {
        let _ = write!(out, "{},{}", truth.snp_ids[j], truth.null_mask[j]);
        for t in 0..truth.trait_ids.len() {
            let _ = write!(out, ",{}", fmt_f64(truth.true_beta[(j, t)]));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_truth(path: &Path) -> Result<TruthTable> {
    let rows = read_records(path)?;
    if rows.len() < 2 {
        return Err(Error::parse(path, 1, "expected a header row and SNP rows"));
    }
    let (header_line, header) = &rows[0];
    if header.len() < 3
        || header.get(0).map(str::trim) != Some("snp_id")
        || header.get(1).map(str::trim) != Some("null")
    {
        return Err(Error::parse(
            path,
            *header_line,
            "header must be snp_id, null, then beta_<trait> columns",
        ));
    }
    let trait_ids: Vec<String> = header
        .iter()
        .skip(2)
        .map(|h| {
            h.trim()
                .strip_prefix("beta_")
                .map(str::to_owned)
                .ok_or_else(|| {
                    Error::parse(
                        path,
                        *header_line,
                        format!("expected beta_<trait>, got {h:?}"),
                    )
                })
        })
        .collect::<Result<_>>()?;
    let p = trait_ids.len();
    let d = rows.len() - 1;
    let mut snp_ids = Vec::with_capacity(d);
    let mut null_mask = Vec::with_capacity(d);
    let mut true_beta = DMatrix::zeros(d, p);
    for (j, (line, rec)) in rows[1..].iter().enumerate() {
        expect_fields(rec, p + 2, path, *line)?;
        snp_ids.push(rec[0].trim().to_owned());
        null_mask.push(parse_bool(&rec[1], path, *line)?);
        for t in 0..p {
            true_beta[(j, t)] = parse_f64(&rec[t + 2], path, *line)?;
        }
    }
    Ok(TruthTable {
        snp_ids,
        trait_ids,
        null_mask,
        true_beta,
    })
}

pub fn write_meta(path: &Path, config: &SimConfig) -> Result<()> {
    let text = toml::to_string(config)
        .map_err(|e| Error::InvalidArgument(format!("serializing config: {e}")))?;
    write_file(path, &text)
}

pub fn read_meta(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: SimConfig =
        toml::from_str(&text).map_err(|e| Error::parse(path, 1, format!("invalid config: {e}")))?;
    config.validate()?;
    Ok(config)
}

/// Persists a simulated dataset as a directory of genotypes.csv,
/// phenotypes.csv, truth.csv, and meta.toml; together with the seed in
/// the meta file this is sufficient to re-verify any downstream number.
pub fn write_dataset(dir: &Path, ds: &SimDataset, config: &SimConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_genotypes(&dir.join(GENOTYPES_FILE), &ds.x)?;
    write_phenotypes(&dir.join(PHENOTYPES_FILE), &ds.y)?;
    write_truth(
        &dir.join(TRUTH_FILE),
        &TruthTable {
            snp_ids: ds.x.snp_ids.clone(),
            trait_ids: ds.y.trait_ids.clone(),
            null_mask: ds.null_mask.clone(),
            true_beta: ds.true_beta.clone(),
        },
    )?;
    write_meta(&dir.join(META_FILE), config)
}

/// Loads the model inputs of a dataset directory. The genotype matrix
/// comes back unstandardized; truth is read only if present (a user
/// dataset has no ground truth).
pub fn read_dataset(dir: &Path) -> Result<(GenotypeMatrix, PhenotypeMatrix, Option<TruthTable>)> {
    let x = read_genotypes(&dir.join(GENOTYPES_FILE))?;
    let y = read_phenotypes(&dir.join(PHENOTYPES_FILE))?;
    let truth_path = dir.join(TRUTH_FILE);
    let truth = if truth_path.exists() {
        Some(read_truth(&truth_path)?)
    } else {
        None
    };
    Ok((x, y, truth))
}

fn push_result_row(out: &mut String, row: &ScanRow) {
    let r = &row.result;
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{}",
        row.model.as_str(),
        r.snp_id,
        r.trait_id,
        fmt_f64(r.posterior_mean_beta),
        fmt_f64(r.ci.lower),
        fmt_f64(r.ci.upper),
        r.ci_significant,
        fmt_f64(r.cct_p),
        r.bonferroni_significant,
        fmt_f64(r.credible_score),
    );
}

pub fn write_results(path: &Path, rows: &[ScanRow]) -> Result<()> {
    let mut out = RESULT_COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        push_result_row(&mut out, row);
    }
    write_file(path, &out)
}

/// Reads a results table back; the credible-interval level is not a
/// column (it is fixed by the echoed scan config), so intervals are
/// restored with level 0 and must not be reused for new decisions.
pub fn read_results(path: &Path) -> Result<Vec<ScanRow>> {
    let rows = read_records(path)?;
    let Some(((header_line, header), body)) = rows.split_first() else {
        return Err(Error::parse(path, 1, "empty results file"));
    };
    if header.iter().map(str::trim).ne(RESULT_COLUMNS) {
        return Err(Error::parse(
            path,
            *header_line,
            "unrecognized results header",
        ));
    }
    let mut out = Vec::with_capacity(body.len());
    for (line, rec) in body {
        expect_fields(rec, RESULT_COLUMNS.len(), path, *line)?;
        out.push(ScanRow {
            model: ModelKind::parse(&rec[0])?,
            result: TestResult {
                snp_id: rec[1].trim().to_owned(),
                trait_id: rec[2].trim().to_owned(),
                posterior_mean_beta: parse_f64(&rec[3], path, *line)?,
                ci: CredibleInterval {
                    lower: parse_f64(&rec[4], path, *line)?,
                    upper: parse_f64(&rec[5], path, *line)?,
                    level: 0.0,
                },
                ci_significant: parse_bool(&rec[6], path, *line)?,
                cct_p: parse_f64(&rec[7], path, *line)?,
                bonferroni_significant: parse_bool(&rec[8], path, *line)?,
                credible_score: parse_f64(&rec[9], path, *line)?,
            },
        });
    }
    Ok(out)
}

/// One row per SNP plus a final total row.
pub fn write_timing(path: &Path, report: &ScanReport, snp_ids: &[String]) -> Result<()> {
    let mut out = String::from("snp_index,snp_id,seconds\n");
    for (j, s) in report.per_snp_seconds.iter().enumerate() {
        let _ = writeln!(out, "{j},{},{}", snp_ids[j], fmt_f64(*s));
    }
    let _ = writeln!(out, "total,,{}", fmt_f64(report.total_seconds));
    write_file(path, &out)
}

/// Writes the three report tables: the full results, the filtered
/// significant listing at the scan's alpha, and per-SNP timing.
/// The resolved configuration echo is written by the caller, which owns
/// the paths needed to re-run the scan.
pub fn write_scan_report(dir: &Path, report: &ScanReport, snp_ids: &[String]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_results(&dir.join(RESULTS_FILE), &report.results)?;
    let significant = crate::scanner::filter_significant(report, report.config.alpha)?;
    write_results(&dir.join(SIGNIFICANT_FILE), &significant)?;
    write_timing(&dir.join(TIMING_FILE), report, snp_ids)
}

/// Headerless numeric matrix, one row per line; used for covariance
/// factors supplied as files.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let rows = read_records(path)?;
    if rows.is_empty() {
        return Err(Error::parse(path, 1, "empty matrix file"));
    }
    let ncols = rows[0].1.len();
    let mut values = DMatrix::zeros(rows.len(), ncols);
    for (i, (line, rec)) in rows.iter().enumerate() {
        expect_fields(rec, ncols, path, *line)?;
        for (j, f) in rec.iter().enumerate() {
            values[(i, j)] = parse_f64(f, path, *line)?;
        }
    }
    Ok(values)
}

/// Resolves a possibly relative path against an optional root taken from
/// the environment; commands use this so batch runs can redirect all
/// outputs without editing configs.
pub fn resolve_output_dir(requested: &Path, env_root: Option<&str>) -> PathBuf {
    match env_root {
        Some(root) if requested.is_relative() => Path::new(root).join(requested),
        _ => requested.to_path_buf(),
    }
}
