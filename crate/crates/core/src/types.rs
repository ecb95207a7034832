//! Shared domain types: genotype/phenotype containers, prior hyperparameters,
//! chain settings, and retained posterior draws.
//!
//! All types are immutable after construction and safe to share across
//! threads. Every stochastic operation in this crate takes an explicit seed
//! or generator; nothing reads global randomness.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lm,
    Lmm,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Lm => "lm",
            ModelKind::Lmm => "lmm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lm" => Ok(ModelKind::Lm),
            "lmm" => Ok(ModelKind::Lmm),
            other => Err(Error::InvalidArgument(format!(
                "unknown model kind {other:?}, expected \"lm\" or \"lmm\""
            ))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// n×d genotype matrix: rows are individuals, columns are SNPs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenotypeMatrix {
    pub values: DMatrix<f64>,
    pub snp_ids: Vec<String>,
    pub standardized: bool,
}

impl GenotypeMatrix {
    pub fn new(values: DMatrix<f64>, snp_ids: Vec<String>) -> Result<Self> {
        let m = GenotypeMatrix {
            values,
            snp_ids,
            standardized: false,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn n_individuals(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_snps(&self) -> usize {
        self.values.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d) = (self.values.nrows(), self.values.ncols());
        if n < 2 || d < 1 {
            return Err(Error::DimensionMismatch(format!(
                "genotype matrix needs n >= 2 and d >= 1, got n = {n}, d = {d}"
            )));
        }
        if self.snp_ids.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "{} SNP ids for {} genotype columns",
                self.snp_ids.len(),
                d
            )));
        }
        for j in 0..d {
            let col = self.values.column(j);
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "genotype column {j} ({}) has a non-finite entry",
                    self.snp_ids[j]
                )));
            }
        }
        if self.standardized {
            for j in 0..d {
                let (mean, sd) = column_mean_sd(&self.values, j);
                if mean.abs() >= 1e-10 {
                    return Err(Error::InvalidArgument(format!(
                        "standardized genotype column {j} has mean {mean:e}"
                    )));
                }
                if sd > 0.0 && (sd - 1.0).abs() >= 1e-8 {
                    return Err(Error::InvalidArgument(format!(
                        "standardized genotype column {j} has sd {sd}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// p×n phenotype matrix: rows are traits, column i is the trait vector of
/// individual i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhenotypeMatrix {
    pub values: DMatrix<f64>,
    pub trait_ids: Vec<String>,
}

impl PhenotypeMatrix {
    pub fn new(values: DMatrix<f64>, trait_ids: Vec<String>) -> Result<Self> {
        let m = PhenotypeMatrix { values, trait_ids };
        m.validate()?;
        Ok(m)
    }

    pub fn n_traits(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_individuals(&self) -> usize {
        self.values.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (p, n) = (self.values.nrows(), self.values.ncols());
        if p < 1 || n < 2 {
            return Err(Error::DimensionMismatch(format!(
                "phenotype matrix needs p >= 1 and n >= 2, got p = {p}, n = {n}"
            )));
        }
        if self.trait_ids.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{} trait ids for {} phenotype rows",
                self.trait_ids.len(),
                p
            )));
        }
        for i in 0..p {
            if self.values.row(i).iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "phenotype row {i} ({}) has a non-finite entry",
                    self.trait_ids[i]
                )));
            }
        }
        Ok(())
    }

    /// Per-trait means over individuals.
    pub fn trait_means(&self) -> DVector<f64> {
        let n = self.n_individuals() as f64;
        DVector::from_iterator(
            self.n_traits(),
            (0..self.n_traits()).map(|i| self.values.row(i).sum() / n),
        )
    }
}

/// Inverse-gamma shapes/rates and the intercept prior mean.
///
/// (a, b) parameterize the prior on the dependency-scale variance, (c,
/// d_rate) the observation-noise variance of both models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d_rate: f64,
    pub mu0: DVector<f64>,
}

impl Hyperparameters {
    /// Weakly informative defaults: all shapes/rates 0.01, intercept prior
    /// centered at the per-trait sample means.
    pub fn default_for(y: &PhenotypeMatrix) -> Self {
        Hyperparameters {
            a: 0.01,
            b: 0.01,
            c: 0.01,
            d_rate: 0.01,
            mu0: y.trait_means(),
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d_rate", self.d_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "hyperparameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        if self.mu0.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "mu0 has length {}, expected p = {p}",
                self.mu0.len()
            )));
        }
        if self.mu0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("mu0 has a non-finite entry".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub total_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            total_iterations: 5000,
            burn_in: 2500,
            thin: 1,
            seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn retained(&self) -> usize {
        if self.thin == 0 || self.total_iterations <= self.burn_in {
            return 0;
        }
        (self.total_iterations - self.burn_in) / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_iterations == 0 {
            return Err(Error::InvalidArgument(
                "total_iterations must be positive".into(),
            ));
        }
        if self.burn_in >= self.total_iterations {
            return Err(Error::InvalidArgument(format!(
                "burn_in ({}) must be smaller than total_iterations ({})",
                self.burn_in, self.total_iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be positive".into()));
        }
        if self.retained() < 100 {
            return Err(Error::InvalidArgument(format!(
                "chain retains only {} draws; (total_iterations - burn_in) / thin must be >= 100",
                self.retained()
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Retained posterior draws after burn-in and thinning. Row t of each array
/// is draw t; vector parameters store one column per trait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub model_kind: ModelKind,
    pub beta1: DMatrix<f64>,
    pub beta0: DMatrix<f64>,
    /// Noise variance draws; holds the LM's sigma^2 when model_kind is Lm.
    pub sigma_e2: DVector<f64>,
    pub sigma_p2: Option<DVector<f64>>,
    pub h: Option<DMatrix<f64>>,
}

impl PosteriorDraws {
    pub fn retained(&self) -> usize {
        self.beta1.nrows()
    }

    pub fn n_traits(&self) -> usize {
        self.beta1.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let rows = self.beta1.nrows();
        let p = self.beta1.ncols();
        if rows == 0 {
            return Err(Error::Degenerate("no retained draws".into()));
        }
        let shape_err = |what: &str| {
            Err(Error::DimensionMismatch(format!(
                "posterior draw field {what} is inconsistent with beta1 ({rows}x{p})"
            )))
        };
        if self.beta0.nrows() != rows || self.beta0.ncols() != p {
            return shape_err("beta0");
        }
        if self.sigma_e2.len() != rows {
            return shape_err("sigma_e2");
        }
        match self.model_kind {
            ModelKind::Lm => {
                if self.sigma_p2.is_some() || self.h.is_some() {
                    return Err(Error::InvalidArgument(
                        "LM draws must not carry sigma_p2 or h".into(),
                    ));
                }
            }
            ModelKind::Lmm => {
                match &self.sigma_p2 {
                    Some(s) if s.len() == rows => {}
                    _ => return shape_err("sigma_p2"),
                }
                match &self.h {
                    Some(hm) if hm.nrows() == rows && hm.ncols() == p => {}
                    _ => return shape_err("h"),
                }
            }
        }
        if self.sigma_e2.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::Numerical(
                "sigma_e2 draws must be strictly positive and finite".into(),
            ));
        }
        if let Some(s) = &self.sigma_p2 {
            if s.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
                return Err(Error::Numerical(
                    "sigma_p2 draws must be strictly positive and finite".into(),
                ));
            }
        }
        Ok(())
    }

    /// One row per retained draw, columns labeled `parameter:index` for
    /// vector parameters; intended for external diagnostics.
    pub fn write_delimited<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        let p = self.n_traits();
        let mut header: Vec<String> = Vec::new();
        for j in 0..p {
            header.push(format!("beta1:{j}"));
        }
        for j in 0..p {
            header.push(format!("beta0:{j}"));
        }
        if self.model_kind == ModelKind::Lmm {
            for j in 0..p {
                header.push(format!("h:{j}"));
            }
        }
        header.push("sigma_e2".to_string());
        if self.model_kind == ModelKind::Lmm {
            header.push("sigma_p2".to_string());
        }
        writeln!(w, "{}", header.join(","))?;
        for t in 0..self.retained() {
            let mut row: Vec<String> = Vec::new();
            for j in 0..p {
                row.push(format!("{}", self.beta1[(t, j)]));
            }
            for j in 0..p {
                row.push(format!("{}", self.beta0[(t, j)]));
            }
            if let Some(h) = &self.h {
                for j in 0..p {
                    row.push(format!("{}", h[(t, j)]));
                }
            }
            row.push(format!("{}", self.sigma_e2[t]));
            if let Some(s) = &self.sigma_p2 {
                row.push(format!("{}", s[t]));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn column_mean_sd(values: &DMatrix<f64>, j: usize) -> (f64, f64) {
    let n = values.nrows();
    let col = values.column(j);
    let mean = col.sum() / n as f64;
    let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n as f64 - 1.0)).sqrt();
    (mean, sd)
}

/// Centers every column and scales non-constant columns to unit sample
/// standard deviation (n-1 denominator). Constant columns are centered only;
/// their indices are returned alongside the transformed matrix.
pub fn standardize_genotypes(x: &GenotypeMatrix) -> Result<(GenotypeMatrix, Vec<usize>)> {
    let (n, d) = (x.values.nrows(), x.values.ncols());
    for j in 0..d {
        if x.values.column(j).iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "genotype column {j} ({}) has a non-finite entry",
                x.snp_ids.get(j).map(String::as_str).unwrap_or("?")
            )));
        }
    }
    let mut values = x.values.clone();
    let mut constant = Vec::new();
    for j in 0..d {
        let (mean, sd) = column_mean_sd(&values, j);
        if sd > 0.0 {
            for i in 0..n {
                values[(i, j)] = (values[(i, j)] - mean) / sd;
            }
        } else {
            constant.push(j);
            for i in 0..n {
                values[(i, j)] -= mean;
            }
        }
    }
    let out = GenotypeMatrix {
        values,
        snp_ids: x.snp_ids.clone(),
        standardized: true,
    };
    out.validate()?;
    Ok((out, constant))
}

/// Arithmetic mean of the named parameter over retained draws. Vector
/// parameters return one value per trait; scalar parameters a single value.
pub fn posterior_mean(draws: &PosteriorDraws, parameter: &str) -> Result<Vec<f64>> {
    if draws.retained() == 0 {
        return Err(Error::Degenerate("no retained draws".into()));
    }
    let matrix_mean = |m: &DMatrix<f64>| -> Vec<f64> {
        let rows = m.nrows() as f64;
        (0..m.ncols()).map(|j| m.column(j).sum() / rows).collect()
    };
    let vector_mean = |v: &DVector<f64>| vec![v.sum() / v.len() as f64];
    match parameter {
        "beta1" => Ok(matrix_mean(&draws.beta1)),
        "beta0" => Ok(matrix_mean(&draws.beta0)),
        "sigma_e2" => Ok(vector_mean(&draws.sigma_e2)),
        "sigma_p2" => draws
            .sigma_p2
            .as_ref()
            .map(vector_mean)
            .ok_or_else(|| Error::InvalidArgument("LM draws have no sigma_p2".into())),
        "h" => draws
            .h
            .as_ref()
            .map(matrix_mean)
            .ok_or_else(|| Error::InvalidArgument("LM draws have no h".into())),
        other => Err(Error::InvalidArgument(format!(
            "unknown parameter name {other:?}"
        ))),
    }
}

/// Checks that genotype and phenotype matrices describe the same individuals.
pub fn validate_dims(x: &GenotypeMatrix, y: &PhenotypeMatrix) -> Result<()> {
    x.validate()?;
    y.validate()?;
    if x.n_individuals() != y.n_individuals() {
        return Err(Error::DimensionMismatch(format!(
            "genotypes describe {} individuals but phenotypes {}",
            x.n_individuals(),
            y.n_individuals()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::Distribution;

    fn genotypes_from_columns(cols: &[&[f64]]) -> GenotypeMatrix {
        let n = cols[0].len();
        let d = cols.len();
        let mut values = DMatrix::zeros(n, d);
        for (j, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                values[(i, j)] = *v;
            }
        }
        GenotypeMatrix::new(values, (0..d).map(|j| format!("snp_{j}")).collect()).unwrap()
    }

    #[test]
    fn standardize_zero_mean_unit_sd() {
        let x = genotypes_from_columns(&[&[0.0, 1.0, 2.0, 1.0]]);
        let (sx, constant) = standardize_genotypes(&x).unwrap();
        assert!(constant.is_empty());
        assert!(sx.standardized);
        let (mean, sd) = column_mean_sd(&sx.values, 0);
        assert!(mean.abs() < 1e-12);
        assert_relative_eq!(sd, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn standardize_flags_constant_column() {
        let x = genotypes_from_columns(&[&[1.0, 1.0, 1.0, 1.0]]);
        let (sx, constant) = standardize_genotypes(&x).unwrap();
        assert_eq!(constant, vec![0]);
        assert!(sx.values.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standardize_matches_hand_computed_moments() {
        // Column (0,1,2): mean 1, sample sd 1. Column (2,2,0): mean 4/3,
        // sample sd 2/sqrt(3). Transformed entries below follow directly.
        let x = genotypes_from_columns(&[&[0.0, 1.0, 2.0], &[2.0, 2.0, 0.0]]);
        let (sx, constant) = standardize_genotypes(&x).unwrap();
        assert!(constant.is_empty());
        let expected_col0 = [-1.0, 0.0, 1.0];
        let s = 3.0_f64.sqrt() / 3.0;
        let expected_col1 = [s, s, -2.0 * s];
        for i in 0..3 {
            assert_relative_eq!(sx.values[(i, 0)], expected_col0[i], epsilon = 1e-12);
            assert_relative_eq!(sx.values[(i, 1)], expected_col1[i], epsilon = 1e-12);
        }
        for j in 0..2 {
            let col: Vec<f64> = sx.values.column(j).iter().copied().collect();
            let mean: f64 = col.iter().sum::<f64>() / 3.0;
            let var: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 2.0;
            assert!(mean.abs() < 1e-12);
            assert_relative_eq!(var.sqrt(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn standardize_is_idempotent() {
        let x = genotypes_from_columns(&[&[0.0, 1.0, 2.0, 1.0, 0.0], &[2.0, 0.0, 1.0, 1.0, 2.0]]);
        let (once, _) = standardize_genotypes(&x).unwrap();
        let (twice, _) = standardize_genotypes(&once).unwrap();
        for (a, b) in once.values.iter().zip(twice.values.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_rejects_non_finite_naming_column() {
        let mut x = genotypes_from_columns(&[&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]]);
        x.values[(1, 1)] = f64::NAN;
        let err = standardize_genotypes(&x).unwrap_err();
        assert!(err.to_string().contains("column 1"), "{err}");
    }

    fn draws_from_beta1(rows: &[[f64; 2]]) -> PosteriorDraws {
        let r = rows.len();
        let mut beta1 = DMatrix::zeros(r, 2);
        for (t, row) in rows.iter().enumerate() {
            beta1[(t, 0)] = row[0];
            beta1[(t, 1)] = row[1];
        }
        PosteriorDraws {
            model_kind: ModelKind::Lm,
            beta0: DMatrix::zeros(r, 2),
            sigma_e2: DVector::from_element(r, 1.0),
            sigma_p2: None,
            h: None,
            beta1,
        }
    }

    #[test]
    fn posterior_mean_two_point_average() {
        let draws = draws_from_beta1(&[[1.0, 3.0], [3.0, 1.0]]);
        assert_eq!(posterior_mean(&draws, "beta1").unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn posterior_mean_single_draw_identity() {
        let draws = draws_from_beta1(&[[0.25, -4.0]]);
        assert_eq!(posterior_mean(&draws, "beta1").unwrap(), vec![0.25, -4.0]);
    }

    #[test]
    fn posterior_mean_rejects_unknown_parameter() {
        let draws = draws_from_beta1(&[[1.0, 2.0]]);
        assert!(posterior_mean(&draws, "gamma").is_err());
        assert!(posterior_mean(&draws, "sigma_p2").is_err());
    }

    #[test]
    fn posterior_mean_monte_carlo_concentration() {
        // 1000 draws from N(0.5, sd 0.1): the mean lies within 3*sd/sqrt(1000)
        // ~= 0.0095 < 0.01 of 0.5 except with negligible probability.
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let normal = rand_distr::Normal::new(0.5, 0.1).unwrap();
        let rows: Vec<[f64; 2]> = (0..1000)
            .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
            .collect();
        let draws = draws_from_beta1(&rows);
        let mean = posterior_mean(&draws, "beta1").unwrap();
        assert!((mean[0] - 0.5).abs() < 0.01, "mean {mean:?}");
        assert!((mean[1] - 0.5).abs() < 0.01, "mean {mean:?}");
    }

    #[test]
    fn chain_config_validation() {
        assert!(ChainConfig::default().validate().is_ok());
        assert_eq!(ChainConfig::default().retained(), 2500);
        let too_few = ChainConfig {
            total_iterations: 150,
            burn_in: 100,
            thin: 1,
            seed: 0,
        };
        assert!(too_few.validate().is_err());
        let bad_burn = ChainConfig {
            total_iterations: 100,
            burn_in: 100,
            thin: 1,
            seed: 0,
        };
        assert!(bad_burn.validate().is_err());
        let thinned = ChainConfig {
            total_iterations: 1100,
            burn_in: 100,
            thin: 10,
            seed: 0,
        };
        assert_eq!(thinned.retained(), 100);
        assert!(thinned.validate().is_ok());
    }

    #[test]
    fn posterior_draws_validation_catches_shape_and_sign_errors() {
        let mut draws = draws_from_beta1(&[[1.0, 2.0], [2.0, 1.0]]);
        assert!(draws.validate().is_ok());
        draws.sigma_e2[1] = 0.0;
        assert!(draws.validate().is_err());
        let mut wrong_shape = draws_from_beta1(&[[1.0, 2.0], [2.0, 1.0]]);
        wrong_shape.beta0 = DMatrix::zeros(3, 2);
        assert!(wrong_shape.validate().is_err());
        let mut lm_with_h = draws_from_beta1(&[[1.0, 2.0]]);
        lm_with_h.h = Some(DMatrix::zeros(1, 2));
        assert!(lm_with_h.validate().is_err());
    }

    #[test]
    fn core_types_round_trip_bit_exactly() {
        let x = genotypes_from_columns(&[&[0.1, 1.7, 2.3], &[0.9, 0.2, 0.4]]);
        let json = serde_json::to_string(&x).unwrap();
        let back: GenotypeMatrix = serde_json::from_str(&json).unwrap();
        for (a, b) in x.values.iter().zip(back.values.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(x.snp_ids, back.snp_ids);

        let hyper = Hyperparameters {
            a: 0.01,
            b: 1.0 / 3.0,
            c: 2.0_f64.sqrt(),
            d_rate: 0.1 + 0.2,
            mu0: DVector::from_vec(vec![std::f64::consts::PI, -0.0]),
        };
        let json = serde_json::to_string(&hyper).unwrap();
        let back: Hyperparameters = serde_json::from_str(&json).unwrap();
        assert_eq!(hyper.c.to_bits(), back.c.to_bits());
        assert_eq!(hyper.d_rate.to_bits(), back.d_rate.to_bits());
        assert_eq!(hyper.mu0[0].to_bits(), back.mu0[0].to_bits());
        assert_eq!(hyper.mu0[1].to_bits(), back.mu0[1].to_bits());

        let chain = ChainConfig {
            total_iterations: 1234,
            burn_in: 77,
            thin: 3,
            seed: u64::MAX - 1,
        };
        let json = serde_json::to_string(&chain).unwrap();
        let back: ChainConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(chain, back);

        let draws = draws_from_beta1(&[[0.1 + 0.2, 1e-300], [-1.5, 2.5]]);
        let json = serde_json::to_string(&draws).unwrap();
        let back: PosteriorDraws = serde_json::from_str(&json).unwrap();
        for (a, b) in draws.beta1.iter().zip(back.beta1.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn validate_dims_checks_individual_counts() {
        let x = genotypes_from_columns(&[&[0.0, 1.0, 2.0]]);
        let y = PhenotypeMatrix::new(
            DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            vec!["qt_1".into(), "qt_2".into()],
        )
        .unwrap();
        assert!(validate_dims(&x, &y).is_ok());
        let y_short = PhenotypeMatrix::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 5.0]),
            vec!["qt_1".into(), "qt_2".into()],
        )
        .unwrap();
        assert!(validate_dims(&x, &y_short).is_err());
    }

    #[test]
    fn draw_export_labels_columns_by_parameter_and_index() {
        let draws = draws_from_beta1(&[[1.0, 2.0]]);
        let mut buf = Vec::new();
        draws.write_delimited(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "beta1:0,beta1:1,beta0:0,beta0:1,sigma_e2"
        );
        assert_eq!(lines.next().unwrap(), "1,2,0,0,1");
    }
}
