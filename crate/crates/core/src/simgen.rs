//! Synthetic dataset generation for the simulation studies.
//!
//! Phenotypes follow y_i = sum_j x_ij * beta_j + h + eps_i with a shared
//! trait-level effect h drawn once per dataset and per-individual noise
//! eps_i, both either Gaussian or multivariate t. Genotypes are independent
//! biallelic markers with uniform minor-allele frequencies, standardized
//! per column. Effect rows are zero with probability pi1, otherwise
//! standard normal, so roughly (1 - pi1) of the markers carry signal.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, ChiSquared, Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::covariance::{build_g_for_dimension, CovarianceSpec};
use crate::error::{Error, Result};
use crate::linalg;
use crate::seeding;
use crate::types::{standardize_genotypes, GenotypeMatrix, PhenotypeMatrix};

/// Noise distribution for both the shared effect h and the per-individual
/// noise. The t family keeps the same scale matrix but heavy tails; its
/// covariance is v/(v-2) times the scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseFamily {
    Normal,
    StudentT { v: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub d: usize,
    pub p: usize,
    /// Probability that a marker's effect row is exactly zero.
    pub pi1: f64,
    /// Noise standard deviation (square root of the noise variance).
    pub sigma_e: f64,
    /// Shared-effect standard deviation.
    pub sigma_p: f64,
    pub cov_spec: CovarianceSpec,
    pub noise_family: NoiseFamily,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 individuals, got n = {}",
                self.n
            )));
        }
        if self.d == 0 || self.p == 0 {
            return Err(Error::InvalidArgument(format!(
                "need d >= 1 markers and p >= 1 traits, got d = {}, p = {}",
                self.d, self.p
            )));
        }
        if !(0.0..=1.0).contains(&self.pi1) || !self.pi1.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "pi1 must lie in [0, 1], got {}",
                self.pi1
            )));
        }
        for (name, v) in [("sigma_e", self.sigma_e), ("sigma_p", self.sigma_p)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if let NoiseFamily::StudentT { v } = self.noise_family {
            if !(v.is_finite() && v > 2.0) {
                return Err(Error::InvalidArgument(format!(
                    "Student-t degrees of freedom must exceed 2 for finite variance, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One generated dataset plus everything needed to reproduce its phenotypes
/// exactly: Y = assemble_phenotypes(X, true_beta, h_true, noise).
#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub x: GenotypeMatrix,
    pub y: PhenotypeMatrix,
    /// d x p effect matrix; row j is marker j's effect on each trait.
    pub true_beta: DMatrix<f64>,
    /// Shared trait-level effect, drawn once per dataset.
    pub h_true: DVector<f64>,
    /// null_mask[j] is true iff row j of true_beta is exactly zero.
    pub null_mask: Vec<bool>,
    /// p x n realized noise matrix; column i is eps_i.
    pub noise: DMatrix<f64>,
}

impl SimDataset {
    pub fn n_causal(&self) -> usize {
        self.null_mask.iter().filter(|&&is_null| !is_null).count()
    }
}

fn gen_raw_genotypes_in_maf_range(
    n: usize,
    d: usize,
    maf_lo: f64,
    maf_hi: f64,
    seed: u64,
) -> Result<GenotypeMatrix> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 individuals, got n = {n}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let maf_dist = Uniform::new_inclusive(maf_lo, maf_hi)
        .map_err(|e| Error::InvalidArgument(format!("invalid MAF range: {e}")))?;
    let mut values = DMatrix::zeros(n, d);
    for j in 0..d {
        let maf = maf_dist.sample(&mut rng);
        let binom = Binomial::new(2, maf)
            .map_err(|e| Error::InvalidArgument(format!("invalid MAF {maf}: {e}")))?;
        for i in 0..n {
            values[(i, j)] = binom.sample(&mut rng) as f64;
        }
    }
    GenotypeMatrix::new(values, (0..d).map(|j| format!("snp_{}", j + 1)).collect())
}

/// Raw 0/1/2 allele counts: per marker, MAF ~ Uniform(0.05, 0.5), then each
/// individual's genotype ~ Binomial(2, MAF), all markers independent.
pub fn gen_raw_genotypes(n: usize, d: usize, seed: u64) -> Result<GenotypeMatrix> {
    gen_raw_genotypes_in_maf_range(n, d, 0.05, 0.5, seed)
}

/// Raw genotypes standardized per column. A column that came out constant
/// (possible for rare alleles and small n) is centered to zero and logged.
pub fn gen_genotypes(n: usize, d: usize, seed: u64) -> Result<GenotypeMatrix> {
    let raw = gen_raw_genotypes(n, d, seed)?;
    let (standardized, constant) = standardize_genotypes(&raw)?;
    if !constant.is_empty() {
        log::warn!(
            "{} of {d} generated genotype columns are constant and were centered only: {:?}",
            constant.len(),
            constant
        );
    }
    Ok(standardized)
}

/// Effect matrix draw: each row is zero with probability pi1, otherwise
/// standard normal per trait. Returns the matrix and the null mask.
pub fn gen_effects(d: usize, p: usize, pi1: f64, seed: u64) -> Result<(DMatrix<f64>, Vec<bool>)> {
    if !(0.0..=1.0).contains(&pi1) || !pi1.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "pi1 must lie in [0, 1], got {pi1}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut beta = DMatrix::zeros(d, p);
    let mut null_mask = vec![true; d];
    for j in 0..d {
        if rng.random::<f64>() >= pi1 {
            null_mask[j] = false;
            for k in 0..p {
                beta[(j, k)] = StandardNormal.sample(&mut rng);
            }
        }
    }
    Ok((beta, null_mask))
}

/// Multivariate t draws: row = (L z) * sqrt(v / w) with z standard normal,
/// w ~ ChiSquare(v), and L the Cholesky factor of the scale matrix. The
/// sample covariance converges to v/(v-2) times the scale.
pub fn gen_mvt(
    scale_matrix: &DMatrix<f64>,
    v: f64,
    count: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if !(v.is_finite() && v > 2.0) {
        return Err(Error::InvalidArgument(format!(
            "degrees of freedom must exceed 2 for finite variance, got {v}"
        )));
    }
    let l = linalg::cholesky_lower(scale_matrix)?;
    let p = scale_matrix.nrows();
    let chi = ChiSquared::new(v)
        .map_err(|e| Error::InvalidArgument(format!("invalid degrees of freedom {v}: {e}")))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(count, p);
    for t in 0..count {
        let z = DVector::from_iterator(
            p,
            (0..p)
                .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)),
        );
        let w: f64 = chi.sample(&mut rng);
        let row = (&l * z) * (v / w).sqrt();
        for k in 0..p {
            out[(t, k)] = row[k];
        }
    }
    Ok(out)
}

/// Deterministic phenotype assembly: Y[:, i] = true_beta' x_i + h + noise_i.
/// Used both to generate datasets and to re-verify stored ones.
pub fn assemble_phenotypes(
    x: &GenotypeMatrix,
    true_beta: &DMatrix<f64>,
    h: &DVector<f64>,
    noise: &DMatrix<f64>,
) -> Result<PhenotypeMatrix> {
    let (n, d) = (x.n_individuals(), x.n_snps());
    let p = true_beta.ncols();
    if true_beta.nrows() != d {
        return Err(Error::DimensionMismatch(format!(
            "effect matrix has {} rows for {d} markers",
            true_beta.nrows()
        )));
    }
    if h.len() != p || noise.nrows() != p || noise.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "mismatched shapes: h is {}, noise is {}x{}, expected p = {p}, n = {n}",
            h.len(),
            noise.nrows(),
            noise.ncols()
        )));
    }
    // Y = beta' X' + h 1' + noise, all p x n.
    let mut values = true_beta.transpose() * x.values.transpose();
    for i in 0..n {
        for k in 0..p {
            values[(k, i)] += h[k] + noise[(k, i)];
        }
    }
    PhenotypeMatrix::new(values, (0..p).map(|k| format!("qt_{}", k + 1)).collect())
}

/// Generates one complete dataset from the configuration. Pure in the
/// config: identical configs give bit-identical datasets. Sub-seeds for
/// genotypes, effects, shared effect, and noise are derived from the base
/// seed, so the pieces are independent but individually reproducible.
pub fn gen_dataset(config: &SimConfig) -> Result<SimDataset> {
    config.validate()?;
    let g = build_g_for_dimension(&config.cov_spec, config.p)?;
    let x = gen_genotypes(config.n, config.d, seeding::mix(config.seed, 1))?;
    let (true_beta, null_mask) =
        gen_effects(config.d, config.p, config.pi1, seeding::mix(config.seed, 2))?;

    let h_true = if config.sigma_p == 0.0 {
        DVector::zeros(config.p)
    } else {
        let scale = g.g() * (config.sigma_p * config.sigma_p);
        match config.noise_family {
            NoiseFamily::Normal => {
                let l = linalg::cholesky_lower(&scale)?;
                let mut rng = ChaCha20Rng::seed_from_u64(seeding::mix(config.seed, 3));
                let z = DVector::from_iterator(
                    config.p,
                    (0..config.p).map(|_| {
                        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                    }),
                );
                &l * z
            }
            NoiseFamily::StudentT { v } => {
                let row = gen_mvt(&scale, v, 1, seeding::mix(config.seed, 3))?;
                row.row(0).transpose()
            }
        }
    };

    let noise = if config.sigma_e == 0.0 {
        DMatrix::zeros(config.p, config.n)
    } else {
        let scale = DMatrix::identity(config.p, config.p) * (config.sigma_e * config.sigma_e);
        match config.noise_family {
            NoiseFamily::Normal => {
                let mut rng = ChaCha20Rng::seed_from_u64(seeding::mix(config.seed, 4));
                let mut noise = DMatrix::zeros(config.p, config.n);
                for i in 0..config.n {
                    for k in 0..config.p {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        noise[(k, i)] = config.sigma_e * z;
                    }
                }
                noise
            }
            NoiseFamily::StudentT { v } => {
                let rows = gen_mvt(&scale, v, config.n, seeding::mix(config.seed, 4))?;
                rows.transpose()
            }
        }
    };

    let y = assemble_phenotypes(&x, &true_beta, &h_true, &noise)?;
    debug_assert!(null_mask
        .iter()
        .enumerate()
        .all(|(j, &is_null)| is_null == true_beta.row(j).iter().all(|&v| v == 0.0)));
    Ok(SimDataset {
        x,
        y,
        true_beta,
        h_true,
        null_mask,
        noise,
    })
}

/// Preset configurations for the six simulated dependency structures:
/// pair correlations 0.5 (1), 0 (2), 0.2 (4), 0.8 (5), a 6-trait Kronecker
/// product (3), and a 6-trait adjacency plus 0.8 ridge (6). All presets use
/// sigma_e = 0.1, sigma_p = 0.2, pi1 = 0.95, d = 100 markers, n = 100
/// individuals, Gaussian noise, seed 0; override fields as needed.
pub fn case_preset(case_number: usize) -> Result<SimConfig> {
    let pair = |off: f64| CovarianceSpec::Explicit {
        matrix: DMatrix::from_row_slice(2, 2, &[1.0, off, off, 1.0]),
    };
    let (p, cov_spec) = match case_number {
        1 => (2, pair(0.5)),
        2 => (2, pair(0.0)),
        3 => (
            6,
            CovarianceSpec::Kronecker {
                a: DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 1.0]),
                b: DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.4, 0.1, 0.6, 0.1, 0.4, 0.1, 0.5]),
            },
        ),
        4 => (2, pair(0.2)),
        5 => (2, pair(0.8)),
        6 => (
            6,
            CovarianceSpec::AdjacencyRidge {
                adjacency: DMatrix::from_row_slice(
                    6,
                    6,
                    &[
                        1.0, 1.0, 0.0, 0.0, 0.0, 0.0, //
                        1.0, 1.0, 1.0, 1.0, 0.0, 0.0, //
                        0.0, 1.0, 1.0, 0.0, 0.0, 0.0, //
                        0.0, 1.0, 0.0, 1.0, 0.0, 0.0, //
                        0.0, 0.0, 0.0, 0.0, 1.0, 1.0, //
                        0.0, 0.0, 0.0, 0.0, 1.0, 1.0,
                    ],
                ),
                rho: 0.8,
            },
        ),
        other => {
            return Err(Error::InvalidArgument(format!(
                "case number must be 1..=6, got {other}"
            )))
        }
    };
    Ok(SimConfig {
        n: 100,
        d: 100,
        p,
        pi1: 0.95,
        sigma_e: 0.1,
        sigma_p: 0.2,
        cov_spec,
        noise_family: NoiseFamily::Normal,
        seed: 0,
    })
}
