//! Construction and validation of the p×p trait-dependency matrix G.
//!
//! G can be specified four ways: the sample covariance of the phenotypes, an
//! explicit matrix, a Kronecker product of two smaller factors, or an
//! adjacency matrix plus a diagonal ridge. Whatever the source, the accepted
//! matrix is factored once and shared read-only by every SNP fit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::types::PhenotypeMatrix;

/// Row-major nested-list form for matrix fields, the natural shape for
/// configuration files.
mod serde_rows {
    use nalgebra::DMatrix;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map(Vec::len).unwrap_or(0);
        if ncols == 0 {
            return Err(D::Error::custom("matrix needs at least one nonempty row"));
        }
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("matrix rows have unequal lengths"));
        }
        Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CovarianceSpec {
    /// Unbiased sample covariance of the phenotype columns.
    #[serde(rename = "sample")]
    SampleCovariance,
    Explicit {
        #[serde(with = "serde_rows")]
        matrix: DMatrix<f64>,
    },
    Kronecker {
        #[serde(with = "serde_rows")]
        a: DMatrix<f64>,
        #[serde(with = "serde_rows")]
        b: DMatrix<f64>,
    },
    /// G = A + rho·I for a 0/1 symmetric adjacency matrix A with unit
    /// diagonal; rho must be large enough to make the sum positive definite.
    #[serde(rename = "adjacency")]
    AdjacencyRidge {
        #[serde(with = "serde_rows")]
        adjacency: DMatrix<f64>,
        rho: f64,
    },
}

impl CovarianceSpec {
    pub fn mode_name(&self) -> &'static str {
        match self {
            CovarianceSpec::SampleCovariance => "sample",
            CovarianceSpec::Explicit { .. } => "explicit",
            CovarianceSpec::Kronecker { .. } => "kronecker",
            CovarianceSpec::AdjacencyRidge { .. } => "adjacency",
        }
    }
}

/// Validated dependency matrix with its Cholesky factor and inverse cached.
#[derive(Debug, Clone, PartialEq)]
pub struct GMatrix {
    g: DMatrix<f64>,
    cholesky_lower: DMatrix<f64>,
    g_inverse: DMatrix<f64>,
}

impl GMatrix {
    /// Accepts a symmetric positive definite matrix, caching its factor and
    /// inverse. The cached pieces are verified against the source matrix
    /// before the value is released.
    pub fn from_matrix(g: DMatrix<f64>) -> Result<Self> {
        linalg::ensure_all_finite(&g, "dependency matrix")?;
        if g.nrows() != g.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "dependency matrix must be square, got {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        let asym = linalg::max_asymmetry(&g);
        if asym >= 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "dependency matrix is asymmetric by {asym:e}"
            )));
        }
        let cholesky_lower = linalg::cholesky_lower(&g)?;
        let g_inverse = linalg::inverse_from_cholesky(&cholesky_lower);
        let p = g.nrows();
        let identity_err = linalg::max_abs_diff(&(&g * &g_inverse), &DMatrix::identity(p, p));
        if identity_err >= 1e-8 {
            return Err(Error::Numerical(format!(
                "inverse verification failed: |g*g_inverse - I| = {identity_err:e}"
            )));
        }
        let refactor_err =
            linalg::max_abs_diff(&(&cholesky_lower * cholesky_lower.transpose()), &g);
        if refactor_err >= 1e-10 {
            return Err(Error::Numerical(format!(
                "Cholesky verification failed: |L*L' - g| = {refactor_err:e}"
            )));
        }
        Ok(GMatrix {
            g,
            cholesky_lower,
            g_inverse,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn cholesky_lower(&self) -> &DMatrix<f64> {
        &self.cholesky_lower
    }

    pub fn g_inverse(&self) -> &DMatrix<f64> {
        &self.g_inverse
    }

    /// hᵀ G⁻¹ h using the cached inverse.
    pub fn quadratic_form_inverse(&self, h: &nalgebra::DVector<f64>) -> f64 {
        let mut total = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                total += h[i] * self.g_inverse[(i, j)] * h[j];
            }
        }
        total
    }
}

/// (A ⊗ B)[i·r+k, j·r+l] = A[i,j]·B[k,l].
pub fn kronecker(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    linalg::ensure_all_finite(a, "Kronecker factor A")?;
    linalg::ensure_all_finite(b, "Kronecker factor B")?;
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "Kronecker factors must be square, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let q = a.nrows();
    let r = b.nrows();
    let mut out = DMatrix::zeros(q * r, q * r);
    for i in 0..q {
        for j in 0..q {
            for k in 0..r {
                for l in 0..r {
                    out[(i * r + k, j * r + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    Ok(out)
}

/// Unbiased sample covariance (n−1 denominator) of the phenotype columns,
/// exactly symmetric by construction.
pub fn sample_covariance(y: &PhenotypeMatrix) -> Result<DMatrix<f64>> {
    let p = y.n_traits();
    let n = y.n_individuals();
    if n < 2 {
        return Err(Error::DimensionMismatch(format!(
            "sample covariance needs n >= 2 individuals, got {n}"
        )));
    }
    let means = y.trait_means();
    let mut cov = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let mut s = 0.0;
            for k in 0..n {
                s += (y.values[(i, k)] - means[i]) * (y.values[(j, k)] - means[j]);
            }
            let v = s / (n as f64 - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(cov)
}

/// Smallest Cholesky pivot below which the sample covariance is treated as
/// numerically singular and jittered.
const SINGULAR_PIVOT: f64 = 1e-10;

/// Resolves a data-free covariance spec at dimension p. Simulation and any
/// other caller without phenotypes in hand use this; the sample-covariance
/// mode is rejected because it needs data.
pub fn build_g_for_dimension(spec: &CovarianceSpec, p: usize) -> Result<GMatrix> {
    if matches!(spec, CovarianceSpec::SampleCovariance) {
        return Err(Error::InvalidArgument(
            "the sample-covariance mode needs phenotype data; pass an explicit, \
             Kronecker, or adjacency specification"
                .into(),
        ));
    }
    let placeholder = PhenotypeMatrix::new(
        DMatrix::zeros(p, 2),
        (0..p).map(|j| format!("qt_{}", j + 1)).collect(),
    )?;
    build_g(spec, &placeholder)
}

/// Resolves a covariance spec against the phenotypes and returns the
/// validated, factored GMatrix. Deterministic: identical inputs produce
/// bit-identical output.
pub fn build_g(spec: &CovarianceSpec, y: &PhenotypeMatrix) -> Result<GMatrix> {
    let p = y.n_traits();
    match spec {
        CovarianceSpec::SampleCovariance => {
            let n = y.n_individuals();
            if n <= p {
                log::warn!(
                    "sample covariance from n = {n} individuals for p = {p} traits; \
                     expect a singular or noisy estimate"
                );
            }
            let mut cov = sample_covariance(y)?;
            let near_singular = match linalg::cholesky_lower_with_pivot(&cov) {
                Ok((_, min_pivot, _)) => min_pivot < SINGULAR_PIVOT,
                Err(_) => true,
            };
            if near_singular {
                let jitter = 1e-8 * cov.trace() / p as f64;
                log::warn!(
                    "sample covariance is numerically singular; adding diagonal jitter {jitter:e}"
                );
                for i in 0..p {
                    cov[(i, i)] += jitter;
                }
            }
            GMatrix::from_matrix(cov)
        }
        CovarianceSpec::Explicit { matrix } => {
            if matrix.nrows() != p || matrix.ncols() != p {
                return Err(Error::DimensionMismatch(format!(
                    "explicit dependency matrix is {}x{} but p = {p}",
                    matrix.nrows(),
                    matrix.ncols()
                )));
            }
            GMatrix::from_matrix(matrix.clone())
        }
        CovarianceSpec::Kronecker { a, b } => {
            for (name, m) in [("A", a), ("B", b)] {
                if linalg::max_asymmetry(m) >= 1e-10 {
                    return Err(Error::InvalidArgument(format!(
                        "Kronecker factor {name} is not symmetric"
                    )));
                }
            }
            let g = kronecker(a, b)?;
            if g.nrows() != p {
                return Err(Error::DimensionMismatch(format!(
                    "Kronecker product is {}x{} (q = {}, r = {}) but p = {p}",
                    g.nrows(),
                    g.ncols(),
                    a.nrows(),
                    b.nrows()
                )));
            }
            GMatrix::from_matrix(g)
        }
        CovarianceSpec::AdjacencyRidge { adjacency, rho } => {
            if adjacency.nrows() != p || adjacency.ncols() != p {
                return Err(Error::DimensionMismatch(format!(
                    "adjacency matrix is {}x{} but p = {p}",
                    adjacency.nrows(),
                    adjacency.ncols()
                )));
            }
            if !rho.is_finite() {
                return Err(Error::InvalidArgument("rho must be finite".into()));
            }
            for i in 0..p {
                for j in 0..p {
                    let v = adjacency[(i, j)];
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::InvalidArgument(format!(
                            "adjacency entry ({i}, {j}) = {v}; entries must be 0 or 1"
                        )));
                    }
                    if adjacency[(i, j)] != adjacency[(j, i)] {
                        return Err(Error::InvalidArgument(format!(
                            "adjacency matrix is asymmetric at ({i}, {j})"
                        )));
                    }
                }
                if adjacency[(i, i)] != 1.0 {
                    return Err(Error::InvalidArgument(format!(
                        "adjacency diagonal entry ({i}, {i}) must be 1"
                    )));
                }
            }
            let mut g = adjacency.clone();
            for i in 0..p {
                g[(i, i)] += rho;
            }
            GMatrix::from_matrix(g)
        }
    }
}
