use nalgebra::DMatrix;

use super::{Estimator, MIEstimate};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_RIDGE: f64 = 1e-9;

const SYMMETRY_TOL: f64 = 1e-10;

/// Mean and covariance of a multivariate normal input distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    /// `[d, d]`, symmetric positive semi-definite.
    pub covariance: Tensor,
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, covariance: Tensor) -> Result<Self> {
        let spec = Self { mean, covariance };
        spec.validate()?;
        Ok(spec)
    }

    pub fn standard(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d], Tensor::identity(d)?)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.mean.len();
        let (r, c) = self.covariance.expect_matrix("covariance")?;
        if r != d || c != d {
            return Err(Error::dim(format!(
                "covariance is [{r}, {c}] for a mean of length {d}"
            )));
        }
        for i in 0..d {
            for j in 0..i {
                if (self.covariance.get(i, j) - self.covariance.get(j, i)).abs() > SYMMETRY_TOL {
                    return Err(Error::invalid(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let eig = to_dmatrix(&self.covariance).symmetric_eigen();
        let scale = eig.eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if let Some(min) = eig.eigenvalues.iter().cloned().reduce(f64::min) {
            if min < -SYMMETRY_TOL * scale {
                return Err(Error::invalid(format!(
                    "covariance is not positive semi-definite (eigenvalue {min:e})"
                )));
            }
        }
        Ok(())
    }
}

fn to_dmatrix(t: &Tensor) -> DMatrix<f64> {
    DMatrix::from_row_slice(t.rows(), t.cols(), t.data())
}

/// `1/2 log((2 pi e)^d det(cov + ridge I))` via a Cholesky log-determinant.
pub fn gaussian_entropy(cov: &Tensor, ridge: f64) -> Result<MIEstimate> {
    let (d, c) = cov.expect_matrix("covariance")?;
    if d != c {
        return Err(Error::dim(format!(
            "covariance must be square, got [{d}, {c}]"
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::invalid(format!("ridge must be >= 0, got {ridge}")));
    }
    let mut m = to_dmatrix(cov);
    // Exact symmetrization; JSJ^T accumulates asymmetric rounding.
    m = (&m + m.transpose()) * 0.5;
    for i in 0..d {
        m[(i, i)] += ridge;
    }
    let scale = (0..d).map(|i| m[(i, i)]).fold(0.0, f64::max);
    let chol = m.cholesky().ok_or_else(|| {
        Error::Singular(format!(
            "covariance + {ridge:e} I is not positive definite (det <= 0); increase the ridge"
        ))
    })?;
    let l = chol.l_dirty();
    // Pivots below rounding level of the largest diagonal mean rank deficiency.
    let floor = 16.0 * d as f64 * f64::EPSILON * scale;
    let mut log_det = 0.0;
    for i in 0..d {
        let v = l[(i, i)];
        if !(v > 0.0 && v * v > floor) {
            return Err(Error::Singular(format!(
                "zero pivot in covariance + {ridge:e} I; increase the ridge"
            )));
        }
        log_det += 2.0 * v.ln();
    }
    let two_pi_e = 2.0 * std::f64::consts::PI * std::f64::consts::E;
    let h = 0.5 * (d as f64 * two_pi_e.ln() + log_det);
    Ok(MIEstimate::new(h, Estimator::GaussianClosedForm)
        .param("dim", d)
        .param("ridge", ridge))
}

/// Entropy of `C = J X` for `X ~ N(mu, Sigma)`: a Gaussian with covariance
/// `J Sigma J^T`. Since `C` is a deterministic function of `X`, the value is
/// also reported as `I(X; C)`.
pub fn gaussian_conductance_entropy(
    jacobian: &Tensor,
    spec: &GaussianSpec,
    ridge: f64,
) -> Result<MIEstimate> {
    let (_, d) = jacobian.expect_matrix("jacobian")?;
    if d != spec.dim() {
        return Err(Error::dim(format!(
            "jacobian has {d} columns, input distribution has dimension {}",
            spec.dim()
        )));
    }
    let cov = jacobian
        .matmul(&spec.covariance)?
        .matmul(&jacobian.transpose()?)?;
    gaussian_entropy(&cov, ridge)
}

/// Maximum-likelihood covariance (divides by N) of the rows of `samples`.
pub fn empirical_covariance(samples: &Tensor) -> Result<Tensor> {
    let n = samples.rows();
    let d = samples.cols();
    let mean: Vec<f64> = (0..d)
        .map(|j| samples.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![0.0; d * d];
    for r in samples.iter_rows() {
        for i in 0..d {
            let ci = r[i] - mean[i];
            for j in 0..=i {
                cov[i * d + j] += ci * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov[i * d + j] / n as f64;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    Tensor::matrix(d, d, cov)
}
