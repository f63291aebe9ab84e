use serde::{Deserialize, Serialize};

use super::{Estimator, MIEstimate};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    /// Silverman's rule, applied per dimension.
    Silverman,
    /// Same bandwidth on every dimension.
    Fixed(f64),
}

/// `h_j = sigma_j * (4 / (N (d + 2)))^(1 / (d + 4))` with the unbiased sample
/// standard deviation `sigma_j`.
pub fn silverman_bandwidths(samples: &Tensor) -> Result<Vec<f64>> {
    let n = samples.rows();
    let d = samples.cols();
    if n < 2 {
        return Err(Error::invalid(
            "Silverman bandwidth needs at least 2 samples",
        ));
    }
    let factor = (4.0 / (n as f64 * (d as f64 + 2.0))).powf(1.0 / (d as f64 + 4.0));
    (0..d)
        .map(|j| {
            let mean = samples.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64;
            let var = samples.iter_rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            if !(var > 0.0) {
                return Err(Error::invalid(format!(
                    "dimension {j} has zero variance; Silverman's rule is undefined, use a fixed bandwidth"
                )));
            }
            Ok(var.sqrt() * factor)
        })
        .collect()
}

/// Resubstitution entropy `-(1/N) sum_n log p(x_n)` under a Gaussian product
/// kernel density estimate (each point's own kernel included).
pub fn kde_entropy(samples: &Tensor, bandwidth: Bandwidth) -> Result<MIEstimate> {
    let n = samples.rows();
    let d = samples.cols();
    if n < 2 {
        return Err(Error::invalid(format!("KDE entropy needs N >= 2, got {n}")));
    }
    let h = match bandwidth {
        Bandwidth::Silverman => silverman_bandwidths(samples)?,
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => vec![h; d],
        Bandwidth::Fixed(h) => {
            return Err(Error::invalid(format!("bandwidth must be > 0, got {h}")))
        }
    };
    let scaled: Vec<f64> = samples
        .iter_rows()
        .flat_map(|r| r.iter().zip(&h).map(|(v, hj)| v / hj).collect::<Vec<_>>())
        .collect();
    let log_norm = -(n as f64).ln()
        - 0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln()
        - h.iter().map(|v| v.ln()).sum::<f64>();
    let mut total = 0.0;
    for i in 0..n {
        let zi = &scaled[i * d..(i + 1) * d];
        let mut s = 0.0;
        for j in 0..n {
            let zj = &scaled[j * d..(j + 1) * d];
            let q: f64 = zi.iter().zip(zj).map(|(a, b)| (a - b) * (a - b)).sum();
            s += (-0.5 * q).exp();
        }
        // s >= 1 from the self term.
        total += s.ln() + log_norm;
    }
    let value = -total / n as f64;
    let est = MIEstimate::new(value, Estimator::Kde).param("n", n);
    Ok(match bandwidth {
        Bandwidth::Silverman => est.param("bandwidth", "silverman"),
        Bandwidth::Fixed(v) => est.param("bandwidth", v),
    })
}

/// `H(A) + H(B) - H(A, B)` from three KDE entropies.
pub fn kde_mi(a: &Tensor, b: &Tensor, bandwidth: Bandwidth) -> Result<MIEstimate> {
    if a.rows() != b.rows() {
        return Err(Error::dim(format!("{} vs {} samples", a.rows(), b.rows())));
    }
    let ab = a.hstack(b)?;
    let mi = kde_entropy(a, bandwidth)?.value_nats + kde_entropy(b, bandwidth)?.value_nats
        - kde_entropy(&ab, bandwidth)?.value_nats;
    let est = MIEstimate::new(mi, Estimator::Kde).param("route", "h(a)+h(b)-h(ab)");
    Ok(match bandwidth {
        Bandwidth::Silverman => est.param("bandwidth", "silverman"),
        Bandwidth::Fixed(v) => est.param("bandwidth", v),
    })
}
