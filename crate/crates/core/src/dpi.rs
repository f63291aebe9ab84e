//! Data processing inequality diagnostics along the layer chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{binned_entropy, binned_mi_labels, BinningConfig, LabelSet};
use crate::plane::{Basis, PlaneRow};
use crate::tensor::Tensor;

pub const DEFAULT_DPI_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DpiAxis {
    /// `I(X; A_l)` chain.
    XSide,
    /// `I(A_l; Y)` chain.
    YSide,
}

/// Layer `k` carries more information than the earlier layer `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub l: usize,
    pub k: usize,
    pub delta_nats: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpiReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<Basis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<DpiAxis>,
    pub tolerance: f64,
    /// Value at layer 0, when the chain includes one.
    pub prefix: Option<f64>,
    /// Values at layers `1..=L`.
    pub values: Vec<f64>,
    /// Ordered by `(l, k)`; empty when the chain is non-increasing within tolerance.
    pub violations: Vec<Violation>,
}

impl DpiReport {
    pub fn labeled(mut self, basis: Basis, axis: DpiAxis) -> Self {
        self.basis = Some(basis);
        self.axis = Some(axis);
        self
    }

    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Reports every pair `l < k` with `value_k - value_l > tolerance`. `values[i]`
/// belongs to layer `i + 1`; the optional prefix is layer 0.
pub fn dpi_check(values: &[f64], prefix: Option<f64>, tolerance: f64) -> Result<DpiReport> {
    if values.is_empty() {
        return Err(Error::invalid("DPI check needs at least one layer value"));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::invalid(format!(
            "tolerance must be >= 0, got {tolerance}"
        )));
    }
    if values.iter().chain(prefix.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("DPI values must be finite"));
    }
    let chain: Vec<(usize, f64)> = prefix
        .map(|p| (0, p))
        .into_iter()
        .chain(values.iter().enumerate().map(|(i, &v)| (i + 1, v)))
        .collect();
    let mut violations = Vec::new();
    for (a, &(l, vl)) in chain.iter().enumerate() {
        for &(k, vk) in &chain[a + 1..] {
            let delta = vk - vl;
            if delta > tolerance {
                violations.push(Violation {
                    l,
                    k,
                    delta_nats: delta,
                });
            }
        }
    }
    Ok(DpiReport {
        basis: None,
        axis: None,
        tolerance,
        prefix,
        values: values.to_vec(),
        violations,
    })
}

/// Both chains for one set of plane rows. The x-side prefix is `H(X*)` and the
/// y-side prefix is the binned `I(X; Y)`; both are omitted without an input.
pub fn plane_dpi(
    rows: &[PlaneRow],
    x: Option<&Tensor>,
    labels: &LabelSet,
    binning: &BinningConfig,
    tolerance: f64,
) -> Result<Vec<DpiReport>> {
    let Some(first) = rows.first() else {
        return Err(Error::invalid("DPI check needs at least one plane row"));
    };
    let basis = first.basis;
    let (px, py) = match x {
        Some(x) => (
            Some(binned_entropy(x, binning)?.value_nats),
            Some(binned_mi_labels(x, labels, binning)?.value_nats),
        ),
        None => (None, None),
    };
    let xs: Vec<f64> = rows.iter().map(|r| r.i_x).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.i_y).collect();
    Ok(vec![
        dpi_check(&xs, px, tolerance)?.labeled(basis, DpiAxis::XSide),
        dpi_check(&ys, py, tolerance)?.labeled(basis, DpiAxis::YSide),
    ])
}
