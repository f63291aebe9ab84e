//! Entropy and mutual-information estimators. All values are in nats.

mod discrete;
mod gaussian;
mod kde;
mod ksg;
mod labels;
mod neighbors;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use discrete::{
    binned_entropy, binned_mi, binned_mi_labels, discrete_entropy, discrete_mi, quantize,
    BinningConfig, RangeMode, DEFAULT_BINS,
};
pub use gaussian::{
    empirical_covariance, gaussian_conductance_entropy, gaussian_entropy, GaussianSpec,
    DEFAULT_RIDGE,
};
pub use kde::{kde_entropy, kde_mi, silverman_bandwidths, Bandwidth};
pub use ksg::{ksg_mi, KSG_JITTER_SCALE};
pub use labels::{
    conditional_label_entropy, label_entropy, mi_with_labels, LabelEntropyMode, LabelSet,
    DEFAULT_LABEL_K,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Binning,
    Kde,
    Ksg,
    GaussianClosedForm,
    DiscreteExact,
    /// k-NN label posterior used for `I(T;Y)`.
    LabelKnn,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Binning => "binning",
            Estimator::Kde => "kde",
            Estimator::Ksg => "ksg",
            Estimator::GaussianClosedForm => "gaussian-closed-form",
            Estimator::DiscreteExact => "discrete-exact",
            Estimator::LabelKnn => "label-knn",
        })
    }
}

/// An information quantity together with how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MIEstimate {
    pub value_nats: f64,
    pub estimator: Estimator,
    pub params: BTreeMap<String, String>,
    pub std_nats: Option<f64>,
}

impl MIEstimate {
    pub fn new(value_nats: f64, estimator: Estimator) -> Self {
        Self {
            value_nats,
            estimator,
            params: BTreeMap::new(),
            std_nats: None,
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn bits(&self) -> f64 {
        self.value_nats / std::f64::consts::LN_2
    }
}
