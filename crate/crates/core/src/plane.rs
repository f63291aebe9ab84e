//! Information plane coordinates `(I(X;T), I(T;Y))` per layer, for either
//! activations or conductances, with bootstrap error bars.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conductance::ConductanceRecord;
use crate::error::{Error, Result};
use crate::estimators::{
    binned_entropy, binned_mi, empirical_covariance, gaussian_entropy, kde_mi, ksg_mi,
    mi_with_labels, Bandwidth, BinningConfig, LabelEntropyMode, LabelSet, DEFAULT_LABEL_K,
    DEFAULT_RIDGE,
};
use crate::network::LayerTrace;
use crate::rng::{derive_seed, seeded_rng};
use crate::tensor::Tensor;

pub const DEFAULT_BOOTSTRAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Activation,
    Conductance,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Activation => "activation",
            Basis::Conductance => "conductance",
        })
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "activation" => Ok(Basis::Activation),
            "conductance" => Ok(Basis::Conductance),
            other => Err(Error::invalid(format!("unknown basis `{other}`"))),
        }
    }
}

/// Estimator used for the `I(X; T)` coordinate. `I(T; Y)` always uses the
/// k-NN label posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaneEstimator {
    Binning,
    Ksg,
    Kde,
    /// Closed-form entropy of a Gaussian fitted to the representation.
    Gaussian,
}

impl FromStr for PlaneEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binning" => Ok(Self::Binning),
            "ksg" => Ok(Self::Ksg),
            "kde" => Ok(Self::Kde),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(Error::invalid(format!(
                "unknown estimator `{other}` (expected binning|ksg|kde|gaussian)"
            ))),
        }
    }
}

impl fmt::Display for PlaneEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Binning => "binning",
            Self::Ksg => "ksg",
            Self::Kde => "kde",
            Self::Gaussian => "gaussian",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneConfig {
    pub estimator: PlaneEstimator,
    pub binning: BinningConfig,
    /// Neighbors for KSG and for the label posterior.
    pub k: usize,
    pub label_mode: LabelEntropyMode,
    /// Bootstrap resamples; 0 disables error bars.
    pub bootstrap: usize,
    pub seed: u64,
    pub ridge: f64,
    pub bandwidth: Bandwidth,
}

impl Default for PlaneConfig {
    fn default() -> Self {
        Self {
            estimator: PlaneEstimator::Binning,
            binning: BinningConfig::default(),
            k: DEFAULT_LABEL_K,
            label_mode: LabelEntropyMode::UniformLogK,
            bootstrap: 0,
            seed: 0,
            ridge: DEFAULT_RIDGE,
            bandwidth: Bandwidth::Silverman,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneRow {
    pub layer_index: usize,
    pub layer_name: String,
    pub basis: Basis,
    pub i_x: f64,
    pub i_y: f64,
    pub std_i_x: f64,
    pub std_i_y: f64,
    pub estimator_params: BTreeMap<String, String>,
}

/// A per-layer sample matrix, borrowed from a trace or a conductance record.
#[derive(Debug, Clone, Copy)]
pub struct Representation<'a> {
    pub layer_index: usize,
    pub layer_name: &'a str,
    pub values: &'a Tensor,
}

impl<'a> From<&'a LayerTrace> for Representation<'a> {
    fn from(t: &'a LayerTrace) -> Self {
        Self {
            layer_index: t.layer_index,
            layer_name: &t.layer_name,
            values: &t.activations,
        }
    }
}

impl<'a> From<&'a ConductanceRecord> for Representation<'a> {
    fn from(r: &'a ConductanceRecord) -> Self {
        Self {
            layer_index: r.layer_index,
            layer_name: &r.layer_name,
            values: &r.values,
        }
    }
}

/// How `I(X; T)` is evaluated under binning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InputMode {
    /// Every input row is distinct, so `T` is a function of `X` and
    /// `I(X; T) = H(T)`.
    Deterministic,
    Joint,
}

fn clamp_nonneg(v: f64, params: &mut BTreeMap<String, String>, key: &str) -> f64 {
    if v < 0.0 {
        params.insert(format!("{key}_pre_clamp"), format!("{v:.6e}"));
        0.0
    } else {
        v
    }
}

struct Coordinates<'a> {
    x: Option<&'a Tensor>,
    labels: &'a LabelSet,
    cfg: &'a PlaneConfig,
    mode: InputMode,
}

impl Coordinates<'_> {
    fn i_x(&self, t: &Tensor, x: Option<&Tensor>) -> Result<f64> {
        let cfg = self.cfg;
        let need_x = || {
            x.ok_or_else(|| {
                Error::invalid(format!("estimator {} needs the input batch", cfg.estimator))
            })
        };
        Ok(match cfg.estimator {
            PlaneEstimator::Binning => match (self.mode, x) {
                (InputMode::Joint, Some(x)) => binned_mi(x, t, &cfg.binning)?.value_nats,
                _ => binned_entropy(t, &cfg.binning)?.value_nats,
            },
            PlaneEstimator::Ksg => ksg_mi(need_x()?, t, cfg.k)?.value_nats,
            PlaneEstimator::Kde => kde_mi(need_x()?, t, cfg.bandwidth)?.value_nats,
            PlaneEstimator::Gaussian => {
                gaussian_entropy(&empirical_covariance(t)?, cfg.ridge)?.value_nats
            }
        })
    }

    fn i_y(&self, t: &Tensor, labels: &LabelSet) -> Result<f64> {
        Ok(mi_with_labels(t, labels, self.cfg.k, self.cfg.label_mode)?.value_nats)
    }

    fn row(&self, basis: Basis, rep: &Representation<'_>) -> Result<PlaneRow> {
        let cfg = self.cfg;
        let t = rep.values;
        let mut params = BTreeMap::new();
        params.insert("estimator".into(), cfg.estimator.to_string());
        params.insert("bins".into(), cfg.binning.bins_per_dim.to_string());
        params.insert("k".into(), cfg.k.to_string());
        if cfg.estimator == PlaneEstimator::Binning {
            let mode = match (self.mode, self.x) {
                (InputMode::Joint, Some(_)) => "joint-mi",
                (_, Some(_)) => "deterministic-entropy",
                (_, None) => "entropy-no-input",
            };
            params.insert("ix_mode".into(), mode.into());
        }
        let i_x = clamp_nonneg(self.i_x(t, self.x)?, &mut params, "i_x");
        let i_y = self.i_y(t, self.labels)?;
        let (mut std_i_x, mut std_i_y) = (0.0, 0.0);
        if cfg.bootstrap > 0 {
            let n = t.rows();
            let seed = derive_seed(cfg.seed, rep.layer_index as u64);
            std_i_x = bootstrap_std(
                |idx| {
                    let xs = self.x.map(|x| x.select_rows(idx));
                    Ok(self.i_x(&t.select_rows(idx), xs.as_ref())?.max(0.0))
                },
                n,
                cfg.bootstrap,
                seed,
            )?;
            std_i_y = bootstrap_std(
                |idx| self.i_y(&t.select_rows(idx), &self.labels.select(idx)),
                n,
                cfg.bootstrap,
                seed,
            )?;
            params.insert("bootstrap".into(), cfg.bootstrap.to_string());
            params.insert("bootstrap_seed".into(), seed.to_string());
        }
        Ok(PlaneRow {
            layer_index: rep.layer_index,
            layer_name: rep.layer_name.to_string(),
            basis,
            i_x,
            i_y,
            std_i_x,
            std_i_y,
            estimator_params: params,
        })
    }
}

/// Plane rows for arbitrary per-layer representations. Without an input
/// batch, binning falls back to `H(T)` and the other estimators fail.
pub fn representation_plane(
    basis: Basis,
    layers: &[Representation<'_>],
    x: Option<&Tensor>,
    labels: &LabelSet,
    cfg: &PlaneConfig,
) -> Result<Vec<PlaneRow>> {
    cfg.binning.validate()?;
    let n = labels.len();
    if let Some(x) = x {
        if x.rows() != n {
            return Err(Error::dim(format!(
                "input has {} samples, labels {n}",
                x.rows()
            )));
        }
    }
    for rep in layers {
        if rep.values.rows() != n {
            return Err(Error::dim(format!(
                "layer {} has {} samples, labels {n}",
                rep.layer_index,
                rep.values.rows()
            )));
        }
    }
    if layers
        .windows(2)
        .any(|w| w[0].layer_index >= w[1].layer_index)
    {
        return Err(Error::invalid(
            "plane layers must have strictly increasing indices",
        ));
    }
    let mode = match x {
        Some(x) if !x.rows_unique() => InputMode::Joint,
        _ => InputMode::Deterministic,
    };
    let coords = Coordinates {
        x,
        labels,
        cfg,
        mode,
    };
    layers.iter().map(|rep| coords.row(basis, rep)).collect()
}

pub fn activation_plane(
    traces: &[LayerTrace],
    x: &Tensor,
    labels: &LabelSet,
    cfg: &PlaneConfig,
) -> Result<Vec<PlaneRow>> {
    let reps: Vec<Representation<'_>> = traces.iter().map(Into::into).collect();
    representation_plane(Basis::Activation, &reps, Some(x), labels, cfg)
}

pub fn conductance_plane(
    records: &[ConductanceRecord],
    x: &Tensor,
    labels: &LabelSet,
    cfg: &PlaneConfig,
) -> Result<Vec<PlaneRow>> {
    let reps: Vec<Representation<'_>> = records.iter().map(Into::into).collect();
    representation_plane(Basis::Conductance, &reps, Some(x), labels, cfg)
}

/// Population standard deviation of `statistic` over `resamples` bootstrap
/// draws of `n` indices with replacement. Resample `b` draws from its own
/// stream `derive_seed(seed, b)`.
pub fn bootstrap_std<F>(statistic: F, n: usize, resamples: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[usize]) -> Result<f64>,
{
    if resamples < 2 {
        return Err(Error::invalid(format!(
            "bootstrap needs at least 2 resamples, got {resamples}"
        )));
    }
    if n < 2 {
        return Err(Error::invalid(format!(
            "bootstrap needs at least 2 samples, got {n}"
        )));
    }
    let mut values = Vec::with_capacity(resamples);
    let mut idx = vec![0usize; n];
    for b in 0..resamples {
        let mut rng = seeded_rng(derive_seed(seed, b as u64));
        for i in idx.iter_mut() {
            *i = rng.random_range(0..n);
        }
        values.push(statistic(&idx)?);
    }
    let mean = values.iter().sum::<f64>() / resamples as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / resamples as f64;
    Ok(var.sqrt())
}

/// Information bottleneck Lagrangian `I(X;T) - beta I(T;Y)`.
pub fn ib_objective(i_x: f64, i_y: f64, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::invalid(format!("beta must be >= 0, got {beta}")));
    }
    Ok(i_x - beta * i_y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::BoxMuller;

    #[test]
    fn ib_examples() {
        assert_eq!(ib_objective(2.0, 1.0, 0.5).unwrap(), 1.5);
        assert_eq!(ib_objective(2.0, 1.0, 0.0).unwrap(), 2.0);
        assert_eq!(ib_objective(0.7, 0.7, 1.0).unwrap(), 0.0);
        assert!(ib_objective(1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn bootstrap_constant_and_deterministic() {
        assert_eq!(bootstrap_std(|_| Ok(3.0), 10, 5, 1).unwrap(), 0.0);
        let stat = |idx: &[usize]| Ok(idx.iter().sum::<usize>() as f64);
        assert_eq!(
            bootstrap_std(stat, 50, 10, 7).unwrap().to_bits(),
            bootstrap_std(stat, 50, 10, 7).unwrap().to_bits()
        );
        assert!(bootstrap_std(|_| Ok(0.0), 10, 1, 0).is_err());
        assert!(bootstrap_std(|_| Ok(0.0), 1, 5, 0).is_err());
    }

    #[test]
    fn bootstrap_mean_matches_clt() {
        let mut g = BoxMuller::new(21);
        let xs: Vec<f64> = (0..1000).map(|_| g.next_normal()).collect();
        let s = bootstrap_std(
            |idx| Ok(idx.iter().map(|&i| xs[i]).sum::<f64>() / idx.len() as f64),
            1000,
            200,
            5,
        )
        .unwrap();
        let expected = 1.0 / 1000f64.sqrt();
        assert!((s - expected).abs() <= 0.25 * expected, "bootstrap std {s}");
    }

    #[test]
    fn basis_and_estimator_parse() {
        assert_eq!("conductance".parse::<Basis>().unwrap(), Basis::Conductance);
        assert!("weights".parse::<Basis>().is_err());
        assert_eq!(
            "kde".parse::<PlaneEstimator>().unwrap(),
            PlaneEstimator::Kde
        );
        assert!("mine".parse::<PlaneEstimator>().is_err());
    }
}
