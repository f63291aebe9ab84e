//! Layer conductance: per-neuron attributions `C_l = J_l(x) x`, either at the
//! input point (gradient form) or averaged along a straight path from a
//! baseline (integrated-gradients form).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{layer_name, Network};
use crate::tensor::Tensor;

pub const DEFAULT_IG_STEPS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConductanceMethod {
    Gradient,
    Integrated,
}

impl FromStr for ConductanceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient" => Ok(Self::Gradient),
            "integrated" => Ok(Self::Integrated),
            other => Err(Error::invalid(format!(
                "unknown conductance method `{other}` (expected gradient|integrated)"
            ))),
        }
    }
}

impl fmt::Display for ConductanceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gradient => "gradient",
            Self::Integrated => "integrated",
        })
    }
}

/// Quadrature rule for the path integral over `alpha in [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IgRule {
    /// `alpha_k = (k + 0.5) / m`
    Midpoint,
    /// `alpha_k = k / m`
    Left,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IgConfig {
    pub baseline: Vec<f64>,
    pub steps: usize,
    pub rule: IgRule,
}

impl IgConfig {
    /// Zero baseline, 128 midpoint steps.
    pub fn zero(input_dim: usize) -> Self {
        Self {
            baseline: vec![0.0; input_dim],
            steps: DEFAULT_IG_STEPS,
            rule: IgRule::Midpoint,
        }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid(
                "integrated gradients needs at least one step",
            ));
        }
        if self.baseline.len() != input_dim {
            return Err(Error::dim(format!(
                "baseline has length {}, network input is {input_dim}",
                self.baseline.len()
            )));
        }
        if self.baseline.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("baseline contains non-finite values"));
        }
        Ok(())
    }

    fn alpha(&self, k: usize) -> f64 {
        let m = self.steps as f64;
        match self.rule {
            IgRule::Midpoint => (k as f64 + 0.5) / m,
            IgRule::Left => k as f64 / m,
        }
    }
}

/// Conductance of one layer over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductanceRecord {
    pub layer_index: usize,
    pub layer_name: String,
    pub method: ConductanceMethod,
    /// `[N, d_l]`
    pub values: Tensor,
    pub config: Option<IgConfig>,
}

/// `J_l(x) x`: component `j` is `sum_i dT_{l,j}/dx_i * x_i`.
pub fn gradient_conductance(net: &Network, layer: usize, x: &[f64]) -> Result<Vec<f64>> {
    net.jvp(layer, x, x)
}

/// Riemann approximation of `int_0^1 J_l(x' + a (x - x')) (x - x') da`.
pub fn integrated_gradients_conductance(
    net: &Network,
    layer: usize,
    x: &[f64],
    cfg: &IgConfig,
) -> Result<Vec<f64>> {
    cfg.validate(net.input_dim())?;
    // Validates layer and x.
    let mut acc = vec![0.0; net.layer_output(layer, x)?.len()];
    let delta: Vec<f64> = x.iter().zip(&cfg.baseline).map(|(a, b)| a - b).collect();
    let mut point = vec![0.0; x.len()];
    for k in 0..cfg.steps {
        let alpha = cfg.alpha(k);
        for ((p, b), d) in point.iter_mut().zip(&cfg.baseline).zip(&delta) {
            *p = b + alpha * d;
        }
        for (a, g) in acc.iter_mut().zip(net.jvp_unchecked(layer, &point, &delta)) {
            *a += g;
        }
    }
    let m = cfg.steps as f64;
    Ok(acc.into_iter().map(|a| a / m).collect())
}

/// Largest per-neuron deviation of the integrated attribution from
/// `T_l(x) - T_l(x')`.
pub fn completeness_gap(net: &Network, layer: usize, x: &[f64], cfg: &IgConfig) -> Result<f64> {
    let ig = integrated_gradients_conductance(net, layer, x, cfg)?;
    let tx = net.layer_output(layer, x)?;
    let tb = net.layer_output(layer, &cfg.baseline)?;
    Ok(ig
        .iter()
        .zip(tx.iter().zip(&tb))
        .map(|(g, (a, b))| (g - (a - b)).abs())
        .fold(0.0, f64::max))
}

/// Conductance of `layer` for every row of `x`, in row order.
pub fn batch_conductance(
    net: &Network,
    layer: usize,
    x: &Tensor,
    method: ConductanceMethod,
    cfg: Option<&IgConfig>,
) -> Result<ConductanceRecord> {
    x.expect_matrix("input batch")?;
    let config = match (method, cfg) {
        (ConductanceMethod::Gradient, None) => None,
        (ConductanceMethod::Gradient, Some(_)) => {
            return Err(Error::invalid(
                "gradient conductance takes no integration config",
            ))
        }
        (ConductanceMethod::Integrated, Some(c)) => Some(c.clone()),
        (ConductanceMethod::Integrated, None) => {
            return Err(Error::invalid(
                "integrated conductance requires an integration config",
            ))
        }
    };
    let mut data = Vec::with_capacity(x.rows() * net.layer_dim(layer.min(net.depth())));
    for row in x.iter_rows() {
        let c = match &config {
            None => gradient_conductance(net, layer, row)?,
            Some(c) => integrated_gradients_conductance(net, layer, row, c)?,
        };
        data.extend(c);
    }
    Ok(ConductanceRecord {
        layer_index: layer,
        layer_name: layer_name(layer),
        method,
        values: Tensor::matrix(x.rows(), net.layer_dim(layer), data)?,
        config,
    })
}

/// One record per layer `1..=L`.
pub fn conductance_all_layers(
    net: &Network,
    x: &Tensor,
    method: ConductanceMethod,
    cfg: Option<&IgConfig>,
) -> Result<Vec<ConductanceRecord>> {
    (1..=net.depth())
        .map(|l| batch_conductance(net, l, x, method, cfg))
        .collect()
}
