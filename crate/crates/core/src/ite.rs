//! Information Transformation Efficiency: per-layer compression,
//! preservation and usefulness, and their weighted combination.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    binned_mi, discrete_entropy, label_entropy, mi_with_labels, quantize, BinningConfig,
    LabelEntropyMode, LabelSet, DEFAULT_LABEL_K,
};
use crate::network::LayerTrace;
use crate::tensor::Tensor;

const SATURATION_EPS: f64 = 1e-9;

/// Why a component took a fallback value instead of its formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentFlag {
    /// Zero reference entropy; the ratio is undefined.
    DegenerateLayer,
    /// No label information left to gain.
    Saturated,
    /// Last layer: no successor to preserve information into.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub value: f64,
    pub flag: Option<ComponentFlag>,
}

impl Component {
    fn plain(value: f64) -> Self {
        Self { value, flag: None }
    }

    fn flagged(value: f64, flag: ComponentFlag) -> Self {
        Self {
            value,
            flag: Some(flag),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ITEConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub binning: BinningConfig,
    pub label_mode: LabelEntropyMode,
    /// Neighbors for the label posterior behind `I(T; Y)`.
    pub k: usize,
}

impl Default for ITEConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0 / 3.0,
            beta: 1.0 / 3.0,
            gamma: 1.0 / 3.0,
            binning: BinningConfig::default(),
            label_mode: LabelEntropyMode::UniformLogK,
            k: DEFAULT_LABEL_K,
        }
    }
}

impl ITEConfig {
    pub fn with_weights(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} must be a finite weight >= 0, got {w}"
                )));
            }
        }
        if !(self.alpha + self.beta + self.gamma > 0.0) {
            return Err(Error::invalid(
                "at least one of alpha, beta, gamma must be positive",
            ));
        }
        self.binning.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ITERow {
    pub layer_index: usize,
    pub compression: f64,
    pub preservation: f64,
    pub usefulness: f64,
    pub efficiency: f64,
    /// Binned activation entropy `H_l`.
    pub entropy_nats: f64,
    pub flags: Vec<ComponentFlag>,
}

/// `max(0, (H_prev - H_cur) / H_prev)`, capped at 1.
pub fn compression(h_prev: f64, h_cur: f64) -> Component {
    if !(h_prev > 0.0) {
        return Component::flagged(0.0, ComponentFlag::DegenerateLayer);
    }
    Component::plain(((h_prev - h_cur) / h_prev).clamp(0.0, 1.0))
}

/// `I(T_l; T_next) / min(H_l, H_next)` over a shared quantization, clamped to
/// `[0, 1]`. Two constant layers count as fully preserved.
pub fn preservation(t_l: &Tensor, t_next: &Tensor, cfg: &BinningConfig) -> Result<Component> {
    if t_l.rows() != t_next.rows() {
        return Err(Error::dim(format!(
            "{} vs {} samples",
            t_l.rows(),
            t_next.rows()
        )));
    }
    let sa = quantize(t_l, cfg)?;
    let sb = quantize(t_next, cfg)?;
    let ha = discrete_entropy(&sa)?.value_nats;
    let hb = discrete_entropy(&sb)?.value_nats;
    if ha == 0.0 && hb == 0.0 {
        return Ok(Component::flagged(1.0, ComponentFlag::DegenerateLayer));
    }
    let denom = ha.min(hb);
    if denom == 0.0 {
        return Ok(Component::flagged(0.0, ComponentFlag::DegenerateLayer));
    }
    let mi = binned_mi(t_l, t_next, cfg)?.value_nats;
    Ok(Component::plain((mi / denom).clamp(0.0, 1.0)))
}

/// `max(0, (I_cur - I_prev) / (H_Y - I_prev))`; 0 with a saturation flag once
/// the previous layer already holds (nearly) all label information.
pub fn usefulness(i_cur_y: f64, i_prev_y: f64, h_y: f64) -> Result<Component> {
    if !(h_y > 0.0) {
        return Err(Error::invalid(format!(
            "label entropy must be positive, got {h_y}"
        )));
    }
    let room = h_y - i_prev_y;
    if room <= SATURATION_EPS {
        return Ok(Component::flagged(0.0, ComponentFlag::Saturated));
    }
    Ok(Component::plain(((i_cur_y - i_prev_y) / room).max(0.0)))
}

/// Weighted sum with the weights normalized to sum to 1.
pub fn global_efficiency(c: f64, p: f64, u: f64, cfg: &ITEConfig) -> Result<f64> {
    cfg.validate()?;
    let total = cfg.alpha + cfg.beta + cfg.gamma;
    Ok((cfg.alpha * c + cfg.beta * p + cfg.gamma * u) / total)
}

/// ITE rows for every traced layer; layer 0 is the input batch `x`.
pub fn ite_profile(
    traces: &[LayerTrace],
    x: &Tensor,
    labels: &LabelSet,
    cfg: &ITEConfig,
) -> Result<Vec<ITERow>> {
    cfg.validate()?;
    if traces.is_empty() {
        return Err(Error::invalid("ITE profile needs at least one layer"));
    }
    let n = x.rows();
    if labels.len() != n {
        return Err(Error::dim(format!(
            "{n} samples vs {} labels",
            labels.len()
        )));
    }
    if let Some(t) = traces.iter().find(|t| t.activations.rows() != n) {
        return Err(Error::dim(format!(
            "layer {} has {} samples, input has {n}",
            t.layer_index,
            t.activations.rows()
        )));
    }
    let h_y = label_entropy(labels, cfg.label_mode)?;
    let entropy = |t: &Tensor| -> Result<f64> {
        Ok(discrete_entropy(&quantize(t, &cfg.binning)?)?.value_nats)
    };
    let label_mi = |t: &Tensor| -> Result<f64> {
        Ok(mi_with_labels(t, labels, cfg.k, cfg.label_mode)?.value_nats)
    };

    let mut h_prev = entropy(x)?;
    let mut i_prev = label_mi(x)?;
    let mut rows = Vec::with_capacity(traces.len());
    for (pos, trace) in traces.iter().enumerate() {
        let t = &trace.activations;
        let h_cur = entropy(t)?;
        let i_cur = label_mi(t)?;
        let c = compression(h_prev, h_cur);
        let p = match traces.get(pos + 1) {
            Some(next) => preservation(t, &next.activations, &cfg.binning)?,
            None => Component::flagged(1.0, ComponentFlag::Boundary),
        };
        let u = usefulness(i_cur, i_prev, h_y)?;
        let efficiency = global_efficiency(c.value, p.value, u.value, cfg)?;
        rows.push(ITERow {
            layer_index: trace.layer_index,
            compression: c.value,
            preservation: p.value,
            usefulness: u.value,
            efficiency,
            entropy_nats: h_cur,
            flags: [c.flag, p.flag, u.flag].into_iter().flatten().collect(),
        });
        h_prev = h_cur;
        i_prev = i_cur;
    }
    Ok(rows)
}
