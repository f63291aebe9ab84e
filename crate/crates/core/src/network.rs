//! Dense feed-forward networks with forward-mode differentiation.
//!
//! A network maps `T_0 = x` through `T_l = act_l(W_l T_{l-1} + b_l)` for
//! `l = 1..=L`. Tangents are pushed through the same chain, so `jvp` returns
//! `J_l(x) v` with `J_l = dT_l/dx` exactly (up to rounding).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded_rng, uniform};
use crate::tensor::{dot, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
    /// Only valid as the final activation.
    Softmax,
}

impl Activation {
    pub fn is_smooth(self) -> bool {
        !matches!(self, Activation::Relu)
    }

    fn apply(self, z: &[f64]) -> Vec<f64> {
        match self {
            Activation::Identity => z.to_vec(),
            Activation::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
            Activation::Tanh => z.iter().map(|v| v.tanh()).collect(),
            Activation::Sigmoid => z.iter().map(|&v| sigmoid(v)).collect(),
            Activation::Softmax => softmax(z),
        }
    }

    /// Pushes a pre-activation tangent `dz` through the activation, given the
    /// pre-activation `z` and the already computed output `a`.
    fn tangent(self, z: &[f64], a: &[f64], dz: &[f64]) -> Vec<f64> {
        match self {
            Activation::Identity => dz.to_vec(),
            // Derivative at exactly 0 is taken as 0.
            Activation::Relu => z
                .iter()
                .zip(dz)
                .map(|(&zi, &t)| if zi > 0.0 { t } else { 0.0 })
                .collect(),
            Activation::Tanh => a
                .iter()
                .zip(dz)
                .map(|(ai, t)| (1.0 - ai * ai) * t)
                .collect(),
            Activation::Sigmoid => a
                .iter()
                .zip(dz)
                .map(|(ai, t)| ai * (1.0 - ai) * t)
                .collect(),
            // (diag(p) - p p^T) dz
            Activation::Softmax => {
                let pt = dot(a, dz);
                a.iter().zip(dz).map(|(p, t)| p * (t - pt)).collect()
            }
        }
    }

    /// Multiplies an upstream gradient by the activation Jacobian (transposed);
    /// all supported Jacobians are symmetric.
    pub(crate) fn backward(self, z: &[f64], a: &[f64], grad: &[f64]) -> Vec<f64> {
        self.tangent(z, a, grad)
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// `[d_0, d_1, .., d_L]`
    pub layer_dims: Vec<usize>,
    /// One activation per weight layer.
    pub activations: Vec<Activation>,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn new(layer_dims: Vec<usize>, activations: Vec<Activation>, seed: u64) -> Result<Self> {
        let spec = Self {
            layer_dims,
            activations,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Same activation on every layer.
    pub fn uniform(layer_dims: Vec<usize>, activation: Activation, seed: u64) -> Result<Self> {
        let n = layer_dims.len().saturating_sub(1);
        Self::new(layer_dims, vec![activation; n], seed)
    }

    pub fn depth(&self) -> usize {
        self.activations.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::invalid("a network needs at least one weight layer"));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if self.activations.len() != self.layer_dims.len() - 1 {
            return Err(Error::invalid(format!(
                "{} activations for {} weight layers",
                self.activations.len(),
                self.layer_dims.len() - 1
            )));
        }
        let last = self.activations.len() - 1;
        if let Some(pos) = self.activations[..last]
            .iter()
            .position(|a| *a == Activation::Softmax)
        {
            return Err(Error::invalid(format!(
                "softmax is only allowed as the final activation (found at layer {})",
                pos + 1
            )));
        }
        Ok(())
    }
}

/// Post-activation values of one layer over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    /// 1-based; 0 is reserved for the network input.
    pub layer_index: usize,
    pub layer_name: String,
    /// `[N, d_l]`
    pub activations: Tensor,
}

/// Conventional name of a dense layer.
pub fn layer_name(index: usize) -> String {
    format!("fc{index}")
}

/// Immutable feed-forward network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork")]
pub struct Network {
    spec: NetworkSpec,
    /// `weights[l]` is `[d_{l+1}, d_l]`.
    pub(crate) weights: Vec<Tensor>,
    pub(crate) biases: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawNetwork {
    spec: NetworkSpec,
    weights: Vec<Tensor>,
    biases: Vec<Vec<f64>>,
}

impl TryFrom<RawNetwork> for Network {
    type Error = Error;

    fn try_from(raw: RawNetwork) -> Result<Self> {
        Network::from_parts(raw.spec, raw.weights, raw.biases)
    }
}

impl Network {
    /// Weights uniform in `[-1/sqrt(d_in), 1/sqrt(d_in))`, biases zero, drawn
    /// from ChaCha8 seeded with `spec.seed`, layer by layer, row-major.
    pub fn init(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = seeded_rng(spec.seed);
        let mut weights = Vec::with_capacity(spec.depth());
        let mut biases = Vec::with_capacity(spec.depth());
        for w in spec.layer_dims.windows(2) {
            let (d_in, d_out) = (w[0], w[1]);
            let bound = 1.0 / (d_in as f64).sqrt();
            let data = (0..d_in * d_out)
                .map(|_| uniform(&mut rng, -bound, bound))
                .collect();
            weights.push(Tensor::matrix(d_out, d_in, data)?);
            biases.push(vec![0.0; d_out]);
        }
        Ok(Self {
            spec,
            weights,
            biases,
        })
    }

    /// Like [`Network::init`] but with biases also drawn from the init range.
    pub fn init_with_biases(spec: NetworkSpec) -> Result<Self> {
        let mut net = Self::init(spec)?;
        let mut rng = seeded_rng(crate::rng::derive_seed(net.spec.seed, 1));
        for (b, w) in net.biases.iter_mut().zip(&net.weights) {
            let bound = 1.0 / (w.cols() as f64).sqrt();
            for v in b.iter_mut() {
                *v = uniform(&mut rng, -bound, bound);
            }
        }
        Ok(net)
    }

    pub fn from_parts(
        spec: NetworkSpec,
        weights: Vec<Tensor>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        spec.validate()?;
        if weights.len() != spec.depth() || biases.len() != spec.depth() {
            return Err(Error::dim(format!(
                "expected {} weight/bias pairs, got {}/{}",
                spec.depth(),
                weights.len(),
                biases.len()
            )));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            let (d_in, d_out) = (spec.layer_dims[l], spec.layer_dims[l + 1]);
            if w.shape() != [d_out, d_in] {
                return Err(Error::dim(format!(
                    "layer {}: weight shape {:?}, expected [{d_out}, {d_in}]",
                    l + 1,
                    w.shape()
                )));
            }
            if b.len() != d_out {
                return Err(Error::dim(format!(
                    "layer {}: bias length {}, expected {d_out}",
                    l + 1,
                    b.len()
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("layer {}: non-finite bias", l + 1)));
            }
        }
        Ok(Self {
            spec,
            weights,
            biases,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn depth(&self) -> usize {
        self.spec.depth()
    }

    pub fn input_dim(&self) -> usize {
        self.spec.layer_dims[0]
    }

    pub fn layer_dim(&self, layer: usize) -> usize {
        self.spec.layer_dims[layer]
    }

    pub fn weights(&self, layer: usize) -> &Tensor {
        &self.weights[layer - 1]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer - 1]
    }

    pub fn has_zero_biases(&self) -> bool {
        self.biases.iter().flatten().all(|&b| b == 0.0)
    }

    fn check_layer(&self, layer: usize) -> Result<()> {
        if layer == 0 || layer > self.depth() {
            return Err(Error::Index {
                index: layer,
                max: self.depth(),
            });
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64], what: &str) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::dim(format!(
                "{what} has length {}, network input is {}",
                x.len(),
                self.input_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("{what} contains non-finite values")));
        }
        Ok(())
    }

    fn affine(&self, l: usize, input: &[f64]) -> Vec<f64> {
        let w = &self.weights[l];
        self.biases[l]
            .iter()
            .enumerate()
            .map(|(j, b)| dot(w.row(j), input) + b)
            .collect()
    }

    fn linear(&self, l: usize, tangent: &[f64]) -> Vec<f64> {
        let w = &self.weights[l];
        (0..w.rows()).map(|j| dot(w.row(j), tangent)).collect()
    }

    /// Pre- and post-activations of layers `1..=upto` for one sample.
    pub(crate) fn forward_full(&self, x: &[f64], upto: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut pre = Vec::with_capacity(upto);
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(upto);
        for l in 0..upto {
            let input = if l == 0 { x } else { &post[l - 1] };
            let z = self.affine(l, input);
            let a = self.spec.activations[l].apply(&z);
            pre.push(z);
            post.push(a);
        }
        (pre, post)
    }

    /// Activations `T_layer(x)` for one sample.
    pub fn layer_output(&self, layer: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_layer(layer)?;
        self.check_input(x, "input")?;
        let (_, mut post) = self.forward_full(x, layer);
        Ok(post.pop().expect("layer >= 1"))
    }

    /// Pre-activations of every layer for one sample.
    pub fn preactivations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(x, "input")?;
        Ok(self.forward_full(x, self.depth()).0)
    }

    /// Smallest `|z|` over all ReLU pre-activations, `None` without ReLU layers.
    pub fn min_relu_margin(&self, x: &[f64]) -> Result<Option<f64>> {
        let pre = self.preactivations(x)?;
        Ok(pre
            .iter()
            .zip(&self.spec.activations)
            .filter(|(_, a)| **a == Activation::Relu)
            .flat_map(|(z, _)| z.iter().map(|v| v.abs()))
            .reduce(f64::min))
    }

    /// Runs the batch `x: [N, d_0]` and returns one trace per layer; the last
    /// trace is the network output.
    pub fn forward_collect(&self, x: &Tensor) -> Result<Vec<LayerTrace>> {
        x.expect_matrix("input batch")?;
        if x.cols() != self.input_dim() {
            return Err(Error::dim(format!(
                "input batch has {} columns, network input is {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let n = x.rows();
        let depth = self.depth();
        let mut buffers: Vec<Vec<f64>> = (1..=depth)
            .map(|l| Vec::with_capacity(n * self.layer_dim(l)))
            .collect();
        for row in x.iter_rows() {
            let (_, post) = self.forward_full(row, depth);
            for (buf, a) in buffers.iter_mut().zip(post) {
                buf.extend(a);
            }
        }
        buffers
            .into_iter()
            .enumerate()
            .map(|(l, data)| {
                let d = self.layer_dim(l + 1);
                Ok(LayerTrace {
                    layer_index: l + 1,
                    layer_name: layer_name(l + 1),
                    activations: Tensor::matrix(n, d, data)?,
                })
            })
            .collect()
    }

    /// Directional derivative `J_layer(x) v` by forward-mode tangent propagation.
    pub fn jvp(&self, layer: usize, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_layer(layer)?;
        self.check_input(x, "input")?;
        self.check_input(v, "tangent")?;
        Ok(self.jvp_unchecked(layer, x, v))
    }

    pub(crate) fn jvp_unchecked(&self, layer: usize, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let mut t = v.to_vec();
        for l in 0..layer {
            let act = self.spec.activations[l];
            let z = self.affine(l, &a);
            let dz = self.linear(l, &t);
            let a_next = act.apply(&z);
            t = act.tangent(&z, &a_next, &dz);
            a = a_next;
        }
        t
    }

    /// One-layer JVP: `(dT_layer/dT_{layer-1}) tangent` evaluated at the
    /// previous-layer value `input`.
    pub fn layer_jvp(&self, layer: usize, input: &[f64], tangent: &[f64]) -> Result<Vec<f64>> {
        self.check_layer(layer)?;
        let d_in = self.layer_dim(layer - 1);
        if input.len() != d_in || tangent.len() != d_in {
            return Err(Error::dim(format!(
                "layer {layer} expects inputs of length {d_in}"
            )));
        }
        let l = layer - 1;
        let act = self.spec.activations[l];
        let z = self.affine(l, input);
        let a = act.apply(&z);
        Ok(act.tangent(&z, &a, &self.linear(l, tangent)))
    }

    /// Full Jacobian `dT_layer/dx` as a `[d_layer, d_0]` matrix, built from
    /// `d_0` JVP sweeps over the standard basis (cost: `d_0` forward passes).
    pub fn jacobian(&self, layer: usize, x: &[f64]) -> Result<Tensor> {
        self.check_layer(layer)?;
        self.check_input(x, "input")?;
        let d0 = self.input_dim();
        let dl = self.layer_dim(layer);
        let mut out = vec![0.0; dl * d0];
        let mut e = vec![0.0; d0];
        for i in 0..d0 {
            e[i] = 1.0;
            let col = self.jvp_unchecked(layer, x, &e);
            e[i] = 0.0;
            for (j, c) in col.into_iter().enumerate() {
                out[j * d0 + i] = c;
            }
        }
        Tensor::matrix(dl, d0, out)
    }

    /// Central-difference Jacobian, the reference for [`Network::jacobian`].
    pub fn finite_diff_jacobian(&self, layer: usize, x: &[f64], h: f64) -> Result<Tensor> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid(format!(
                "finite-difference step must be > 0, got {h}"
            )));
        }
        self.check_layer(layer)?;
        self.check_input(x, "input")?;
        let d0 = self.input_dim();
        let dl = self.layer_dim(layer);
        let mut out = vec![0.0; dl * d0];
        let mut xp = x.to_vec();
        for i in 0..d0 {
            xp[i] = x[i] + h;
            let fp = self.forward_full(&xp, layer).1.pop().expect("layer >= 1");
            xp[i] = x[i] - h;
            let fm = self.forward_full(&xp, layer).1.pop().expect("layer >= 1");
            xp[i] = x[i];
            for j in 0..dl {
                out[j * d0 + i] = (fp[j] - fm[j]) / (2.0 * h);
            }
        }
        Tensor::matrix(dl, d0, out)
    }
}
