//! Seeded synthetic data, a small SGD trainer, and exact discrete Markov
//! chains for testing the DPI machinery.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::estimators::{GaussianSpec, LabelSet};
use crate::network::{Activation, Network};
use crate::rng::{seeded_rng, BoxMuller};
use crate::tensor::{dot, Tensor};

/// Lower-triangular `L` with `L L^T = cov`, allowing zero pivots so that
/// singular PSD covariances factor exactly.
fn psd_cholesky(cov: &Tensor) -> Result<Vec<f64>> {
    let d = cov.rows();
    let scale = (0..d).map(|i| cov.get(i, i).abs()).fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let s: f64 = (0..j).map(|p| l[j * d + p] * l[j * d + p]).sum();
        let pivot = cov.get(j, j) - s;
        if pivot < -tol * 1e3 {
            return Err(Error::invalid(format!(
                "covariance is not positive semi-definite (pivot {pivot:e})"
            )));
        }
        if pivot <= tol {
            continue;
        }
        let ljj = pivot.sqrt();
        l[j * d + j] = ljj;
        for i in j + 1..d {
            let s: f64 = (0..j).map(|p| l[i * d + p] * l[j * d + p]).sum();
            l[i * d + j] = (cov.get(i, j) - s) / ljj;
        }
    }
    Ok(l)
}

/// `n` draws of `mu + L z` with `z` standard normal (Box-Muller).
pub fn gen_gaussian(spec: &GaussianSpec, n: usize, seed: u64) -> Result<Tensor> {
    spec.validate()?;
    let d = spec.dim();
    let l = psd_cholesky(&spec.covariance)?;
    let mut g = BoxMuller::new(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut z = vec![0.0; d];
    for _ in 0..n {
        z.iter_mut().for_each(|v| *v = g.next_normal());
        for i in 0..d {
            data.push(spec.mean[i] + dot(&l[i * d..i * d + i + 1], &z[..i + 1]));
        }
    }
    Tensor::matrix(n, d, data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlobsSpec {
    pub classes: usize,
    pub per_class: usize,
    pub centers: Vec<[f64; 2]>,
    pub spread: f64,
    pub seed: u64,
}

impl BlobsSpec {
    /// `classes` centers evenly spaced on a circle of `radius`.
    pub fn on_circle(
        classes: usize,
        per_class: usize,
        radius: f64,
        spread: f64,
        seed: u64,
    ) -> Self {
        let centers = (0..classes)
            .map(|c| {
                let theta = 2.0 * std::f64::consts::PI * c as f64 / classes as f64;
                [radius * theta.cos(), radius * theta.sin()]
            })
            .collect();
        Self {
            classes,
            per_class,
            centers,
            spread,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid("blobs need at least 2 classes"));
        }
        if self.per_class == 0 {
            return Err(Error::invalid("blobs need at least one sample per class"));
        }
        if self.centers.len() != self.classes {
            return Err(Error::invalid(format!(
                "{} centers for {} classes",
                self.centers.len(),
                self.classes
            )));
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return Err(Error::invalid(format!(
                "spread must be > 0, got {}",
                self.spread
            )));
        }
        Ok(())
    }
}

/// Isotropic 2-d Gaussian blobs, class-major row order.
pub fn gen_blobs(spec: &BlobsSpec) -> Result<(Tensor, LabelSet)> {
    spec.validate()?;
    let mut g = BoxMuller::new(spec.seed);
    let mut data = Vec::with_capacity(spec.classes * spec.per_class * 2);
    let mut labels = Vec::with_capacity(spec.classes * spec.per_class);
    for (c, center) in spec.centers.iter().enumerate() {
        for _ in 0..spec.per_class {
            data.push(center[0] + spec.spread * g.next_normal());
            data.push(center[1] + spec.spread * g.next_normal());
            labels.push(c as u32);
        }
    }
    let n = labels.len();
    Ok((
        Tensor::matrix(n, 2, data)?,
        LabelSet::new(labels, spec.classes as u32)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(epochs: usize, learning_rate: f64, seed: u64) -> Self {
        Self {
            epochs,
            learning_rate,
            batch_size: 16,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    /// Mean cross-entropy over the training set after the last epoch.
    pub final_loss: f64,
    pub accuracy: f64,
}

fn check_classifier(net: &Network, x: &Tensor, labels: &LabelSet) -> Result<()> {
    if net.spec().activations.last() != Some(&Activation::Softmax) {
        return Err(Error::invalid("training requires a softmax output layer"));
    }
    if x.cols() != net.input_dim() {
        return Err(Error::dim(format!(
            "{} input columns, network input is {}",
            x.cols(),
            net.input_dim()
        )));
    }
    if x.rows() != labels.len() {
        return Err(Error::dim(format!(
            "{} samples vs {} labels",
            x.rows(),
            labels.len()
        )));
    }
    let out = net.layer_dim(net.depth());
    if labels.class_count() as usize > out {
        return Err(Error::invalid(format!(
            "{} classes exceed the {out} network outputs",
            labels.class_count()
        )));
    }
    Ok(())
}

/// Mean cross-entropy and accuracy of a softmax classifier.
pub fn evaluate(net: &Network, x: &Tensor, labels: &LabelSet) -> Result<(f64, f64)> {
    check_classifier(net, x, labels)?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (row, &y) in x.iter_rows().zip(labels.labels()) {
        let p = net.layer_output(net.depth(), row)?;
        loss -= p[y as usize].max(1e-300).ln();
        let argmax = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("non-empty output");
        correct += (argmax == y as usize) as usize;
    }
    let n = x.rows() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Mini-batch SGD on softmax cross-entropy with seeded per-epoch shuffling.
pub fn train_sgd(
    net: &Network,
    x: &Tensor,
    labels: &LabelSet,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    check_classifier(net, x, labels)?;
    if !(cfg.learning_rate >= 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::invalid(format!(
            "learning rate must be >= 0, got {}",
            cfg.learning_rate
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let mut net = net.clone();
    let depth = net.depth();
    let acts = net.spec().activations.clone();
    let mut rng = seeded_rng(cfg.seed);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut grad_w: Vec<Vec<f64>> = net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut grad_b: Vec<Vec<f64>> = net.biases.iter().map(|b| vec![0.0; b.len()]).collect();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad_w.iter_mut().flatten().for_each(|g| *g = 0.0);
            grad_b.iter_mut().flatten().for_each(|g| *g = 0.0);
            for &i in batch {
                let input = x.row(i);
                let (pre, post) = net.forward_full(input, depth);
                // Softmax + cross-entropy: dL/dz_L = p - onehot(y).
                let mut delta = post[depth - 1].clone();
                delta[labels.labels()[i] as usize] -= 1.0;
                for l in (0..depth).rev() {
                    let a_prev = if l == 0 { input } else { &post[l - 1] };
                    let cols = a_prev.len();
                    for (j, &dj) in delta.iter().enumerate() {
                        grad_b[l][j] += dj;
                        for (g, a) in grad_w[l][j * cols..(j + 1) * cols].iter_mut().zip(a_prev) {
                            *g += dj * a;
                        }
                    }
                    if l > 0 {
                        let w = &net.weights[l];
                        let mut back = vec![0.0; cols];
                        for (j, &dj) in delta.iter().enumerate() {
                            for (b, wj) in back.iter_mut().zip(w.row(j)) {
                                *b += wj * dj;
                            }
                        }
                        delta = acts[l - 1].backward(&pre[l - 1], &post[l - 1], &back);
                    }
                }
            }
            let step = cfg.learning_rate / batch.len() as f64;
            for l in 0..depth {
                let (shape, mut data) = (
                    net.weights[l].shape().to_vec(),
                    net.weights[l].data().to_vec(),
                );
                for (w, g) in data.iter_mut().zip(&grad_w[l]) {
                    *w -= step * g;
                }
                net.weights[l] = Tensor::new(shape, data).map_err(|_| {
                    Error::invalid(
                        "training diverged (non-finite weights); lower the learning rate",
                    )
                })?;
                for (b, g) in net.biases[l].iter_mut().zip(&grad_b[l]) {
                    *b -= step * g;
                }
            }
        }
    }
    let (final_loss, accuracy) = evaluate(&net, x, labels)?;
    Ok(TrainOutcome {
        network: net,
        final_loss,
        accuracy,
    })
}

/// Exact joint law of `Y <- X -> A_1 -> ... -> A_L`: an input distribution, a
/// label kernel `p(y | x)` and one row-stochastic kernel per stage.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChainCase {
    pub input_dist: Vec<f64>,
    /// `[|X|][|Y|]`
    pub label_kernel: Vec<Vec<f64>>,
    /// Stage `l` maps `A_{l-1}` (with `A_0 = X`) to `A_l`.
    pub stages: Vec<Vec<Vec<f64>>>,
}

const STOCHASTIC_TOL: f64 = 1e-12;

fn one_hot_kernel(map: &[usize], width: usize) -> Vec<Vec<f64>> {
    map.iter()
        .map(|&m| {
            let mut row = vec![0.0; width];
            row[m] = 1.0;
            row
        })
        .collect()
}

impl MarkovChainCase {
    /// Chain built from deterministic maps: `y = label_map[x]`,
    /// `a_l = stage_maps[l][a_{l-1}]`.
    pub fn deterministic(
        input_dist: Vec<f64>,
        label_map: &[usize],
        stage_maps: &[Vec<usize>],
    ) -> Result<Self> {
        let width = |m: &[usize]| m.iter().max().map_or(0, |v| v + 1);
        let case = Self {
            label_kernel: one_hot_kernel(label_map, width(label_map)),
            stages: stage_maps
                .iter()
                .map(|m| one_hot_kernel(m, width(m)))
                .collect(),
            input_dist,
        };
        case.validate()?;
        Ok(case)
    }

    /// `X` uniform on `{0..3}`, `Y = X mod 2`, `A_1 = X`, `A_2 = floor(A_1 / 2)`.
    pub fn mod_floor_example() -> Self {
        Self::deterministic(
            vec![0.25; 4],
            &[0, 1, 0, 1],
            &[vec![0, 1, 2, 3], vec![0, 0, 1, 1]],
        )
        .expect("valid example chain")
    }

    pub fn validate(&self) -> Result<()> {
        let nx = self.input_dist.len();
        if nx == 0 {
            return Err(Error::invalid("input distribution is empty"));
        }
        if self.input_dist.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::invalid("input probabilities must be >= 0"));
        }
        if (self.input_dist.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::invalid("input distribution does not sum to 1"));
        }
        let check = |name: &str, k: &[Vec<f64>], rows: usize| -> Result<usize> {
            if k.len() != rows {
                return Err(Error::invalid(format!(
                    "{name} has {} rows, expected {rows}",
                    k.len()
                )));
            }
            let width = k.first().map_or(0, Vec::len);
            for (i, row) in k.iter().enumerate() {
                if row.len() != width || width == 0 {
                    return Err(Error::invalid(format!(
                        "{name} row {i} has inconsistent width"
                    )));
                }
                if row.iter().any(|&p| !(p >= 0.0))
                    || (row.iter().sum::<f64>() - 1.0).abs() > STOCHASTIC_TOL
                {
                    return Err(Error::invalid(format!(
                        "{name} row {i} is not a probability distribution"
                    )));
                }
            }
            Ok(width)
        };
        check("label kernel", &self.label_kernel, nx)?;
        let mut rows = nx;
        for (l, k) in self.stages.iter().enumerate() {
            rows = check(&format!("stage {} kernel", l + 1), k, rows)?;
        }
        Ok(())
    }

    /// `p(a_l | x)` for every stage, starting with the identity for `X` itself.
    fn stage_conditionals(&self) -> Vec<Vec<Vec<f64>>> {
        let nx = self.input_dist.len();
        let mut cond: Vec<Vec<f64>> = one_hot_kernel(&(0..nx).collect::<Vec<_>>(), nx);
        let mut out = vec![cond.clone()];
        for kernel in &self.stages {
            let width = kernel[0].len();
            cond = cond
                .iter()
                .map(|row| {
                    let mut next = vec![0.0; width];
                    for (a, &p) in row.iter().enumerate() {
                        if p > 0.0 {
                            for (n, k) in next.iter_mut().zip(&kernel[a]) {
                                *n += p * k;
                            }
                        }
                    }
                    next
                })
                .collect();
            out.push(cond.clone());
        }
        out
    }
}

fn mi_of_joint(joint: &[Vec<f64>]) -> f64 {
    let rows: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let width = joint.first().map_or(0, Vec::len);
    let cols: Vec<f64> = (0..width)
        .map(|j| joint.iter().map(|r| r[j]).sum())
        .collect();
    let mut mi = 0.0;
    for (i, r) in joint.iter().enumerate() {
        for (j, &p) in r.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (rows[i] * cols[j])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Exact `[I(X;Y), I(A_1;Y), .., I(A_L;Y)]` in nats.
pub fn markov_chain_exact_mi(case: &MarkovChainCase) -> Result<Vec<f64>> {
    case.validate()?;
    let ny = case.label_kernel[0].len();
    Ok(case
        .stage_conditionals()
        .iter()
        .map(|cond| {
            let width = cond[0].len();
            let mut joint = vec![vec![0.0; ny]; width];
            for (x, px) in case.input_dist.iter().enumerate() {
                for (a, &pa) in cond[x].iter().enumerate() {
                    for (y, &py) in case.label_kernel[x].iter().enumerate() {
                        joint[a][y] += px * pa * py;
                    }
                }
            }
            mi_of_joint(&joint)
        })
        .collect())
}

/// Exact `[I(X;X), I(X;A_1), .., I(X;A_L)]` in nats.
pub fn markov_chain_exact_input_mi(case: &MarkovChainCase) -> Result<Vec<f64>> {
    case.validate()?;
    Ok(case
        .stage_conditionals()
        .iter()
        .map(|cond| {
            let joint: Vec<Vec<f64>> = case
                .input_dist
                .iter()
                .zip(cond)
                .map(|(px, row)| row.iter().map(|pa| px * pa).collect())
                .collect();
            mi_of_joint(&joint)
        })
        .collect())
}

/// Dataset realizing a deterministic chain with uniform input exactly: every
/// input symbol appears `repeats` times. Returns the input column, one column
/// per stage, and the labels.
pub fn markov_samples(
    case: &MarkovChainCase,
    repeats: usize,
) -> Result<(Tensor, Vec<Tensor>, LabelSet)> {
    case.validate()?;
    let nx = case.input_dist.len();
    if repeats == 0 {
        return Err(Error::invalid("repeats must be positive"));
    }
    if case
        .input_dist
        .iter()
        .any(|&p| (p - 1.0 / nx as f64).abs() > STOCHASTIC_TOL)
    {
        return Err(Error::invalid(
            "exact sampling requires a uniform input distribution",
        ));
    }
    let argmax_one = |row: &[f64]| -> Result<usize> {
        row.iter()
            .position(|&p| p == 1.0)
            .ok_or_else(|| Error::invalid("exact sampling requires deterministic kernels"))
    };
    let xs: Vec<usize> = (0..nx)
        .flat_map(|x| std::iter::repeat_n(x, repeats))
        .collect();
    let n = xs.len();
    let labels = xs
        .iter()
        .map(|&x| argmax_one(&case.label_kernel[x]).map(|y| y as u32))
        .collect::<Result<Vec<_>>>()?;
    let input = Tensor::matrix(n, 1, xs.iter().map(|&x| x as f64).collect())?;
    let mut current = xs;
    let mut stages = Vec::with_capacity(case.stages.len());
    for kernel in &case.stages {
        current = current
            .iter()
            .map(|&a| argmax_one(&kernel[a]))
            .collect::<Result<Vec<_>>>()?;
        stages.push(Tensor::matrix(
            n,
            1,
            current.iter().map(|&a| a as f64).collect(),
        )?);
    }
    let ny = case.label_kernel[0].len() as u32;
    Ok((input, stages, LabelSet::new(labels, ny)?))
}
