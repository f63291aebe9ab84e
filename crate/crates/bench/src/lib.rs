//! Seeded fixtures shared by the benchmarks.

use infoplane_core::rng::{seeded_rng, uniform};
use infoplane_core::synth::gen_gaussian;
use infoplane_core::{Activation, GaussianSpec, Network, NetworkSpec, Tensor};

/// `n` draws of a bivariate Gaussian with correlation `rho`, split into columns.
pub fn correlated_pair(rho: f64, n: usize, seed: u64) -> (Tensor, Tensor) {
    let cov = Tensor::matrix(2, 2, vec![1.0, rho, rho, 1.0]).expect("2x2");
    let spec = GaussianSpec::new(vec![0.0; 2], cov).expect("valid covariance");
    let xy = gen_gaussian(&spec, n, seed).expect("sampling");
    let col =
        |j: usize| Tensor::matrix(n, 1, xy.iter_rows().map(|r| r[j]).collect()).expect("column");
    (col(0), col(1))
}

/// Uniform `[-1, 1)` batch of shape `[n, d]`.
pub fn uniform_batch(n: usize, d: usize, seed: u64) -> Tensor {
    let mut rng = seeded_rng(seed);
    Tensor::matrix(
        n,
        d,
        (0..n * d).map(|_| uniform(&mut rng, -1.0, 1.0)).collect(),
    )
    .expect("batch")
}

/// Tanh MLP with seeded weights and biases.
pub fn tanh_net(dims: &[usize], seed: u64) -> Network {
    let spec = NetworkSpec::uniform(dims.to_vec(), Activation::Tanh, seed).expect("spec");
    Network::init_with_biases(spec).expect("init")
}
