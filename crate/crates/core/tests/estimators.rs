use infoplane_core::estimators::{
    binned_entropy, binned_mi, discrete_mi, gaussian_conductance_entropy, gaussian_entropy, kde_mi,
    ksg_mi, mi_with_labels, quantize, Bandwidth, BinningConfig, GaussianSpec, LabelEntropyMode,
    LabelSet,
};
use infoplane_core::rng::{seeded_rng, uniform};
use infoplane_core::synth::gen_gaussian;
use infoplane_core::{Error, Tensor};
use proptest::prelude::*;

fn column(t: &Tensor, j: usize) -> Tensor {
    Tensor::matrix(t.rows(), 1, t.iter_rows().map(|r| r[j]).collect()).unwrap()
}

fn bivariate(rho: f64, n: usize, seed: u64) -> (Tensor, Tensor) {
    let cov = Tensor::matrix(2, 2, vec![1.0, rho, rho, 1.0]).unwrap();
    let xy = gen_gaussian(&GaussianSpec::new(vec![0.0; 2], cov).unwrap(), n, seed).unwrap();
    (column(&xy, 0), column(&xy, 1))
}

fn truth(rho: f64) -> f64 {
    -0.5 * (1.0 - rho * rho).ln()
}

#[test]
fn correlated_gaussian_oracles() {
    let rho = 0.9;
    assert!((truth(rho) - 0.830366).abs() < 1e-6);
    let (a, b) = bivariate(rho, 5000, 11);
    let binned = binned_mi(&a, &b, &BinningConfig::with_bins(16))
        .unwrap()
        .value_nats;
    let kde = kde_mi(&a, &b, Bandwidth::Silverman).unwrap().value_nats;
    let ksg = ksg_mi(&a, &b, 5).unwrap().value_nats;
    assert!((binned - truth(rho)).abs() <= 0.15, "binned {binned}");
    assert!((kde - truth(rho)).abs() <= 0.15, "kde {kde}");
    assert!((ksg - truth(rho)).abs() <= 0.05, "ksg {ksg}");
}

#[test]
fn estimators_agree_on_ordering() {
    let mut last = [f64::NEG_INFINITY; 3];
    for rho in [0.0, 0.5, 0.9] {
        let (a, b) = bivariate(rho, 2000, 4);
        let now = [
            binned_mi(&a, &b, &BinningConfig::with_bins(16))
                .unwrap()
                .value_nats,
            kde_mi(&a, &b, Bandwidth::Silverman).unwrap().value_nats,
            ksg_mi(&a, &b, 5).unwrap().value_nats,
        ];
        for (n, l) in now.iter().zip(&last) {
            assert!(n > l);
        }
        last = now;
    }
}

#[test]
fn gaussian_closed_form_rotation_invariant() {
    let spec = GaussianSpec::new(
        vec![0.0; 2],
        Tensor::matrix(2, 2, vec![2.0, 0.3, 0.3, 1.0]).unwrap(),
    )
    .unwrap();
    let j = Tensor::matrix(2, 2, vec![1.0, 0.5, -0.2, 1.5]).unwrap();
    let base = gaussian_conductance_entropy(&j, &spec, 0.0)
        .unwrap()
        .value_nats;
    for theta in [0.1, 0.7, 2.0, -1.3] {
        let (s, c) = f64::sin_cos(theta);
        let q = Tensor::matrix(2, 2, vec![c, -s, s, c]).unwrap();
        let rotated = gaussian_conductance_entropy(&q.matmul(&j).unwrap(), &spec, 0.0)
            .unwrap()
            .value_nats;
        assert!((rotated - base).abs() <= 1e-8);
    }
}

#[test]
fn gaussian_closed_form_values() {
    let one = GaussianSpec::standard(1).unwrap();
    let h =
        gaussian_conductance_entropy(&Tensor::matrix(1, 1, vec![2.0]).unwrap(), &one, 0.0).unwrap();
    assert!((h.value_nats - 2.112086).abs() < 1e-6);
    let id = Tensor::identity(2).unwrap();
    let h = gaussian_conductance_entropy(&id, &GaussianSpec::standard(2).unwrap(), 0.0).unwrap();
    assert!((h.value_nats - 2.837877).abs() < 1e-6);
    let rank1 = Tensor::matrix(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
    let err =
        gaussian_conductance_entropy(&rank1, &GaussianSpec::standard(2).unwrap(), 0.0).unwrap_err();
    assert!(matches!(err, Error::Singular(_)));
    assert!(gaussian_entropy(&rank1, 1e-3).is_ok());
}

#[test]
fn label_mi_separating_and_independent() {
    let n = 300;
    let labels = LabelSet::new((0..n).map(|i| (i % 3) as u32).collect(), 3).unwrap();
    let c = Tensor::matrix(
        n,
        1,
        (0..n)
            .map(|i| 10.0 * (i % 3) as f64 + 0.01 * i as f64 / n as f64)
            .collect(),
    )
    .unwrap();
    let mi = mi_with_labels(&c, &labels, 3, LabelEntropyMode::UniformLogK).unwrap();
    let oracle =
        3f64.ln() - (-(2.0 / 3.0) * (2.0f64 / 3.0).ln() - (1.0 / 3.0) * (1.0f64 / 6.0).ln());
    assert!((mi.value_nats - oracle).abs() <= 1e-6);

    let mut rng = seeded_rng(5);
    let n = 2000;
    let c = Tensor::matrix(n, 1, (0..n).map(|_| uniform(&mut rng, 0.0, 1.0)).collect()).unwrap();
    let y = LabelSet::new((0..n).map(|i| (i % 2) as u32).collect(), 2).unwrap();
    let mi = mi_with_labels(&c, &y, 10, LabelEntropyMode::UniformLogK).unwrap();
    assert!(mi.value_nats <= 0.05);
}

fn sample_matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = seeded_rng(seed);
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| uniform(&mut rng, -1.0, 1.0))
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binned_mi_is_symmetric(seed in any::<u64>(), n in 2usize..200, bins in 2usize..20) {
        let a = sample_matrix(n, 2, seed);
        let b = sample_matrix(n, 1, seed.wrapping_add(1));
        let cfg = BinningConfig::with_bins(bins);
        let ab = binned_mi(&a, &b, &cfg).unwrap().value_nats;
        let ba = binned_mi(&b, &a, &cfg).unwrap().value_nats;
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        prop_assert!(ab >= 0.0);
    }

    #[test]
    fn binned_estimates_are_permutation_invariant(seed in any::<u64>(), n in 2usize..200) {
        let a = sample_matrix(n, 2, seed);
        let b = sample_matrix(n, 1, seed.wrapping_add(1));
        let mut perm: Vec<usize> = (0..n).collect();
        perm.reverse();
        perm.rotate_left((seed % n as u64) as usize);
        let cfg = BinningConfig::default();
        let pa = a.select_rows(&perm);
        let pb = b.select_rows(&perm);
        let mi = binned_mi(&a, &b, &cfg).unwrap().value_nats;
        let pmi = binned_mi(&pa, &pb, &cfg).unwrap().value_nats;
        prop_assert!((mi - pmi).abs() <= 1e-12);
        let h = binned_entropy(&a, &cfg).unwrap().value_nats;
        prop_assert!((h - binned_entropy(&pa, &cfg).unwrap().value_nats).abs() <= 1e-12);
    }

    #[test]
    fn mi_bounded_by_entropy(seed in any::<u64>(), n in 2usize..300) {
        let a = sample_matrix(n, 1, seed);
        let cfg = BinningConfig::with_bins(8);
        let qa = quantize(&a, &cfg).unwrap();
        let qb: Vec<u64> = qa.iter().map(|s| s / 2).collect();
        let mi = discrete_mi(&qa, &qb).unwrap().value_nats;
        let h = binned_entropy(&a, &cfg).unwrap().value_nats;
        prop_assert!(mi <= h + 1e-12);
    }

    #[test]
    fn label_mi_permutation_invariant(seed in any::<u64>(), n in 12usize..120) {
        let c = sample_matrix(n, 2, seed);
        let y = LabelSet::new((0..n).map(|i| (i % 3) as u32).collect(), 3).unwrap();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        prop_assume!({ let mut p = perm.clone(); p.sort(); p.dedup(); p.len() == n });
        let base = mi_with_labels(&c, &y, 5, LabelEntropyMode::Empirical).unwrap().value_nats;
        let permuted = mi_with_labels(&c.select_rows(&perm), &y.select(&perm), 5, LabelEntropyMode::Empirical)
            .unwrap()
            .value_nats;
        prop_assert!((base - permuted).abs() <= 1e-12);
    }
}
