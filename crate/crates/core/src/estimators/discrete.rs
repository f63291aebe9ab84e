use serde::{Deserialize, Serialize};

use super::{Estimator, LabelSet, MIEstimate};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_BINS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangeMode {
    /// Each dimension spans its own observed `[min, max]`.
    PerDimension,
    /// Every dimension spans `[lo, hi]`; values outside land in the edge bins.
    Fixed { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningConfig {
    pub bins_per_dim: usize,
    pub range_mode: RangeMode,
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self {
            bins_per_dim: DEFAULT_BINS,
            range_mode: RangeMode::PerDimension,
        }
    }
}

impl BinningConfig {
    pub fn with_bins(bins_per_dim: usize) -> Self {
        Self {
            bins_per_dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins_per_dim < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 bins per dimension, got {}",
                self.bins_per_dim
            )));
        }
        if let RangeMode::Fixed { lo, hi } = self.range_mode {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!("fixed range [{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }
}

/// Plug-in entropy of an empirical distribution of `counts`, summed in
/// ascending count order so the result depends only on the multiset.
fn entropy_from_counts(mut counts: Vec<usize>, n: usize) -> f64 {
    counts.sort_unstable();
    let n = n as f64;
    let h: f64 = counts
        .into_iter()
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

fn run_lengths<T: Ord>(mut items: Vec<T>) -> Vec<usize> {
    items.sort_unstable();
    let mut counts = Vec::new();
    let mut iter = items.into_iter();
    let Some(mut prev) = iter.next() else {
        return counts;
    };
    let mut run = 1;
    for item in iter {
        if item == prev {
            run += 1;
        } else {
            counts.push(run);
            run = 1;
            prev = item;
        }
    }
    counts.push(run);
    counts
}

fn symbol_entropy(symbols: &[u64]) -> f64 {
    entropy_from_counts(run_lengths(symbols.to_vec()), symbols.len())
}

fn joint_symbol_entropy(a: &[u64], b: &[u64]) -> f64 {
    let pairs: Vec<(u64, u64)> = a.iter().copied().zip(b.iter().copied()).collect();
    entropy_from_counts(run_lengths(pairs), a.len())
}

/// `-sum p log p` over the empirical symbol frequencies.
pub fn discrete_entropy(symbols: &[u64]) -> Result<MIEstimate> {
    if symbols.is_empty() {
        return Err(Error::invalid("entropy of an empty sample"));
    }
    Ok(
        MIEstimate::new(symbol_entropy(symbols), Estimator::DiscreteExact)
            .param("n", symbols.len()),
    )
}

/// Plug-in MI `H(A) + H(B) - H(A, B)` of two aligned symbol sequences.
pub fn discrete_mi(a: &[u64], b: &[u64]) -> Result<MIEstimate> {
    if a.len() != b.len() {
        return Err(Error::dim(format!("{} vs {} samples", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::invalid("mutual information of an empty sample"));
    }
    let mi = (symbol_entropy(a) + symbol_entropy(b) - joint_symbol_entropy(a, b)).max(0.0);
    Ok(MIEstimate::new(mi, Estimator::DiscreteExact).param("n", a.len()))
}

/// Equal-width binning per dimension, then each bin-index tuple is replaced by
/// its rank among the distinct tuples in lexicographic order. Ranks depend
/// only on the set of tuples, so permuting rows permutes symbols.
pub fn quantize(samples: &Tensor, cfg: &BinningConfig) -> Result<Vec<u64>> {
    cfg.validate()?;
    let n = samples.rows();
    let d = samples.cols();
    let bins = cfg.bins_per_dim;
    let ranges: Vec<(f64, f64)> = (0..d)
        .map(|j| match cfg.range_mode {
            RangeMode::Fixed { lo, hi } => (lo, hi),
            RangeMode::PerDimension => {
                let col = samples.iter_rows().map(|r| r[j]);
                let lo = col.clone().fold(f64::INFINITY, f64::min);
                let hi = col.fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        })
        .collect();
    let bin_of = |v: f64, (lo, hi): (f64, f64)| -> u32 {
        let width = hi - lo;
        if !(width > 0.0) {
            return 0;
        }
        let pos = ((v - lo) / width * bins as f64).floor();
        pos.clamp(0.0, (bins - 1) as f64) as u32
    };
    let tuples: Vec<Vec<u32>> = samples
        .iter_rows()
        .map(|r| {
            r.iter()
                .zip(&ranges)
                .map(|(&v, &rg)| bin_of(v, rg))
                .collect()
        })
        .collect();
    let mut distinct = tuples.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let symbols = tuples
        .iter()
        .map(|t| distinct.binary_search(t).expect("tuple present") as u64)
        .collect::<Vec<_>>();
    debug_assert_eq!(symbols.len(), n);
    Ok(symbols)
}

/// Entropy of the quantized samples.
pub fn binned_entropy(samples: &Tensor, cfg: &BinningConfig) -> Result<MIEstimate> {
    let symbols = quantize(samples, cfg)?;
    Ok(
        MIEstimate::new(symbol_entropy(&symbols), Estimator::Binning)
            .param("bins", cfg.bins_per_dim),
    )
}

pub fn binned_mi(a: &Tensor, b: &Tensor, cfg: &BinningConfig) -> Result<MIEstimate> {
    if a.rows() != b.rows() {
        return Err(Error::dim(format!("{} vs {} samples", a.rows(), b.rows())));
    }
    let sa = quantize(a, cfg)?;
    let sb = quantize(b, cfg)?;
    let mi = discrete_mi(&sa, &sb)?.value_nats;
    Ok(MIEstimate::new(mi, Estimator::Binning).param("bins", cfg.bins_per_dim))
}

/// As [`binned_mi`] with labels used directly as symbols.
pub fn binned_mi_labels(a: &Tensor, labels: &LabelSet, cfg: &BinningConfig) -> Result<MIEstimate> {
    if a.rows() != labels.len() {
        return Err(Error::dim(format!(
            "{} samples vs {} labels",
            a.rows(),
            labels.len()
        )));
    }
    let sa = quantize(a, cfg)?;
    let mi = discrete_mi(&sa, &labels.symbols())?.value_nats;
    Ok(MIEstimate::new(mi, Estimator::Binning).param("bins", cfg.bins_per_dim))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Tensor {
        Tensor::matrix(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(discrete_entropy(&[0, 0, 0, 0]).unwrap().value_nats, 0.0);
        let h = discrete_entropy(&[0, 1, 2, 3]).unwrap().value_nats;
        assert!((h - 4f64.ln()).abs() < 1e-12);
        assert!((h - 1.386294).abs() < 1e-6);
        let h = discrete_entropy(&[0, 0, 1, 1]).unwrap().value_nats;
        assert!((h - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(discrete_entropy(&[]).is_err());
    }

    #[test]
    fn quantize_basic() {
        let cfg = BinningConfig::with_bins(2);
        let s = quantize(&col(&[0.0, 1.0]), &cfg).unwrap();
        assert_ne!(s[0], s[1]);
        let s = quantize(&col(&[5.0, 5.0, 5.0]), &cfg).unwrap();
        assert!(s.iter().all(|&v| v == s[0]));
        assert!(quantize(&col(&[0.0]), &BinningConfig::with_bins(1)).is_err());
    }

    #[test]
    fn fixed_range_clamps() {
        let cfg = BinningConfig {
            bins_per_dim: 4,
            range_mode: RangeMode::Fixed { lo: 0.0, hi: 1.0 },
        };
        let s = quantize(&col(&[-3.0, 0.1, 0.9, 7.0]), &cfg).unwrap();
        assert_eq!(s[0], s[1]);
        assert_eq!(s[2], s[3]);
        assert_ne!(s[0], s[3]);
    }

    #[test]
    fn binned_mi_examples() {
        let a = col(&[0.0, 1.0, 2.0, 3.0]);
        let mi = binned_mi(&a, &a, &BinningConfig::with_bins(4)).unwrap();
        assert!((mi.value_nats - 4f64.ln()).abs() < 1e-12);
        let c = col(&[2.0; 4]);
        assert_eq!(
            binned_mi(&a, &c, &BinningConfig::default())
                .unwrap()
                .value_nats,
            0.0
        );
        let short = col(&[1.0, 2.0]);
        assert!(matches!(
            binned_mi(&a, &short, &BinningConfig::default()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn binned_mi_against_labels() {
        let a = col(&[0.0, 0.1, 0.9, 1.0]);
        let y = LabelSet::new(vec![0, 0, 1, 1], 2).unwrap();
        let mi = binned_mi_labels(&a, &y, &BinningConfig::with_bins(2)).unwrap();
        assert!((mi.value_nats - 2f64.ln()).abs() < 1e-12);
    }
}
