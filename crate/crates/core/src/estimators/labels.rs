use serde::{Deserialize, Serialize};

use super::discrete::discrete_entropy;
use super::{Estimator, MIEstimate};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_LABEL_K: usize = 10;

/// Class labels `0..class_count` aligned with the rows of a batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    labels: Vec<u32>,
    class_count: u32,
}

impl LabelSet {
    pub fn new(labels: Vec<u32>, class_count: u32) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("label set is empty"));
        }
        if class_count == 0 {
            return Err(Error::invalid("class count must be positive"));
        }
        if let Some((i, l)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::invalid(format!(
                "label {l} at position {i} is outside 0..{class_count}"
            )));
        }
        Ok(Self {
            labels,
            class_count,
        })
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn class_count(&self) -> u32 {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn symbols(&self) -> Vec<u64> {
        self.labels.iter().map(|&l| l as u64).collect()
    }

    pub fn select(&self, indices: &[usize]) -> LabelSet {
        LabelSet {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_count: self.class_count,
        }
    }

    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.class_count as usize];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }
}

/// How `H(Y)` is obtained for `I(T; Y) = H(Y) - H(Y | T)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelEntropyMode {
    /// `ln K`
    UniformLogK,
    /// Plug-in entropy of the observed labels.
    Empirical,
}

pub fn label_entropy(labels: &LabelSet, mode: LabelEntropyMode) -> Result<f64> {
    Ok(match mode {
        LabelEntropyMode::UniformLogK => (labels.class_count() as f64).ln(),
        LabelEntropyMode::Empirical => discrete_entropy(&labels.symbols())?.value_nats,
    })
}

fn check_inputs(c: &Tensor, labels: &LabelSet, k: usize) -> Result<()> {
    let n = c.rows();
    if labels.len() != n {
        return Err(Error::dim(format!(
            "{n} samples vs {} labels",
            labels.len()
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::invalid(format!(
            "label posterior needs 1 <= k < N, got k={k}, N={n}"
        )));
    }
    Ok(())
}

/// `H(Y | C) = -(1/N) sum_n sum_i P(i | c_n) log P(i | c_n)` where the
/// posterior at sample `n` is `(count_i + 1) / (k + K)` over its `k` nearest
/// other samples (Euclidean). Samples tied at the `k`-th distance share the
/// remaining neighbor slots equally, which keeps the estimate independent of
/// sample order.
pub fn conditional_label_entropy(c: &Tensor, labels: &LabelSet, k: usize) -> Result<MIEstimate> {
    check_inputs(c, labels, k)?;
    let n = c.rows();
    let classes = labels.class_count() as usize;
    let y = labels.labels();
    let mut dist = vec![0.0; n];
    let mut scratch = Vec::with_capacity(n);
    let mut counts = vec![0.0; classes];
    let mut total = 0.0;
    for i in 0..n {
        let ci = c.row(i);
        for (j, d) in dist.iter_mut().enumerate() {
            *d = if j == i {
                f64::INFINITY
            } else {
                c.row(j)
                    .iter()
                    .zip(ci)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum()
            };
        }
        scratch.clear();
        scratch.extend_from_slice(&dist);
        let (_, kth, _) = scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
        let kth = *kth;
        counts.iter_mut().for_each(|v| *v = 0.0);
        let mut closer = 0usize;
        let mut tied = 0usize;
        for (j, &d) in dist.iter().enumerate() {
            if d < kth {
                counts[y[j] as usize] += 1.0;
                closer += 1;
            } else if d == kth {
                tied += 1;
            }
        }
        let share = (k - closer) as f64 / tied as f64;
        for (j, &d) in dist.iter().enumerate() {
            if d == kth {
                counts[y[j] as usize] += share;
            }
        }
        let denom = (k + classes) as f64;
        let h: f64 = counts
            .iter()
            .map(|&cnt| {
                let p = (cnt + 1.0) / denom;
                -p * p.ln()
            })
            .sum();
        total += h;
    }
    Ok(MIEstimate::new(total / n as f64, Estimator::LabelKnn)
        .param("k", k)
        .param("smoothing", "laplace"))
}

/// `I(C; Y) = H(Y) - H(Y | C)`, clamped at 0. A negative raw value is kept in
/// the `pre_clamp` parameter. A representation whose rows are all identical
/// carries no label information and yields exactly 0.
pub fn mi_with_labels(
    c: &Tensor,
    labels: &LabelSet,
    k: usize,
    mode: LabelEntropyMode,
) -> Result<MIEstimate> {
    check_inputs(c, labels, k)?;
    let mode_name = match mode {
        LabelEntropyMode::UniformLogK => "uniform-logk",
        LabelEntropyMode::Empirical => "empirical",
    };
    let base = |v: f64| {
        MIEstimate::new(v, Estimator::LabelKnn)
            .param("k", k)
            .param("label_entropy", mode_name)
    };
    if c.rows_identical() {
        return Ok(base(0.0).param("degenerate", "constant-representation"));
    }
    let hy = label_entropy(labels, mode)?;
    let hyc = conditional_label_entropy(c, labels, k)?.value_nats;
    let raw = hy - hyc;
    if raw < 0.0 {
        Ok(base(0.0).param("pre_clamp", format!("{raw:.6e}")))
    } else {
        Ok(base(raw))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Entropy of the Laplace-smoothed posterior when all k neighbors agree.
    fn smoothed_all_agree(k: usize, classes: usize) -> f64 {
        let denom = (k + classes) as f64;
        let hit = (k as f64 + 1.0) / denom;
        let miss = 1.0 / denom;
        -hit * hit.ln() - (classes - 1) as f64 * miss * miss.ln()
    }

    fn separated(per_class: usize, classes: u32) -> (Tensor, LabelSet) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for c in 0..classes {
            for _ in 0..per_class {
                let mut r = vec![0.0; classes as usize];
                r[c as usize] = 100.0;
                rows.push(r);
                y.push(c);
            }
        }
        (
            Tensor::from_rows(&rows).unwrap(),
            LabelSet::new(y, classes).unwrap(),
        )
    }

    #[test]
    fn label_set_validation() {
        assert!(LabelSet::new(vec![], 2).is_err());
        assert!(LabelSet::new(vec![0, 2], 2).is_err());
        assert_eq!(
            LabelSet::new(vec![0, 1, 1], 2).unwrap().histogram(),
            vec![1, 2]
        );
    }

    #[test]
    fn separating_representation() {
        let (c, y) = separated(100, 3);
        let h = conditional_label_entropy(&c, &y, 3).unwrap().value_nats;
        let oracle = smoothed_all_agree(3, 3);
        assert!((h - oracle).abs() < 1e-12);
        // Frozen from the closed form above.
        assert!((oracle - 0.867563).abs() < 1e-6);
        let mi = mi_with_labels(&c, &y, 3, LabelEntropyMode::UniformLogK)
            .unwrap()
            .value_nats;
        assert!((mi - (3f64.ln() - oracle)).abs() < 1e-12);
    }

    #[test]
    fn single_class_has_zero_entropy() {
        let c = Tensor::matrix(5, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = LabelSet::new(vec![0; 5], 1).unwrap();
        assert_eq!(
            conditional_label_entropy(&c, &y, 2).unwrap().value_nats,
            0.0
        );
        assert_eq!(
            mi_with_labels(&c, &y, 2, LabelEntropyMode::Empirical)
                .unwrap()
                .value_nats,
            0.0
        );
    }

    #[test]
    fn uniform_mode_uses_log_k() {
        let y = LabelSet::new(vec![0, 1], 1000).unwrap();
        let h = label_entropy(&y, LabelEntropyMode::UniformLogK).unwrap();
        assert!((h - 6.907755).abs() < 1e-6);
    }

    #[test]
    fn constant_representation_is_zero() {
        let c = Tensor::matrix(6, 2, vec![1.5; 12]).unwrap();
        let y = LabelSet::new(vec![0, 1, 2, 0, 1, 2], 3).unwrap();
        let mi = mi_with_labels(&c, &y, 2, LabelEntropyMode::UniformLogK).unwrap();
        assert_eq!(mi.value_nats, 0.0);
        assert!(mi.params.contains_key("degenerate"));
    }

    #[test]
    fn k_bounds() {
        let c = Tensor::matrix(3, 1, vec![0.0, 1.0, 2.0]).unwrap();
        let y = LabelSet::new(vec![0, 1, 0], 2).unwrap();
        assert!(matches!(
            conditional_label_entropy(&c, &y, 3),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            mi_with_labels(&c, &y, 0, LabelEntropyMode::Empirical),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn ties_are_shared() {
        // Sample 0 has two neighbors tied at distance 1 with different labels.
        let c = Tensor::matrix(3, 1, vec![0.0, 1.0, -1.0]).unwrap();
        let y = LabelSet::new(vec![0, 0, 1], 2).unwrap();
        let h = conditional_label_entropy(&c, &y, 1).unwrap().value_nats;
        // sample 0: counts (0.5, 0.5) -> (1.5/3, 1.5/3); samples 1 and 2: nearest is sample 0.
        let h0 = 2f64.ln();
        let h1 = -(2.0 / 3.0f64) * (2.0 / 3.0f64).ln() - (1.0 / 3.0f64) * (1.0 / 3.0f64).ln();
        assert!((h - (h0 + 2.0 * h1) / 3.0).abs() < 1e-12);
    }
}
