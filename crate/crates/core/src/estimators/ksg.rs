use statrs::function::gamma::digamma;

use super::neighbors::SortedPoints;
use super::{Estimator, MIEstimate};
use crate::error::{Error, Result};
use crate::rng::splitmix64;
use crate::tensor::Tensor;

/// Tie-breaking jitter amplitude relative to each dimension's range.
pub const KSG_JITTER_SCALE: f64 = 1e-10;

const JITTER_KEY: u64 = 0x6b73_675f_6a69_7474;

/// Adds a perturbation of at most `KSG_JITTER_SCALE * range / 2` to every
/// coordinate. The perturbation is a hash of the coordinate's bits and its
/// column, never of its row, so reordering samples does not change it.
fn jittered_columns(t: &Tensor, column_offset: u64) -> Vec<f64> {
    let d = t.cols();
    let ranges: Vec<f64> = (0..d)
        .map(|j| {
            let (lo, hi) = t
                .iter_rows()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[j]), hi.max(r[j]))
                });
            if hi > lo {
                hi - lo
            } else {
                1.0
            }
        })
        .collect();
    let mut out = Vec::with_capacity(t.len());
    for r in t.iter_rows() {
        for (j, &v) in r.iter().enumerate() {
            let h = splitmix64(
                crate::tensor::canonical_bits(v) ^ JITTER_KEY ^ (column_offset + j as u64),
            );
            let u = (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            out.push(v + u * KSG_JITTER_SCALE * ranges[j]);
        }
    }
    out
}

/// Kraskov-Stoegbauer-Grassberger estimator (first variant) with max-norm
/// neighborhoods: `psi(k) + psi(N) - <psi(n_A + 1) + psi(n_B + 1)>`.
pub fn ksg_mi(a: &Tensor, b: &Tensor, k: usize) -> Result<MIEstimate> {
    let n = a.rows();
    if b.rows() != n {
        return Err(Error::dim(format!("{n} vs {} samples", b.rows())));
    }
    if k == 0 || k >= n {
        return Err(Error::invalid(format!(
            "KSG needs 1 <= k < N, got k={k}, N={n}"
        )));
    }
    let (da, db) = (a.cols(), b.cols());
    let ja = jittered_columns(a, 0);
    let jb = jittered_columns(b, da as u64);
    let mut joint = Vec::with_capacity(n * (da + db));
    for i in 0..n {
        joint.extend_from_slice(&ja[i * da..(i + 1) * da]);
        joint.extend_from_slice(&jb[i * db..(i + 1) * db]);
    }
    let joint_pts = SortedPoints::new(&joint, da + db);
    let a_pts = SortedPoints::new(&ja, da);
    let b_pts = SortedPoints::new(&jb, db);

    let mut acc = 0.0;
    for i in 0..n {
        let eps = joint_pts.kth_distance(i, k);
        let na = a_pts.count_within(i, eps);
        let nb = b_pts.count_within(i, eps);
        acc += digamma((na + 1) as f64) + digamma((nb + 1) as f64);
    }
    let mi = digamma(k as f64) + digamma(n as f64) - acc / n as f64;
    Ok(MIEstimate::new(mi, Estimator::Ksg)
        .param("k", k)
        .param("n", n))
}
