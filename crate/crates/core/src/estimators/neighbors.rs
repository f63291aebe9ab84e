//! Exact max-norm neighbor queries over a point set sorted by its first
//! coordinate. Scans stop once the first-coordinate gap alone exceeds the
//! current radius, which is exact for the max-norm.

pub(crate) struct SortedPoints<'a> {
    data: &'a [f64],
    dim: usize,
    order: Vec<usize>,
    rank: Vec<usize>,
}

impl<'a> SortedPoints<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Self {
        let n = data.len() / dim;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| data[a * dim].total_cmp(&data[b * dim]).then(a.cmp(&b)));
        let mut rank = vec![0; n];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        Self {
            data,
            dim,
            order,
            rank,
        }
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn gap(&self, i: usize, j: usize) -> f64 {
        (self.data[i * self.dim] - self.data[j * self.dim]).abs()
    }

    /// Distance from point `i` to its `k`-th nearest other point.
    pub fn kth_distance(&self, i: usize, k: usize) -> f64 {
        let n = self.order.len();
        let r = self.rank[i];
        // Ascending list of the k best distances so far.
        let mut best: Vec<f64> = Vec::with_capacity(k + 1);
        let mut left = r;
        let mut right = r + 1;
        loop {
            let lgap = if left > 0 {
                Some(self.gap(i, self.order[left - 1]))
            } else {
                None
            };
            let rgap = if right < n {
                Some(self.gap(i, self.order[right]))
            } else {
                None
            };
            let (j, gap) = match (lgap, rgap) {
                (None, None) => break,
                (Some(l), None) => {
                    left -= 1;
                    (self.order[left], l)
                }
                (None, Some(g)) => {
                    right += 1;
                    (self.order[right - 1], g)
                }
                (Some(l), Some(g)) => {
                    if l <= g {
                        left -= 1;
                        (self.order[left], l)
                    } else {
                        right += 1;
                        (self.order[right - 1], g)
                    }
                }
            };
            if best.len() == k && gap > best[k - 1] {
                break;
            }
            let d = self.dist(i, j);
            if best.len() < k || d < best[k - 1] {
                let pos = best.partition_point(|&b| b <= d);
                best.insert(pos, d);
                best.truncate(k);
            }
        }
        best[k - 1]
    }

    /// Number of other points strictly closer than `radius` to point `i`.
    pub fn count_within(&self, i: usize, radius: f64) -> usize {
        let n = self.order.len();
        let r = self.rank[i];
        let mut count = 0;
        for &j in self.order[..r].iter().rev() {
            if self.gap(i, j) >= radius {
                break;
            }
            if self.dist(i, j) < radius {
                count += 1;
            }
        }
        for &j in &self.order[r + 1..n] {
            if self.gap(i, j) >= radius {
                break;
            }
            if self.dist(i, j) < radius {
                count += 1;
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded_rng, uniform};

    fn brute_kth(data: &[f64], dim: usize, i: usize, k: usize) -> f64 {
        let n = data.len() / dim;
        let mut d: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                (0..dim)
                    .map(|c| (data[i * dim + c] - data[j * dim + c]).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        d.sort_by(f64::total_cmp);
        d[k - 1]
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = seeded_rng(4);
        for dim in 1..=3 {
            let data: Vec<f64> = (0..200 * dim)
                .map(|_| uniform(&mut rng, -1.0, 1.0))
                .collect();
            let pts = SortedPoints::new(&data, dim);
            for i in (0..200).step_by(7) {
                for k in [1, 3, 8] {
                    let eps = pts.kth_distance(i, k);
                    assert_eq!(eps, brute_kth(&data, dim, i, k));
                    let brute = (0..200)
                        .filter(|&j| j != i)
                        .filter(|&j| {
                            (0..dim)
                                .map(|c| (data[i * dim + c] - data[j * dim + c]).abs())
                                .fold(0.0, f64::max)
                                < eps
                        })
                        .count();
                    assert_eq!(pts.count_within(i, eps), brute);
                }
            }
        }
    }
}
