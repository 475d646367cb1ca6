//! Dynamic time warping between two embedding sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpingPath {
    pub pairs: Vec<(usize, usize)>,
    pub cost: f64,
}

impl WarpingPath {
    /// Indices of `b` matched to `a[i]`; the median one when there are
    /// several (the lower middle for an even count).
    pub fn match_for(&self, i: usize) -> Option<usize> {
        let js: Vec<usize> = self.pairs.iter().filter(|(a, _)| *a == i).map(|(_, b)| *b).collect();
        if js.is_empty() {
            None
        } else {
            Some(js[(js.len() - 1) / 2])
        }
    }

    pub fn transposed(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|(a, b)| (*b, *a)).collect(),
            cost: self.cost,
        }
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Minimal-cost monotone alignment under Euclidean pairwise distance.
///
/// When several predecessors tie during backtracking the diagonal step is
/// preferred, then the step that advances only in `a`.
pub fn dtw_align<X: AsRef<[f64]>>(a: &[X], b: &[X]) -> Result<WarpingPath> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("dtw needs two nonempty sequences".into()));
    }
    let (n, m) = (a.len(), b.len());
    let mut acc = vec![f64::INFINITY; n * m];
    let at = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            let d = euclidean(a[i].as_ref(), b[j].as_ref());
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let mut best = f64::INFINITY;
                if i > 0 && j > 0 {
                    best = best.min(acc[at(i - 1, j - 1)]);
                }
                if i > 0 {
                    best = best.min(acc[at(i - 1, j)]);
                }
                if j > 0 {
                    best = best.min(acc[at(i, j - 1)]);
                }
                best
            };
            acc[at(i, j)] = prev + d;
        }
    }
    let mut pairs = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let mut cand: Vec<(usize, usize)> = Vec::with_capacity(3);
        if i > 0 && j > 0 {
            cand.push((i - 1, j - 1));
        }
        if i > 0 {
            cand.push((i - 1, j));
        }
        if j > 0 {
            cand.push((i, j - 1));
        }
        let mut best = cand[0];
        for c in &cand[1..] {
            if acc[at(c.0, c.1)] < acc[at(best.0, best.1)] {
                best = *c;
            }
        }
        (i, j) = best;
        pairs.push(best);
    }
    pairs.reverse();
    Ok(WarpingPath {
        pairs,
        cost: acc[at(n - 1, m - 1)],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalars(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    #[test]
    fn self_alignment_is_diagonal() {
        let a = scalars(&[0.5, -1.0, 2.0, 2.0, 3.0]);
        let p = dtw_align(&a, &a).unwrap();
        assert_eq!(p.cost, 0.0);
        assert_eq!(p.pairs, (0..5).map(|i| (i, i)).collect::<Vec<_>>());
    }

    #[test]
    fn repeated_element_example() {
        let p = dtw_align(&scalars(&[1.0, 2.0, 3.0]), &scalars(&[1.0, 2.0, 2.0, 3.0])).unwrap();
        assert_eq!(p.pairs, vec![(0, 0), (1, 1), (1, 2), (2, 3)]);
        assert_eq!(p.cost, 0.0);
        assert_eq!(p.match_for(1), Some(1));
    }

    #[test]
    fn empty_is_rejected() {
        let e: Vec<Vec<f64>> = vec![];
        assert!(dtw_align(&e, &scalars(&[1.0])).is_err());
    }
}
