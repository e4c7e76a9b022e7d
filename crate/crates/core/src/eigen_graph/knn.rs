//! Exhaustive k-nearest-neighbor scans with a total (distance, index) order.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// `N` rows of `k` neighbor indices stored contiguously.
///
/// Each row excludes its anchor, holds distinct indices and is sorted by
/// ascending distance with ties broken by ascending index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborRows {
    k: usize,
    idx: Vec<usize>,
}

impl NeighborRows {
    pub fn from_flat(k: usize, idx: Vec<usize>) -> Result<Self> {
        if k == 0 || idx.len() % k != 0 {
            return Err(Error::invalid(format!(
                "{} indices cannot form rows of width {k}",
                idx.len()
            )));
        }
        Ok(Self { k, idx })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of anchor rows.
    pub fn len(&self) -> usize {
        self.idx.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.idx[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.idx.chunks_exact(self.k)
    }

    pub fn as_flat(&self) -> &[usize] {
        &self.idx
    }

    /// Checks that every index lies in `[0, n)`.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::invalid(format!(
                "neighbor rows cover {} anchors, expected {n}",
                self.len()
            )));
        }
        if let Some(&bad) = self.idx.iter().find(|&&j| j >= n) {
            return Err(Error::invalid(format!("neighbor index {bad} out of range for {n} points")));
        }
        Ok(())
    }
}

pub(crate) fn check_k(name: &str, k: usize, n: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::invalid(format!(
            "{name} = {k} must satisfy 1 <= {name} <= N-1 with N = {n}"
        )));
    }
    Ok(())
}

#[inline]
fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Brute-force scan: row `i` holds the `k` indices `j != i` with the smallest
/// `dist(i, j)`, ties broken by index. `dist` only has to be monotone in the
/// true distance, so squared distances are fine.
pub fn knn_by<F>(n: usize, k: usize, dist: F) -> NeighborRows
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    assert!(k >= 1 && k < n, "k = {k} out of range for n = {n}");
    let mut idx = vec![0usize; n * k];
    idx.par_chunks_mut(k)
        .enumerate()
        .for_each_init(
            || Vec::with_capacity(n),
            |scratch, (i, out)| {
                scratch.clear();
                scratch.extend((0..n).filter(|&j| j != i).map(|j| (dist(i, j), j)));
                if k < scratch.len() {
                    scratch.select_nth_unstable_by(k - 1, by_distance_then_index);
                }
                let head = &mut scratch[..k];
                head.sort_unstable_by(by_distance_then_index);
                for (o, &(_, j)) in out.iter_mut().zip(head.iter()) {
                    *o = j;
                }
            },
        );
    NeighborRows { k, idx }
}
