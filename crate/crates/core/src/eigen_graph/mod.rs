//! The Eigen-Graph: Euclidean kNN, per-point structure tensors, their sorted
//! eigenvalues, and kNN in eigenvalue space.
//!
//! Every neighbor query is an exhaustive scan with a total order on
//! `(distance, index)`, so results are a deterministic function of the cloud
//! and `k` regardless of thread count.

mod knn;
mod sym3;

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

pub use knn::{knn_by, NeighborRows};
pub use sym3::{eig_sym3, SymEigen, JACOBI_GAP, SYMMETRY_TOLERANCE, ZERO_CLAMP};

pub(crate) use knn::check_k;

/// Above this many points the eigen distance matrix is never stored densely.
pub const DENSE_DISTANCE_LIMIT: usize = 4096;

/// Per-point structure tensors `C_i = M_i M_iᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureTensorSet {
    pub tensors: Vec<Matrix3<f64>>,
}

/// Sorted eigenvalue triples `λ¹ >= λ² >= λ³ >= 0`, one per point, with the
/// eigenvector frames when requested.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDescriptorSet {
    pub lambdas: Vec<[f64; 3]>,
    pub vectors: Option<Vec<Matrix3<f64>>>,
}

impl EigenDescriptorSet {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// Euclidean (`k1`) and eigenvalue-space (`k2`) neighbor rows of one cloud.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborGraph {
    pub euclid: NeighborRows,
    pub eigen: NeighborRows,
}

impl NeighborGraph {
    pub fn k1(&self) -> usize {
        self.euclid.k()
    }

    pub fn k2(&self) -> usize {
        self.eigen.k()
    }

    pub fn len(&self) -> usize {
        self.euclid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.euclid.is_empty()
    }
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}

/// `k` nearest points to each point by Euclidean distance, self excluded.
pub fn knn_euclidean(cloud: &PointCloud, k: usize) -> Result<NeighborRows> {
    let n = cloud.len();
    check_k("k", k, n)?;
    let rows = cloud.to_rows();
    Ok(knn_by(n, k, |i, j| dist2(&rows[i], &rows[j])))
}

/// `C_i = Σ_j (x_j - x_i)(x_j - x_i)ᵀ` over the neighbors in `rows`.
pub fn structure_tensors(cloud: &PointCloud, rows: &NeighborRows) -> Result<StructureTensorSet> {
    rows.validate_for(cloud.len())?;
    let pts = cloud.points();
    let tensors = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let mut c = Matrix3::zeros();
            for &j in rows.row(i) {
                let d = pts[j] - pts[i];
                c += d * d.transpose();
            }
            c
        })
        .collect();
    Ok(StructureTensorSet { tensors })
}

/// Eigenvalues (and optionally eigenvectors) of every structure tensor.
pub fn decompose_tensors(set: &StructureTensorSet, with_vectors: bool) -> Result<EigenDescriptorSet> {
    let decomps: Vec<SymEigen> = set
        .tensors
        .par_iter()
        .map(eig_sym3)
        .collect::<Result<_>>()?;
    Ok(EigenDescriptorSet {
        lambdas: decomps.iter().map(|d| d.values).collect(),
        vectors: with_vectors.then(|| decomps.iter().map(|d| d.vectors).collect()),
    })
}

/// kNN, structure tensors and eigendecomposition in one call.
pub fn eigen_descriptors(cloud: &PointCloud, k1: usize) -> Result<EigenDescriptorSet> {
    let rows = knn_euclidean(cloud, k1)?;
    descriptors_from_rows(cloud, &rows, false)
}

pub fn descriptors_from_rows(
    cloud: &PointCloud,
    rows: &NeighborRows,
    with_vectors: bool,
) -> Result<EigenDescriptorSet> {
    decompose_tensors(&structure_tensors(cloud, rows)?, with_vectors)
}

/// L² distance between two eigenvalue triples.
pub fn eigen_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    dist2(a, b).sqrt()
}

/// `k` nearest points to each point in eigenvalue space, self excluded.
pub fn knn_eigen(descriptors: &EigenDescriptorSet, k: usize) -> Result<NeighborRows> {
    let n = descriptors.len();
    check_k("k2", k, n)?;
    let l = &descriptors.lambdas;
    Ok(knn_by(n, k, |i, j| dist2(&l[i], &l[j])))
}

/// Builds the Eigen-Graph of a cloud.
pub fn build_graph(
    cloud: &PointCloud,
    k1: usize,
    k2: usize,
) -> Result<(NeighborGraph, EigenDescriptorSet)> {
    let n = cloud.len();
    check_k("k1", k1, n)?;
    check_k("k2", k2, n)?;
    let euclid = knn_euclidean(cloud, k1)?;
    let descriptors = descriptors_from_rows(cloud, &euclid, false)?;
    let eigen = knn_eigen(&descriptors, k2)?;
    Ok((NeighborGraph { euclid, eigen }, descriptors))
}

/// Pairwise eigen distances `D_ij`, dense for small clouds and computed on
/// demand above [`DENSE_DISTANCE_LIMIT`].
#[derive(Clone, Debug)]
pub struct EigenDistanceMatrix<'a> {
    lambdas: &'a [[f64; 3]],
    dense: Option<Vec<f64>>,
}

impl<'a> EigenDistanceMatrix<'a> {
    pub fn new(descriptors: &'a EigenDescriptorSet) -> Self {
        let lambdas = descriptors.lambdas.as_slice();
        let n = lambdas.len();
        let dense = (n <= DENSE_DISTANCE_LIMIT).then(|| {
            let mut d = vec![0.0; n * n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = eigen_distance(&lambdas[i], &lambdas[j]);
                    d[i * n + j] = v;
                    d[j * n + i] = v;
                }
            }
            d
        });
        Self { lambdas, dense }
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.len();
        if i >= n || j >= n {
            return Err(Error::invalid(format!("({i}, {j}) out of range for {n} points")));
        }
        Ok(match &self.dense {
            Some(d) => d[i * n + j],
            None => eigen_distance(&self.lambdas[i], &self.lambdas[j]),
        })
    }
}
