use ndarray::{Array2, Axis};

use super::config::{Branches, InputRecipe};
use crate::eigen_graph::{EigenDescriptorSet, NeighborGraph, NeighborRows};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Per-point features of one encoder level.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub rows: Array2<f64>,
    /// 1-based encoder level the features belong to.
    pub level: usize,
}

impl FeatureMap {
    pub fn new(rows: Array2<f64>, level: usize) -> Result<Self> {
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("level {level} features contain non-finite values")));
        }
        Ok(Self { rows, level })
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn width(&self) -> usize {
        self.rows.ncols()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    Euclidean,
    Eigen,
}

/// Edge rows for one branch, anchor-major: rows `i·k .. (i+1)·k` belong to
/// anchor `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFeatureBlock {
    pub rows: Array2<f64>,
    pub k: usize,
    pub branch: Branch,
}

impl EdgeFeatureBlock {
    pub fn anchors(&self) -> usize {
        self.rows.nrows() / self.k
    }

    /// The `k` edge rows of anchor `i`.
    pub fn anchor_rows(&self, i: usize) -> ndarray::ArrayView2<'_, f64> {
        self.rows.slice(ndarray::s![i * self.k..(i + 1) * self.k, ..])
    }
}

/// Level-1 edge blocks for whichever branches are active.
#[derive(Clone, Debug, PartialEq)]
pub struct InputEdges {
    pub euclidean: Option<EdgeFeatureBlock>,
    pub eigen: Option<EdgeFeatureBlock>,
}

/// Assembles level-1 edge rows from coordinates and eigenvalues.
pub fn input_recipe(
    cloud: &PointCloud,
    descriptors: &EigenDescriptorSet,
    graph: &NeighborGraph,
    recipe: InputRecipe,
    branches: Branches,
) -> Result<InputEdges> {
    let n = cloud.len();
    if descriptors.len() != n || graph.len() != n {
        return Err(Error::invalid(format!(
            "cloud has {n} points but descriptors cover {} and graph {}",
            descriptors.len(),
            graph.len()
        )));
    }
    graph.euclid.validate_for(n)?;
    graph.eigen.validate_for(n)?;
    let pts = cloud.points();
    let lam = &descriptors.lambdas;

    let euclidean = branches.euclidean().then(|| {
        let k = graph.k1();
        let width = recipe.euclidean_channels();
        let mut rows = Array2::zeros((n * k, width));
        for i in 0..n {
            for (s, &j) in graph.euclid.row(i).iter().enumerate() {
                let mut out = rows.row_mut(i * k + s);
                let d = pts[j] - pts[i];
                let mut c = 0;
                let mut put = |v: f64| {
                    out[c] = v;
                    c += 1;
                };
                if recipe != InputRecipe::EigenOnly {
                    d.iter().for_each(|&v| put(v));
                    pts[j].iter().for_each(|&v| put(v));
                }
                if recipe != InputRecipe::Coords {
                    (0..3).for_each(|a| put(lam[j][a] - lam[i][a]));
                    lam[j].iter().for_each(|&v| put(v));
                }
                if recipe == InputRecipe::CoordsEigenDist {
                    put(d.norm());
                }
            }
        }
        EdgeFeatureBlock {
            rows,
            k,
            branch: Branch::Euclidean,
        }
    });

    let eigen = branches.eigen().then(|| {
        let k = graph.k2();
        let mut rows = Array2::zeros((n * k, 6));
        for i in 0..n {
            for (s, &p) in graph.eigen.row(i).iter().enumerate() {
                let mut out = rows.row_mut(i * k + s);
                for a in 0..3 {
                    out[a] = lam[p][a] - lam[i][a];
                    out[3 + a] = lam[p][a];
                }
            }
        }
        EdgeFeatureBlock {
            rows,
            k,
            branch: Branch::Eigen,
        }
    });
    Ok(InputEdges { euclidean, eigen })
}

/// Rows `(f_j - f_i, f_j)` for every anchor `i` and neighbor `j` of `idx`.
pub fn group_features(features: &FeatureMap, idx: &NeighborRows, branch: Branch) -> Result<EdgeFeatureBlock> {
    idx.validate_for(features.len())?;
    let k = idx.k();
    let c = features.width();
    let f = &features.rows;
    let mut rows = Array2::zeros((features.len() * k, 2 * c));
    for i in 0..features.len() {
        for (s, &j) in idx.row(i).iter().enumerate() {
            let mut out = rows.row_mut(i * k + s);
            for ch in 0..c {
                out[ch] = f[[j, ch]] - f[[i, ch]];
                out[c + ch] = f[[j, ch]];
            }
        }
    }
    Ok(EdgeFeatureBlock { rows, k, branch })
}

/// Shifts and scales each column to zero mean and unit variance. Columns
/// with (near) zero spread are only centered.
pub fn standardize_columns(rows: &mut Array2<f64>) {
    if rows.nrows() == 0 {
        return;
    }
    for mut col in rows.axis_iter_mut(Axis(1)) {
        let mean = col.mean().unwrap_or(0.0);
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
        let scale = if var.sqrt() > 1e-8 { 1.0 / var.sqrt() } else { 1.0 };
        col.mapv_inplace(|v| (v - mean) * scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen_graph::build_graph;
    use ndarray::array;

    fn two_point_graph() -> (PointCloud, EigenDescriptorSet, NeighborGraph) {
        let cloud = PointCloud::from_rows(&[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]).unwrap();
        let graph = NeighborGraph {
            euclid: NeighborRows::from_flat(1, vec![1, 0]).unwrap(),
            eigen: NeighborRows::from_flat(1, vec![1, 0]).unwrap(),
        };
        let descriptors = EigenDescriptorSet {
            lambdas: vec![[3.0, 2.0, 1.0], [0.5, 0.25, 0.0]],
            vectors: None,
        };
        (cloud, descriptors, graph)
    }

    #[test]
    fn coordinate_recipe_zero_anchor() {
        let (cloud, d, g) = two_point_graph();
        let e = input_recipe(&cloud, &d, &g, InputRecipe::Coords, Branches::Euclidean).unwrap();
        assert!(e.eigen.is_none());
        let eu = e.euclidean.unwrap();
        assert_eq!(eu.rows.row(0).to_vec(), vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn distance_channel() {
        let (cloud, d, g) = two_point_graph();
        let e = input_recipe(&cloud, &d, &g, InputRecipe::CoordsEigenDist, Branches::Both).unwrap();
        let eu = e.euclidean.unwrap();
        assert_eq!(eu.rows.ncols(), 13);
        assert_eq!(eu.rows[[0, 12]], 14f64.sqrt());
        assert_eq!(eu.rows.row(0).slice(ndarray::s![6..12]).to_vec(), vec![-2.5, -1.75, -1.0, 0.5, 0.25, 0.0]);
        let ei = e.eigen.unwrap();
        assert_eq!(ei.rows.row(1).to_vec(), vec![2.5, 1.75, 1.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn eigen_only_recipe_has_no_coordinates() {
        let (cloud, d, g) = two_point_graph();
        let e = input_recipe(&cloud, &d, &g, InputRecipe::EigenOnly, Branches::Euclidean).unwrap();
        assert_eq!(e.euclidean.unwrap().rows.row(0).to_vec(), vec![-2.5, -1.75, -1.0, 0.5, 0.25, 0.0]);
    }

    #[test]
    fn recipe_widths_match_declared_channels() {
        let mut rng_pts = Vec::new();
        for i in 0..40 {
            let t = i as f64;
            rng_pts.push([t.sin(), (1.3 * t).cos(), (0.7 * t).sin() * t / 40.0]);
        }
        let cloud = PointCloud::from_rows(&rng_pts).unwrap();
        let (g, d) = build_graph(&cloud, 8, 5).unwrap();
        for r in InputRecipe::ALL {
            let e = input_recipe(&cloud, &d, &g, r, Branches::Both).unwrap();
            let eu = e.euclidean.unwrap();
            assert_eq!(eu.rows.dim(), (40 * 8, r.euclidean_channels()));
            assert_eq!(e.eigen.unwrap().rows.dim(), (40 * 5, r.eigen_channels()));
        }
    }

    #[test]
    fn grouping_scalar_case() {
        let f = FeatureMap::new(array![[1.0], [4.0]], 2).unwrap();
        let idx = NeighborRows::from_flat(1, vec![1, 0]).unwrap();
        let b = group_features(&f, &idx, Branch::Euclidean).unwrap();
        assert_eq!(b.rows.row(0).to_vec(), vec![3.0, 4.0]);
        assert_eq!(b.rows.row(1).to_vec(), vec![-3.0, 1.0]);
    }

    #[test]
    fn grouping_equal_features_zero_difference() {
        let f = FeatureMap::new(Array2::from_elem((4, 3), 0.7), 2).unwrap();
        let idx = NeighborRows::from_flat(2, vec![1, 2, 0, 3, 1, 0, 2, 1]).unwrap();
        let b = group_features(&f, &idx, Branch::Eigen).unwrap();
        assert!(b.rows.slice(ndarray::s![.., 0..3]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grouping_rejects_bad_index() {
        let f = FeatureMap::new(Array2::zeros((2, 1)), 2).unwrap();
        let idx = NeighborRows::from_flat(1, vec![1, 5]).unwrap();
        assert!(group_features(&f, &idx, Branch::Euclidean).is_err());
    }

    #[test]
    fn standardization() {
        let mut a = array![[1.0, 5.0], [3.0, 5.0]];
        standardize_columns(&mut a);
        assert_eq!(a, array![[-1.0, 0.0], [1.0, 0.0]]);
    }
}
