//! Brute-force reference implementations and random inputs shared by the
//! integration tests. Everything here is written from the definitions,
//! without calling the library routine it checks.
#![allow(dead_code)]

use gsnet::autodiff::ParamStore;
use gsnet::eigen_graph::NeighborGraph;
use gsnet::net::{BranchParams, GscLayer};
use gsnet::{PointCloud, RigidTransform};
use nalgebra::{Matrix3, Rotation3, Vector3};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_rows(n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect()
}

pub fn random_cloud(n: usize, rng: &mut ChaCha8Rng) -> PointCloud {
    PointCloud::from_rows(&random_rows(n, rng)).unwrap()
}

/// Rotation from a random unit axis and angle, plus a translation.
pub fn random_motion(rng: &mut ChaCha8Rng, max_shift: f64) -> RigidTransform {
    let axis = Vector3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let r: Matrix3<f64> = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).into_inner();
    let t = Vector3::new(
        rng.random_range(-max_shift..=max_shift),
        rng.random_range(-max_shift..=max_shift),
        rng.random_range(-max_shift..=max_shift),
    );
    RigidTransform::new(r, t).unwrap()
}

pub fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|c| (a[c] - b[c]) * (a[c] - b[c])).sum()
}

/// Full sort of all other points by (distance, index).
pub fn knn_oracle(pts: &[[f64; 3]], k: usize) -> Vec<Vec<usize>> {
    (0..pts.len())
        .map(|i| {
            let mut all: Vec<(f64, usize)> = (0..pts.len()).filter(|&j| j != i).map(|j| (sq_dist(&pts[i], &pts[j]), j)).collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            all.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Sorted distances from anchor `i` to every other point.
pub fn sorted_distances(pts: &[[f64; 3]], i: usize) -> Vec<f64> {
    let mut d: Vec<f64> = (0..pts.len()).filter(|&j| j != i).map(|j| sq_dist(&pts[i], &pts[j]).sqrt()).collect();
    d.sort_by(f64::total_cmp);
    d
}

/// Recomputes the distance to the whole selection at every step.
pub fn fps_oracle(pts: &[[f64; 3]], m: usize, start: usize) -> Vec<usize> {
    let mut chosen = vec![start];
    while chosen.len() < m {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..pts.len() {
            if chosen.contains(&j) {
                continue;
            }
            let d = chosen.iter().map(|&s| sq_dist(&pts[j], &pts[s])).fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(bd, _)| d > bd) {
                best = Some((d, j));
            }
        }
        chosen.push(best.unwrap().1);
    }
    chosen
}

/// Inverse-square-distance blend of the three nearest sources.
pub fn interpolate_oracle(targets: &[[f64; 3]], sources: &[[f64; 3]], features: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((targets.len(), features.ncols()));
    for (t, p) in targets.iter().enumerate() {
        let mut all: Vec<(f64, usize)> = sources.iter().enumerate().map(|(j, s)| (sq_dist(p, s), j)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if all[0].0.sqrt() <= 1e-10 {
            out.row_mut(t).assign(&features.row(all[0].1));
            continue;
        }
        let w: Vec<f64> = all[..3].iter().map(|(d2, _)| 1.0 / d2.max(1e-20)).collect();
        let total: f64 = w.iter().sum();
        for (q, (_, j)) in all[..3].iter().enumerate() {
            out.row_mut(t).scaled_add(w[q] / total, &features.row(*j));
        }
    }
    out
}

fn mlp(params: &ParamStore, b: &BranchParams, edge: &Array1<f64>) -> Array1<f64> {
    let mut h = edge.clone();
    for &(w, bias) in &b.layers {
        let wv = params.value(w);
        let mut next = params.value(bias).row(0).to_owned();
        for (o, out) in next.iter_mut().enumerate() {
            for (i, x) in h.iter().enumerate() {
                *out += x * wv[[i, o]];
            }
        }
        h = next.mapv(|v| v.max(0.0));
    }
    h
}

/// Per anchor and branch: build every `(f_j - f_i, f_j)` edge, run the MLP,
/// take the componentwise max; branches concatenated EU then EI.
pub fn gsc_oracle(layer: &GscLayer, params: &ParamStore, f: &Array2<f64>, graph: &NeighborGraph) -> Array2<f64> {
    let c = f.ncols();
    let mut rows = Vec::new();
    for i in 0..f.nrows() {
        for (b, nbrs) in [(&layer.euclidean, &graph.euclid), (&layer.eigen, &graph.eigen)] {
            let Some(b) = b else { continue };
            let mut best: Option<Array1<f64>> = None;
            for &j in nbrs.row(i) {
                let mut e = Array1::zeros(2 * c);
                for ch in 0..c {
                    e[ch] = f[[j, ch]] - f[[i, ch]];
                    e[c + ch] = f[[j, ch]];
                }
                let h = mlp(params, b, &e);
                best = Some(match best {
                    None => h,
                    Some(m) => ndarray::Zip::from(&m).and(&h).map_collect(|a, b| a.max(*b)),
                });
            }
            rows.extend(best.unwrap());
        }
    }
    let n = f.nrows();
    let w = rows.len() / n;
    Array2::from_shape_vec((n, w), rows).unwrap()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    (a - b).iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn random_features(n: usize, c: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, c), |_| rng.random_range(-1.0..1.0))
}
