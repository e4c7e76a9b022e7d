mod common;

use common::*;
use gsnet::autodiff::ParamStore;
use gsnet::eigen_graph::{build_graph, eigen_descriptors, knn_eigen, knn_euclidean, NeighborGraph, NeighborRows};
use gsnet::net::{gsc_forward, Branches, FeatureMap, GscLayer};
use gsnet::sampling::{fps, gather_points, interpolate, plan_interpolation};
use gsnet::PointCloud;
use proptest::prelude::*;
use rand::Rng;

fn rows_of(r: &NeighborRows) -> Vec<Vec<usize>> {
    r.rows().map(<[usize]>::to_vec).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn euclidean_knn_matches_full_sort(seed in any::<u64>(), n in 2usize..=64, kf in 0.0f64..1.0) {
        let pts = random_rows(n, &mut rng(seed));
        let k = 1 + (kf * (n - 1) as f64) as usize % (n - 1);
        let cloud = PointCloud::from_rows(&pts).unwrap();
        prop_assert_eq!(rows_of(&knn_euclidean(&cloud, k).unwrap()), knn_oracle(&pts, k));
    }

    #[test]
    fn eigen_knn_matches_full_sort(seed in any::<u64>(), n in 8usize..=64, k2 in 1usize..8) {
        let cloud = random_cloud(n, &mut rng(seed));
        let d = eigen_descriptors(&cloud, 6).unwrap();
        let lambdas: Vec<[f64; 3]> = d.lambdas.clone();
        prop_assert_eq!(rows_of(&knn_eigen(&d, k2).unwrap()), knn_oracle(&lambdas, k2));
    }

    #[test]
    fn gridded_ties_follow_index_order(n in 3usize..=40, k in 1usize..3) {
        // points on a line with unit spacing: many exact distance ties
        let pts: Vec<[f64; 3]> = (0..n).map(|i| [i as f64, 0.0, 0.0]).collect();
        let cloud = PointCloud::from_rows(&pts).unwrap();
        prop_assert_eq!(rows_of(&knn_euclidean(&cloud, k).unwrap()), knn_oracle(&pts, k));
        prop_assert_eq!(fps(&cloud, n, n / 2).unwrap().indices, fps_oracle(&pts, n, n / 2));
    }

    #[test]
    fn fps_matches_recomputed_distances(seed in any::<u64>(), n in 1usize..=64, mf in 0.0f64..1.0, sf in 0.0f64..1.0) {
        let pts = random_rows(n, &mut rng(seed));
        let m = 1 + ((mf * n as f64) as usize).min(n - 1);
        let start = ((sf * n as f64) as usize).min(n - 1);
        let cloud = PointCloud::from_rows(&pts).unwrap();
        let sel = fps(&cloud, m, start).unwrap();
        prop_assert_eq!(&sel.indices, &fps_oracle(&pts, m, start));
        let mut sorted = sel.indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), m);
    }

    #[test]
    fn interpolation_matches_blend(seed in any::<u64>(), n in 3usize..=64, c in 1usize..6) {
        let mut r = rng(seed);
        let targets = random_rows(n, &mut r);
        let sources: Vec<[f64; 3]> = targets.iter().step_by(2).copied().chain(random_rows(3, &mut r)).collect();
        let f = random_features(sources.len(), c, &mut r);
        let plan = plan_interpolation(
            &PointCloud::from_rows(&targets).unwrap(),
            &PointCloud::from_rows(&sources).unwrap(),
        )
        .unwrap();
        let got = interpolate(&plan, f.view()).unwrap();
        prop_assert!(max_abs_diff(&got, &interpolate_oracle(&targets, &sources, &f)) <= 1e-12);
        // targets that are sources copy their features
        for t in (0..n).step_by(2) {
            prop_assert_eq!(got.row(t), f.row(t / 2));
        }
    }

    #[test]
    fn gsc_matches_edge_loop(seed in any::<u64>(), n in 4usize..=64, c in 1usize..5, b in 0usize..3) {
        let mut r = rng(seed);
        let branches = [Branches::Both, Branches::Euclidean, Branches::Eigen][b];
        let cloud = random_cloud(n, &mut r);
        let k = r.random_range(1..n.min(8));
        let (graph, _) = build_graph(&cloud, k, k).unwrap();
        let mut store = ParamStore::new();
        let layer = GscLayer::register(&mut store, 2, branches, (2 * c, 2 * c), &[6, 4], &mut r.clone()).unwrap();
        for id in store.ids().collect::<Vec<_>>() {
            store.value_mut(id).mapv_inplace(|v| v + 0.05);
        }
        let f = random_features(n, c, &mut r);
        let got = gsc_forward(&layer, &store, &FeatureMap::new(f.clone(), 1).unwrap(), &graph).unwrap();
        prop_assert!(max_abs_diff(&got.rows, &gsc_oracle(&layer, &store, &f, &graph)) <= 1e-12);
    }

    #[test]
    fn gather_keeps_selected_rows(seed in any::<u64>(), n in 1usize..=64) {
        let cloud = random_cloud(n, &mut rng(seed));
        let sel = fps(&cloud, n.div_ceil(2), 0).unwrap();
        let sub = gather_points(&cloud, &sel).unwrap();
        for (r, &i) in sel.indices.iter().enumerate() {
            prop_assert_eq!(sub.point(r), cloud.point(i));
        }
    }
}

#[test]
fn neighbor_row_shuffle_is_exact() {
    let mut r = rng(11);
    let cloud = random_cloud(64, &mut r);
    let (graph, _) = build_graph(&cloud, 10, 10).unwrap();
    let mut store = ParamStore::new();
    let layer = GscLayer::register(&mut store, 1, Branches::Both, (6, 6), &[16, 8], &mut r.clone()).unwrap();
    let f = FeatureMap::new(random_features(64, 3, &mut r), 1).unwrap();
    let base = gsc_forward(&layer, &store, &f, &graph).unwrap();
    let shuffle = |rows: &NeighborRows, r: &mut rand_chacha::ChaCha8Rng| {
        use rand::seq::SliceRandom;
        let mut flat = Vec::new();
        for row in rows.rows() {
            let mut row = row.to_vec();
            row.shuffle(r);
            flat.extend(row);
        }
        NeighborRows::from_flat(rows.k(), flat).unwrap()
    };
    for _ in 0..5 {
        let g = NeighborGraph {
            euclid: shuffle(&graph.euclid, &mut r),
            eigen: shuffle(&graph.eigen, &mut r),
        };
        assert_eq!(gsc_forward(&layer, &store, &f, &g).unwrap().rows, base.rows);
    }
}
