mod common;

use common::*;
use gsnet::data_io::{format_cloud, parse_cloud, synth_dataset, CloudFormat, SynthSpec};
use gsnet::eigen_graph::{build_graph, eig_sym3, eigen_descriptors, knn_euclidean, structure_tensors};
use gsnet::geometry::{apply_transform, jitter, normalize_unit_sphere};
use gsnet::PointCloud;
use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::Rng;

fn random_psd(seed: u64) -> Matrix3<f64> {
    let mut r = rng(seed);
    let mut m = Matrix3::zeros();
    for _ in 0..r.random_range(0..6) {
        let v = nalgebra::Vector3::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
        m += v * v.transpose();
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn eig_sym3_agrees_with_library_solver(seed in any::<u64>()) {
        let c = random_psd(seed);
        let e = eig_sym3(&c).unwrap();
        let scale = c.amax().max(1.0);
        prop_assert!(e.values[0] >= e.values[1] && e.values[1] >= e.values[2] && e.values[2] >= 0.0);
        prop_assert!((e.reconstruct() - c).amax() <= 1e-10 * scale);
        prop_assert!((e.vectors.transpose() * e.vectors - Matrix3::identity()).amax() <= 1e-10);
        let mut reference: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in e.values.iter().zip(&reference) {
            prop_assert!((a - b.max(0.0)).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn rigid_motion_keeps_eigenvalues(seed in any::<u64>(), n in 24usize..=96) {
        let mut r = rng(seed);
        let cloud = random_cloud(n, &mut r);
        let t = random_motion(&mut r, 3.0);
        let moved = apply_transform(&cloud, &t);
        let a = eigen_descriptors(&cloud, 10).unwrap();
        let b = eigen_descriptors(&moved, 10).unwrap();
        for (x, y) in a.lambdas.iter().zip(&b.lambdas) {
            for c in 0..3 {
                prop_assert!((x[c] - y[c]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn rigid_motion_keeps_neighbor_rows(seed in any::<u64>(), n in 12usize..=64) {
        let mut r = rng(seed);
        let cloud = random_cloud(n, &mut r);
        let t = random_motion(&mut r, 3.0);
        let moved = apply_transform(&cloud, &t);
        prop_assert_eq!(knn_euclidean(&cloud, 5).unwrap(), knn_euclidean(&moved, 5).unwrap());
        let inverse = apply_transform(&moved, &t.inverse());
        for (p, q) in cloud.points().iter().zip(inverse.points()) {
            prop_assert!((p - q).norm() <= 1e-12);
        }
    }

    #[test]
    fn tensor_trace_is_neighbor_spread(seed in any::<u64>(), n in 8usize..=48) {
        let pts = random_rows(n, &mut rng(seed));
        let cloud = PointCloud::from_rows(&pts).unwrap();
        let rows = knn_euclidean(&cloud, 5).unwrap();
        let t = structure_tensors(&cloud, &rows).unwrap();
        let d = eigen_descriptors(&cloud, 5).unwrap();
        for i in 0..n {
            let spread: f64 = rows.row(i).iter().map(|&j| sq_dist(&pts[i], &pts[j])).sum();
            prop_assert!((t.tensors[i].trace() - spread).abs() <= 1e-12 * spread.max(1.0));
            prop_assert!((d.lambdas[i].iter().sum::<f64>() - spread).abs() <= 1e-10 * spread.max(1.0));
        }
    }

    #[test]
    fn reordering_points_reorders_descriptors(seed in any::<u64>(), n in 12usize..=48) {
        let mut r = rng(seed);
        let cloud = random_cloud(n, &mut r);
        let mut order: Vec<usize> = (0..n).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut r);
        let (g, d) = build_graph(&cloud, 6, 6).unwrap();
        let (gp, dp) = build_graph(&cloud.reordered(&order).unwrap(), 6, 6).unwrap();
        for (new, &old) in order.iter().enumerate() {
            prop_assert_eq!(dp.lambdas[new], d.lambdas[old]);
            let mut mapped: Vec<usize> = gp.euclid.row(new).iter().map(|&j| order[j]).collect();
            let mut want = g.euclid.row(old).to_vec();
            mapped.sort_unstable();
            want.sort_unstable();
            prop_assert_eq!(mapped, want);
        }
    }

    #[test]
    fn normalization_bounds(seed in any::<u64>(), n in 1usize..=64, s in 0.01f64..100.0) {
        let cloud = random_cloud(n, &mut rng(seed)).scaled(s).unwrap();
        let u = normalize_unit_sphere(&cloud);
        let norms: Vec<f64> = u.points().iter().map(|p| p.coords.norm()).collect();
        prop_assert!(u.centroid().coords.norm() <= 1e-12);
        let max = norms.iter().copied().fold(0.0, f64::max);
        prop_assert!(n == 1 && max == 0.0 || (max - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn jitter_respects_clip(seed in any::<u64>(), sigma in 0.0f64..1.0, clip in 0.001f64..0.1) {
        let cloud = random_cloud(16, &mut rng(seed));
        let j = jitter(&cloud, sigma, clip, seed).unwrap();
        for (p, q) in cloud.points().iter().zip(j.points()) {
            prop_assert!((p - q).amax() <= clip + 1e-12);
        }
        prop_assert_eq!(j, jitter(&cloud, sigma, clip, seed).unwrap());
    }

    #[test]
    fn text_formats_round_trip(seed in any::<u64>(), n in 1usize..=32, e in -300i32..300) {
        let mut r = rng(seed);
        let rows: Vec<[f64; 3]> = (0..n)
            .map(|_| [r.random::<f64>() * 10f64.powi(e), -r.random::<f64>(), f64::from_bits(r.random::<u64>() >> 2)])
            .collect();
        let cloud = PointCloud::from_rows(&rows).unwrap();
        for format in [CloudFormat::Xyz, CloudFormat::Off, CloudFormat::PlyAscii] {
            let back = parse_cloud(&format_cloud(&cloud, format), format).unwrap();
            let bits = |c: &PointCloud| c.to_rows().iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&cloud));
        }
    }
}

#[test]
fn synthetic_corpus_is_a_pure_function_of_its_spec() {
    let spec = SynthSpec {
        n_points: 64,
        per_class: 5,
        ..SynthSpec::default()
    };
    let a = synth_dataset(&spec).unwrap();
    let b = synth_dataset(&spec).unwrap();
    assert_eq!(a.train.clouds, b.train.clouds);
    assert_eq!(a.test.labels, b.test.labels);
    let c = synth_dataset(&SynthSpec { seed: 1, ..spec }).unwrap();
    assert_ne!(a.train.clouds, c.train.clouds);
}
