//! Farthest-point sampling for the encoder hierarchy and inverse-distance
//! interpolation over the three nearest coarse points for the decoder.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Distances below this are treated as coincident when interpolating.
pub const COINCIDENT_DISTANCE: f64 = 1e-10;
/// Inverse-distance power used when none is configured.
pub const DEFAULT_INTERPOLATION_POWER: f64 = 2.0;

/// An ordered selection of distinct rows from a parent cloud.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleSelection {
    pub indices: Vec<usize>,
    pub seed_index: usize,
}

impl SampleSelection {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn identity(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
            seed_index: 0,
        }
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// Greedy farthest-point sampling starting at `seed_index`.
///
/// Each step takes the unselected point whose distance to the selection is
/// largest; ties go to the lowest index.
pub fn fps(cloud: &PointCloud, m: usize, seed_index: usize) -> Result<SampleSelection> {
    let n = cloud.len();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("fps: m = {m} must satisfy 1 <= m <= N = {n}")));
    }
    if seed_index >= n {
        return Err(Error::invalid(format!("fps: seed index {seed_index} out of range for N = {n}")));
    }
    let rows = cloud.to_rows();
    let mut min_d = vec![f64::INFINITY; n];
    let mut indices = Vec::with_capacity(m);
    let mut current = seed_index;
    loop {
        indices.push(current);
        min_d[current] = f64::NEG_INFINITY;
        if indices.len() == m {
            break;
        }
        let anchor = rows[current];
        for (d, p) in min_d.iter_mut().zip(&rows) {
            if *d != f64::NEG_INFINITY {
                *d = d.min(dist2(&anchor, p));
            }
        }
        // first maximum wins, so ties resolve to the lowest index
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (j, &d) in min_d.iter().enumerate() {
            if d > best_d {
                best = j;
                best_d = d;
            }
        }
        current = best;
    }
    Ok(SampleSelection { indices, seed_index })
}

/// FPS with a seed index drawn uniformly from `rng_seed`.
pub fn fps_random_start(cloud: &PointCloud, m: usize, rng_seed: u64) -> Result<SampleSelection> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let start = rng.random_range(0..cloud.len());
    fps(cloud, m, start)
}

/// Every `⌊N/m⌋`-th index starting at 0; the sampler used when FPS is off.
pub fn stride_select(n: usize, m: usize) -> Result<SampleSelection> {
    if m == 0 || m > n {
        return Err(Error::invalid(format!("stride: m = {m} must satisfy 1 <= m <= N = {n}")));
    }
    let step = n / m;
    Ok(SampleSelection {
        indices: (0..m).map(|j| j * step).collect(),
        seed_index: 0,
    })
}

/// Largest distance from any point of the cloud to its nearest selected point.
pub fn covering_radius(cloud: &PointCloud, selection: &SampleSelection) -> f64 {
    let rows = cloud.to_rows();
    rows.iter()
        .map(|p| {
            selection
                .indices
                .iter()
                .map(|&s| dist2(p, &rows[s]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

fn check_selection(selection: &SampleSelection, n: usize) -> Result<()> {
    match selection.indices.iter().find(|&&i| i >= n) {
        Some(bad) => Err(Error::invalid(format!("gather: index {bad} out of range for {n} rows"))),
        None => Ok(()),
    }
}

/// Cloud of the selected points in selection order.
pub fn gather_points(cloud: &PointCloud, selection: &SampleSelection) -> Result<PointCloud> {
    check_selection(selection, cloud.len())?;
    cloud.reordered(&selection.indices)
}

/// Feature rows of the selected points in selection order.
pub fn gather_rows(features: ArrayView2<f64>, selection: &SampleSelection) -> Result<Array2<f64>> {
    check_selection(selection, features.nrows())?;
    Ok(features.select(ndarray::Axis(0), &selection.indices))
}

/// Per target point: three source indices and convex weights.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationPlan {
    pub indices: Vec<[usize; 3]>,
    pub weights: Vec<[f64; 3]>,
    pub source_len: usize,
}

impl InterpolationPlan {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Plan that copies source row `i` to target row `i`.
    pub fn identity(n: usize) -> Self {
        Self {
            indices: (0..n).map(|i| [i, i, i]).collect(),
            weights: vec![[1.0, 0.0, 0.0]; n],
            source_len: n,
        }
    }
}

pub fn plan_interpolation(targets: &PointCloud, sources: &PointCloud) -> Result<InterpolationPlan> {
    plan_interpolation_with_power(targets, sources, DEFAULT_INTERPOLATION_POWER)
}

/// Three nearest sources per target (ties by index) with weights
/// `d_j^-p / Σ d_k^-p`, distances clamped below at [`COINCIDENT_DISTANCE`].
/// A target that coincides with a source copies it.
pub fn plan_interpolation_with_power(
    targets: &PointCloud,
    sources: &PointCloud,
    power: f64,
) -> Result<InterpolationPlan> {
    if sources.len() < 3 {
        return Err(Error::invalid(format!(
            "interpolation needs at least 3 source points, got {}",
            sources.len()
        )));
    }
    if !(power > 0.0) {
        return Err(Error::invalid(format!("interpolation power must be > 0, got {power}")));
    }
    let src = sources.to_rows();
    let tgt = targets.to_rows();
    let (indices, weights): (Vec<[usize; 3]>, Vec<[f64; 3]>) = tgt
        .par_iter()
        .map(|t| {
            let mut best = [(f64::INFINITY, usize::MAX); 3];
            for (j, s) in src.iter().enumerate() {
                let cand = (dist2(t, s), j);
                if cand.0 < best[2].0 {
                    // strict comparison keeps the earlier (lower) index on ties
                    let pos = best.iter().position(|b| cand.0 < b.0).unwrap_or(2);
                    for q in (pos + 1..3).rev() {
                        best[q] = best[q - 1];
                    }
                    best[pos] = cand;
                }
            }
            let idx = [best[0].1, best[1].1, best[2].1];
            let d = best.map(|(d2, _)| d2.sqrt());
            if d[0] <= COINCIDENT_DISTANCE {
                return (idx, [1.0, 0.0, 0.0]);
            }
            let inv = d.map(|x| x.max(COINCIDENT_DISTANCE).powf(-power));
            let total: f64 = inv.iter().sum();
            (idx, inv.map(|w| w / total))
        })
        .unzip();
    Ok(InterpolationPlan {
        indices,
        weights,
        source_len: sources.len(),
    })
}

/// Target row `t` = `Σ_j w_tj · source[idx_tj]`.
pub fn interpolate(plan: &InterpolationPlan, source: ArrayView2<f64>) -> Result<Array2<f64>> {
    if source.ncols() == 0 {
        return Err(Error::invalid("interpolate: source features have width 0"));
    }
    if source.nrows() != plan.source_len {
        return Err(Error::invalid(format!(
            "interpolate: plan expects {} source rows, got {}",
            plan.source_len,
            source.nrows()
        )));
    }
    let mut out = Array2::zeros((plan.len(), source.ncols()));
    for (t, mut row) in out.outer_iter_mut().enumerate() {
        for q in 0..3 {
            let w = plan.weights[t][q];
            if w != 0.0 {
                row.scaled_add(w, &source.row(plan.indices[t][q]));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn line() -> PointCloud {
        PointCloud::from_rows(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [9.0, 0.0, 0.0]]).unwrap()
    }

    #[test]
    fn fps_line_example() {
        assert_eq!(fps(&line(), 3, 0).unwrap().indices, vec![0, 3, 2]);
    }

    #[test]
    fn fps_exhaustion_and_single() {
        let sel = fps(&line(), 4, 2).unwrap();
        assert_eq!(sel.indices[0], 2);
        let mut sorted = sel.indices.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
        assert_eq!(fps(&line(), 1, 1).unwrap().indices, vec![1]);
    }

    #[test]
    fn fps_guards() {
        assert!(fps(&line(), 5, 0).is_err());
        assert!(fps(&line(), 0, 0).is_err());
        assert!(fps(&line(), 2, 4).is_err());
    }

    #[test]
    fn fps_duplicate_points_still_distinct() {
        let c = PointCloud::from_rows(&[[0.0; 3]; 5]).unwrap();
        assert_eq!(fps(&c, 5, 3).unwrap().indices, vec![3, 0, 1, 2, 4]);
    }

    #[test]
    fn stride_selection() {
        assert_eq!(stride_select(10, 3).unwrap().indices, vec![0, 3, 6]);
        assert!(stride_select(3, 4).is_err());
    }

    #[test]
    fn gather_examples() {
        let f = array![[1.0, 1.5], [2.0, 2.5], [3.0, 3.5]];
        let sel = SampleSelection {
            indices: vec![2, 0],
            seed_index: 2,
        };
        assert_eq!(gather_rows(f.view(), &sel).unwrap(), array![[3.0, 3.5], [1.0, 1.5]]);
        assert_eq!(gather_rows(f.view(), &SampleSelection::identity(3)).unwrap(), f);
        let bad = SampleSelection {
            indices: vec![3],
            seed_index: 3,
        };
        assert!(gather_rows(f.view(), &bad).is_err());
        assert!(gather_points(&line(), &SampleSelection { indices: vec![4], seed_index: 4 }).is_err());
    }

    #[test]
    fn interpolation_coincident_target() {
        let sources = line();
        let targets = PointCloud::from_rows(&[[2.0, 0.0, 0.0]]).unwrap();
        let plan = plan_interpolation(&targets, &sources).unwrap();
        assert_eq!(plan.indices[0][0], 2);
        assert_eq!(plan.weights[0], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn interpolation_equidistant() {
        let sources = PointCloud::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [5.0, 5.0, 5.0]]).unwrap();
        let targets = PointCloud::from_rows(&[[0.0, 0.0, 0.0]]).unwrap();
        let plan = plan_interpolation(&targets, &sources).unwrap();
        assert_eq!(plan.indices[0], [0, 1, 2]);
        for w in plan.weights[0] {
            assert!((w - 1.0 / 3.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn interpolation_guards() {
        let two = PointCloud::from_rows(&[[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        assert!(plan_interpolation(&two, &two).is_err());
        let plan = InterpolationPlan::identity(2);
        assert!(interpolate(&plan, Array2::<f64>::zeros((2, 0)).view()).is_err());
        assert!(interpolate(&plan, Array2::<f64>::zeros((3, 1)).view()).is_err());
    }

    #[test]
    fn interpolation_preserves_constants() {
        let sources = line();
        let targets = PointCloud::from_rows(&[[0.3, 0.2, 0.0], [7.0, 1.0, -1.0], [4.0, 0.0, 0.0]]).unwrap();
        let plan = plan_interpolation(&targets, &sources).unwrap();
        let f = Array2::from_elem((4, 3), 2.5);
        let out = interpolate(&plan, f.view()).unwrap();
        for v in out.iter() {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_plan_copies_rows() {
        let f = array![[1.0, -1.0], [2.0, 0.5]];
        assert_eq!(interpolate(&InterpolationPlan::identity(2), f.view()).unwrap(), f);
    }
}
