use std::sync::Arc;

use super::config::{GscConfig, Sampler};
use super::features::{input_recipe, standardize_columns, InputEdges};
use super::layer::GraphIndex;
use crate::eigen_graph::{build_graph, EigenDescriptorSet, NeighborGraph};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::sampling::{fps, gather_points, plan_interpolation_with_power, stride_select, InterpolationPlan, SampleSelection};

/// Geometry of one encoder level.
#[derive(Clone, Debug)]
pub struct LevelGeometry {
    pub cloud: PointCloud,
    /// Indices into the previous level's cloud (into the input for level 1).
    pub selection: SampleSelection,
    pub graph: NeighborGraph,
    pub descriptors: EigenDescriptorSet,
    pub index: GraphIndex,
    pub(crate) selection_idx: Arc<[usize]>,
}

/// Everything non-learned a forward pass needs for one cloud: sampled
/// levels, their graphs and descriptors, and the upsampling plans of the
/// segmentation decoder. Built once per cloud and reused across epochs.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub levels: Vec<LevelGeometry>,
    /// Plans from level `l` back to level 1, for `l >= 2`.
    pub upsample: Vec<Arc<InterpolationPlan>>,
    /// True when level 1 is the input cloud itself rather than a subsample.
    pub level1_is_input: bool,
}

impl Hierarchy {
    /// `fps_seed` is the starting index of the first farthest-point pass
    /// that runs on the input ordering.
    pub fn build(cloud: &PointCloud, config: &GscConfig, fps_seed: usize) -> Result<Self> {
        config.validate()?;
        let n = cloud.len();
        for (l, level) in config.levels.iter().enumerate() {
            if level.points > n {
                return Err(Error::invalid(format!(
                    "level {} needs {} points but the cloud has N = {n}",
                    l + 1,
                    level.points
                )));
            }
        }
        let select = |src: &PointCloud, m: usize, seed: usize| -> Result<SampleSelection> {
            match config.sampler {
                Sampler::Fps => fps(src, m, seed),
                Sampler::Stride => stride_select(src.len(), m),
            }
        };

        let mut levels: Vec<LevelGeometry> = Vec::with_capacity(config.levels.len());
        let level1_is_input = config.levels[0].points == n;
        for (l, level) in config.levels.iter().enumerate() {
            let (src, input_order) = match levels.last() {
                None => (cloud, true),
                Some(prev) => (&prev.cloud, l == 1 && level1_is_input),
            };
            let selection = if l == 0 && level1_is_input {
                SampleSelection::identity(n)
            } else {
                select(src, level.points, if input_order { fps_seed } else { 0 })?
            };
            let sub = if l == 0 && level1_is_input {
                cloud.clone()
            } else {
                gather_points(src, &selection)?
            };
            let (graph, descriptors) = build_graph(&sub, config.k1, config.k2)?;
            levels.push(LevelGeometry {
                index: GraphIndex::new(&graph),
                selection_idx: selection.indices.clone().into(),
                cloud: sub,
                selection,
                graph,
                descriptors,
            });
        }

        let upsample = if config.segmentation.is_some() {
            levels[1..]
                .iter()
                .map(|lv| {
                    plan_interpolation_with_power(&levels[0].cloud, &lv.cloud, config.interpolation_power).map(Arc::new)
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(Self {
            levels,
            upsample,
            level1_is_input,
        })
    }

    /// Level-1 edge blocks per the configured recipe.
    pub fn input_edges(&self, config: &GscConfig) -> Result<InputEdges> {
        let l1 = &self.levels[0];
        let mut edges = input_recipe(&l1.cloud, &l1.descriptors, &l1.graph, config.recipe, config.branches)?;
        if config.standardize_inputs {
            for block in [&mut edges.euclidean, &mut edges.eigen].into_iter().flatten() {
                standardize_columns(&mut block.rows);
            }
        }
        Ok(edges)
    }

    /// Input-cloud indices of the level-1 points.
    pub fn level1_indices(&self) -> &[usize] {
        &self.levels[0].selection.indices
    }
}
