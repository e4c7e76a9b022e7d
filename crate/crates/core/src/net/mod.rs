//! Geometry Similarity Connection network.
//!
//! Each encoder level groups features over two neighbor sets: Euclidean
//! kNN (EU branch) and kNN in eigenvalue space (EI branch). Each branch runs
//! its own shared edge MLP and max-pool, and the two pooled vectors are
//! concatenated. Levels are linked by farthest-point sampling. A
//! classification head pools every level globally (max and mean); a
//! segmentation head interpolates every level back to level-1 points.

mod check;
mod checkpoint;
mod config;
mod features;
mod hierarchy;
mod layer;
mod model;
mod train;

pub use check::network_grad_check;
pub use checkpoint::{Checkpoint, StoredParam, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{Branches, GscConfig, InputRecipe, LevelConfig, Sampler, SegmentationConfig};
pub use features::{group_features, input_recipe, standardize_columns, Branch, EdgeFeatureBlock, FeatureMap, InputEdges};
pub use hierarchy::{Hierarchy, LevelGeometry};
pub use layer::{gsc_forward, BranchParams, EdgeIndex, GraphIndex, GscInput, GscLayer};
pub use model::{encoder_forward, GsNet, NetworkOutput};
pub use train::{
    evaluate_classification, evaluate_segmentation, fit, predict_classes, predict_parts, prepare_classification,
    prepare_segmentation, shape_iou, train_step, ClassificationMetrics, EpochRecord, Sample, SegmentationMetrics,
    StepStats, TrainConfig,
};
