//! Point-cloud geometry and learning engine built around the Eigen-Graph:
//! per-point structure tensors, their eigenvalue descriptors, neighbor
//! grouping in both Euclidean and eigenvalue space, and a hierarchical
//! network of geometry-similarity-connection (GSC) layers trained with a
//! small reverse-mode differentiation engine.
//!
//! Module map:
//!
//! - [`geometry`]: point clouds, rigid transforms, normalization, augmentation.
//! - [`eigen_graph`]: kNN in both spaces, structure tensors, `eig_sym3`.
//! - [`sampling`]: farthest-point sampling and 3-NN feature interpolation.
//! - [`autodiff`]: tape, parameters, optimizers, gradient checking.
//! - [`net`]: GSC layers, encoder, classification and segmentation heads, training.
//! - [`data_io`]: file formats, synthetic datasets, manifests, dumps.

pub mod autodiff;
pub mod data_io;
pub mod eigen_graph;
pub mod error;
pub mod geometry;
pub mod net;
pub mod sampling;

pub use error::{Error, Result};
pub use geometry::{PointCloud, RigidTransform, RotationAxes};
