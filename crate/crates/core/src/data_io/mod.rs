//! Cloud file formats (XYZ, OFF, ASCII PLY), synthetic labeled corpora,
//! rotation protocols, experiment manifests and text dumps.

mod dumps;
mod formats;
mod manifest;
mod synth;

pub use dumps::{descriptors_csv, descriptors_jsonl, graph_jsonl, JsonlLog};
pub use formats::{format_cloud, parse_cloud, read_cloud, write_cloud, CloudFormat};
pub use manifest::{DatasetSpec, ExperimentManifest, FileEntry, FileListSpec, MANIFEST_FORMAT, MANIFEST_VERSION};
pub use synth::{
    apply_protocol, parts_segmentation_config, protocol_rotation, sample_shape, synth_dataset, synth_parts, Dataset,
    LabeledCloudSet, PartsSpec, Protocol, ShapeKind, Split, SynthSpec, JITTER_CLIP, MIN_POINTS, PART_CATEGORIES,
};
