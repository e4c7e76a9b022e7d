use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::formats::{read_cloud, CloudFormat};
use super::synth::{synth_dataset, synth_parts, Dataset, LabeledCloudSet, PartsSpec, Protocol, Split, SynthSpec};
use crate::error::{Error, Result};
use crate::net::{GscConfig, TrainConfig};

pub const MANIFEST_FORMAT: &str = "gsnet-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: PathBuf,
    pub label: usize,
    /// Inferred from the extension when absent.
    #[serde(default)]
    pub format: Option<CloudFormat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileListSpec {
    pub class_names: Vec<String>,
    pub train: Vec<FileEntry>,
    pub test: Vec<FileEntry>,
}

/// Where the clouds of an experiment come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSpec {
    Synthetic(SynthSpec),
    Parts(PartsSpec),
    /// Cloud files listed with labels; relative paths resolve against the
    /// directory of the file that holds the spec.
    Files(FileListSpec),
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic(SynthSpec::default())
    }
}

fn load_files(list: &[FileEntry], split: Split, spec: &FileListSpec, base: &Path) -> Result<LabeledCloudSet> {
    let mut clouds = Vec::with_capacity(list.len());
    for entry in list {
        let path = if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            base.join(&entry.path)
        };
        let format = match entry.format {
            Some(f) => f,
            None => CloudFormat::from_path(&path)?,
        };
        clouds.push(read_cloud(&path, format)?);
    }
    let set = LabeledCloudSet {
        split,
        clouds,
        labels: list.iter().map(|e| e.label).collect(),
        parts: None,
        class_names: spec.class_names.clone(),
        seed: 0,
    };
    set.validate()?;
    Ok(set)
}

impl DatasetSpec {
    /// Generates or reads both splits.
    pub fn load(&self, base: &Path) -> Result<Dataset> {
        match self {
            DatasetSpec::Synthetic(s) => synth_dataset(s),
            DatasetSpec::Parts(s) => synth_parts(s),
            DatasetSpec::Files(f) => Ok(Dataset {
                train: load_files(&f.train, Split::Train, f, base)?,
                test: load_files(&f.test, Split::Test, f, base)?,
            }),
        }
    }
}

/// A complete, reproducible experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub format: String,
    pub version: u32,
    pub model: GscConfig,
    pub dataset: DatasetSpec,
    pub protocol: Protocol,
    pub protocol_seed: u64,
    /// Seed of the parameter initialization.
    pub init_seed: u64,
    pub training: TrainConfig,
}

impl Default for ExperimentManifest {
    fn default() -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            model: GscConfig::desk(),
            dataset: DatasetSpec::default(),
            protocol: Protocol::None,
            protocol_seed: 0,
            init_seed: 0,
            training: TrainConfig::default(),
        }
    }
}

impl ExperimentManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: ExperimentManifest = serde_json::from_str(text)?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::InvalidData(format!("not a manifest (format `{}`)", m.format)));
        }
        if m.version != MANIFEST_VERSION {
            return Err(Error::InvalidData(format!(
                "manifest version {} unsupported (expected {MANIFEST_VERSION})",
                m.version
            )));
        }
        m.model.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// The dataset with the manifest's protocol applied.
    pub fn dataset(&self, base: &Path) -> Result<Dataset> {
        let data = self.dataset.load(base)?;
        Ok(super::synth::apply_protocol(&data, self.protocol, self.protocol_seed))
    }
}
