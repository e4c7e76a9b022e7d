use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::GscConfig;
use super::model::GsNet;
use crate::autodiff::ParamStore;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "gsnet-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredParam {
    pub name: String,
    pub shape: [usize; 2],
    /// Row-major values.
    pub data: Vec<f64>,
}

/// JSON container of a configuration and the named arrays it produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: GscConfig,
    pub params: Vec<StoredParam>,
}

impl Checkpoint {
    pub fn new(net: &GsNet, params: &ParamStore) -> Result<Self> {
        net.check_params(params)?;
        let params = params
            .iter()
            .map(|(_, p)| {
                if p.value().iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parameter {
                        name: p.name().to_string(),
                        detail: "non-finite values cannot be stored".into(),
                    });
                }
                let (r, c) = p.value().dim();
                Ok(StoredParam {
                    name: p.name().to_string(),
                    shape: [r, c],
                    data: p.value().iter().copied().collect(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: net.config().clone(),
            params,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::InvalidData(format!("not a checkpoint (format `{}`)", c.format)));
        }
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidData(format!(
                "checkpoint version {} unsupported (expected {CHECKPOINT_VERSION})",
                c.version
            )));
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Rebuilds the network from the stored config and fills its parameters.
    pub fn restore(&self) -> Result<(GsNet, ParamStore)> {
        let net = GsNet::new(self.config.clone())?;
        let params = self.params_for(&net)?;
        Ok((net, params))
    }

    /// Parameters for `net`, which must have the same layout as the stored
    /// one; any difference is reported against the offending name.
    pub fn params_for(&self, net: &GsNet) -> Result<ParamStore> {
        let expected = net.param_shapes();
        for (name, _) in expected {
            if !self.params.iter().any(|p| &p.name == name) {
                return Err(Error::Parameter {
                    name: name.clone(),
                    detail: "missing from checkpoint".into(),
                });
            }
        }
        let mut values = std::collections::HashMap::new();
        for p in &self.params {
            let Some((_, dim)) = expected.iter().find(|(n, _)| n == &p.name) else {
                return Err(Error::Parameter {
                    name: p.name.clone(),
                    detail: "not part of this network".into(),
                });
            };
            if (p.shape[0], p.shape[1]) != *dim {
                return Err(Error::Parameter {
                    name: p.name.clone(),
                    detail: format!("checkpoint shape {:?} does not match network shape {dim:?}", p.shape),
                });
            }
            let value = Array2::from_shape_vec(*dim, p.data.clone()).map_err(|_| Error::Parameter {
                name: p.name.clone(),
                detail: format!("{} values for shape {:?}", p.data.len(), p.shape),
            })?;
            if values.insert(p.name.as_str(), value).is_some() {
                return Err(Error::Parameter {
                    name: p.name.clone(),
                    detail: "stored twice".into(),
                });
            }
        }
        // registered in the network's order regardless of file order
        let mut store = ParamStore::new();
        for (name, _) in expected {
            store.register(name.clone(), values.remove(name.as_str()).expect("presence checked"))?;
        }
        net.check_params(&store)?;
        Ok(store)
    }
}
