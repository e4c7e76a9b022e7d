use ndarray::Array2;

use super::config::GscConfig;
use super::features::FeatureMap;
use super::hierarchy::Hierarchy;
use super::layer::{GscInput, GscLayer};
use crate::autodiff::{seeded_rng, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Per-cloud network outputs.
#[derive(Clone, Debug, PartialEq)]
pub enum NetworkOutput {
    /// `1 × classes` logits.
    Classification(Array2<f64>),
    /// `N × parts` logits over level-1 points.
    Segmentation(Array2<f64>),
}

/// The hierarchical GSC encoder with its classification or segmentation
/// head. Holds only the parameter layout; values live in a [`ParamStore`]
/// produced by [`GsNet::init_params`] or loaded from a checkpoint.
#[derive(Clone, Debug)]
pub struct GsNet {
    config: GscConfig,
    layers: Vec<GscLayer>,
    head: Vec<(ParamId, ParamId)>,
    seg_head: Vec<(ParamId, ParamId)>,
    shapes: Vec<(String, (usize, usize))>,
}

fn dense_stack(
    store: &mut ParamStore,
    prefix: &str,
    in_width: usize,
    widths: &[usize],
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Vec<(ParamId, ParamId)>> {
    let mut fan_in = in_width;
    let mut out = Vec::with_capacity(widths.len());
    for (j, &w) in widths.iter().enumerate() {
        let wid = store.register_he(format!("{prefix}{j}.weight"), fan_in, w, rng)?;
        let bid = store.register(format!("{prefix}{j}.bias"), Array2::zeros((1, w)))?;
        out.push((wid, bid));
        fan_in = w;
    }
    Ok(out)
}

impl GsNet {
    pub fn new(config: GscConfig) -> Result<Self> {
        Ok(Self::build(config, 0)?.0)
    }

    /// Fresh He-initialized weights and zero biases.
    pub fn init_params(&self, seed: u64) -> ParamStore {
        Self::build(self.config.clone(), seed)
            .expect("config validated at construction")
            .1
    }

    fn build(config: GscConfig, seed: u64) -> Result<(Self, ParamStore)> {
        config.validate()?;
        let mut rng = seeded_rng(seed);
        let mut store = ParamStore::new();
        let mut layers = Vec::with_capacity(config.levels.len());
        let mut prev = 0;
        for (l, level) in config.levels.iter().enumerate() {
            let in_widths = if l == 0 {
                (config.recipe.euclidean_channels(), config.recipe.eigen_channels())
            } else {
                (2 * prev, 2 * prev)
            };
            layers.push(GscLayer::register(
                &mut store,
                l + 1,
                config.branches,
                in_widths,
                &level.widths,
                &mut rng,
            )?);
            prev = *level.widths.last().unwrap();
        }
        let mut head = Vec::new();
        let mut seg_head = Vec::new();
        match &config.segmentation {
            None => {
                let mut widths = config.head_widths.clone();
                widths.push(config.classes);
                head = dense_stack(&mut store, "head.fc", config.global_width(), &widths, &mut rng)?;
            }
            Some(seg) => {
                let in_width = config.level_widths().iter().sum::<usize>() + seg.categories;
                let mut widths = seg.widths.clone();
                widths.push(seg.parts);
                seg_head = dense_stack(&mut store, "seg.fc", in_width, &widths, &mut rng)?;
            }
        }
        let shapes = store.iter().map(|(_, p)| (p.name().to_string(), p.value().dim())).collect();
        Ok((
            Self {
                config,
                layers,
                head,
                seg_head,
                shapes,
            },
            store,
        ))
    }

    pub fn config(&self) -> &GscConfig {
        &self.config
    }

    pub fn layers(&self) -> &[GscLayer] {
        &self.layers
    }

    /// Parameter names and shapes in registration order.
    pub fn param_shapes(&self) -> &[(String, (usize, usize))] {
        &self.shapes
    }

    pub fn is_segmentation(&self) -> bool {
        self.config.segmentation.is_some()
    }

    /// Checks that `params` has exactly this network's names and shapes.
    pub fn check_params(&self, params: &ParamStore) -> Result<()> {
        for (i, (name, dim)) in self.shapes.iter().enumerate() {
            match params.iter().nth(i) {
                Some((_, p)) if p.name() == name && p.value().dim() == *dim => {}
                Some((_, p)) if p.name() == name => {
                    return Err(Error::Parameter {
                        name: name.clone(),
                        detail: format!("shape {:?}, expected {dim:?}", p.value().dim()),
                    })
                }
                _ => {
                    return Err(Error::Parameter {
                        name: name.clone(),
                        detail: "missing or out of order".into(),
                    })
                }
            }
        }
        if params.len() != self.shapes.len() {
            let extra = params.iter().nth(self.shapes.len()).map(|(_, p)| p.name().to_string());
            return Err(Error::Parameter {
                name: extra.unwrap_or_default(),
                detail: "not part of this network".into(),
            });
        }
        Ok(())
    }

    pub fn hierarchy(&self, cloud: &PointCloud, fps_seed: usize) -> Result<Hierarchy> {
        Hierarchy::build(cloud, &self.config, fps_seed)
    }

    /// Records the encoder; returns each level's `N_l × C_l` features.
    pub fn encode(&self, tape: &mut Tape, params: &ParamStore, h: &Hierarchy) -> Result<Vec<Var>> {
        if h.levels.len() != self.layers.len() {
            return Err(Error::invalid(format!(
                "hierarchy has {} levels, network has {}",
                h.levels.len(),
                self.layers.len()
            )));
        }
        let edges = h.input_edges(&self.config)?;
        let eu = edges.euclidean.map(|b| (tape.constant(b.rows), b.k));
        let ei = edges.eigen.map(|b| (tape.constant(b.rows), b.k));
        let mut out = Vec::with_capacity(self.layers.len());
        let mut f = self.layers[0].forward(tape, params, GscInput::Edges { euclidean: eu, eigen: ei })?;
        out.push(f);
        for (layer, level) in self.layers[1..].iter().zip(&h.levels[1..]) {
            let down = tape.gather(f, level.selection_idx.clone())?;
            f = layer.forward(
                tape,
                params,
                GscInput::Features {
                    features: down,
                    index: &level.index,
                },
            )?;
            out.push(f);
        }
        Ok(out)
    }

    /// Per-level global max and mean pools, concatenated: width `Σ 2·C_l`.
    pub fn global_descriptor(&self, tape: &mut Tape, levels: &[Var]) -> Result<Var> {
        if levels.is_empty() {
            return Err(Error::invalid("global descriptor needs at least one level"));
        }
        let mut pooled = Vec::with_capacity(2 * levels.len());
        for &f in levels {
            let n = tape.value(f).nrows();
            pooled.push(tape.segment_max(f, n)?);
            pooled.push(tape.segment_mean(f, n)?);
        }
        tape.concat(&pooled)
    }

    /// Class logits (`1 × classes`). Dropout runs only when a seed is given.
    pub fn classify(&self, tape: &mut Tape, params: &ParamStore, h: &Hierarchy, dropout_seed: Option<u64>) -> Result<Var> {
        if self.head.is_empty() {
            return Err(Error::invalid("network was built for segmentation"));
        }
        let levels = self.encode(tape, params, h)?;
        let mut x = self.global_descriptor(tape, &levels)?;
        let last = self.head.len() - 1;
        for (j, &(w, b)) in self.head.iter().enumerate() {
            let wv = tape.param(params, w);
            let bv = tape.param(params, b);
            x = tape.linear(x, wv)?;
            x = tape.bias_add(x, bv)?;
            if j < last {
                x = tape.relu(x);
                if let Some(seed) = dropout_seed {
                    x = tape.dropout(x, self.config.dropout, seed.wrapping_add(j as u64))?;
                }
            }
        }
        Ok(x)
    }

    /// Per-point part logits (`N_1 × parts`) given the category one-hot.
    pub fn segment(&self, tape: &mut Tape, params: &ParamStore, h: &Hierarchy, onehot: &[f64]) -> Result<Var> {
        let Some(seg) = &self.config.segmentation else {
            return Err(Error::invalid("network was built for classification"));
        };
        if onehot.len() != seg.categories {
            return Err(Error::invalid(format!(
                "one-hot label has length {}, expected {} categories",
                onehot.len(),
                seg.categories
            )));
        }
        let levels = self.encode(tape, params, h)?;
        let n1 = tape.value(levels[0]).nrows();
        let mut parts = vec![levels[0]];
        for (&f, plan) in levels[1..].iter().zip(&h.upsample) {
            parts.push(tape.interpolate(f, plan.clone())?);
        }
        let label = Array2::from_shape_fn((n1, onehot.len()), |(_, c)| onehot[c]);
        parts.push(tape.constant(label));
        let mut x = tape.concat(&parts)?;
        let last = self.seg_head.len() - 1;
        for (j, &(w, b)) in self.seg_head.iter().enumerate() {
            let wv = tape.param(params, w);
            let bv = tape.param(params, b);
            x = tape.linear(x, wv)?;
            x = tape.bias_add(x, bv)?;
            if j < last {
                x = tape.relu(x);
            }
        }
        Ok(x)
    }

    /// Evaluation-mode forward pass without gradient bookkeeping kept.
    pub fn predict(&self, params: &ParamStore, h: &Hierarchy, category: Option<usize>) -> Result<NetworkOutput> {
        let mut tape = Tape::new();
        match &self.config.segmentation {
            None => {
                let logits = self.classify(&mut tape, params, h, None)?;
                Ok(NetworkOutput::Classification(tape.value(logits).clone()))
            }
            Some(seg) => {
                let c = category.ok_or_else(|| Error::invalid("segmentation needs a category"))?;
                if c >= seg.categories {
                    return Err(Error::invalid(format!("category {c} >= {}", seg.categories)));
                }
                let mut onehot = vec![0.0; seg.categories];
                onehot[c] = 1.0;
                let logits = self.segment(&mut tape, params, h, &onehot)?;
                Ok(NetworkOutput::Segmentation(tape.value(logits).clone()))
            }
        }
    }
}

/// Runs the encoder on `cloud` and returns every level's points and features.
pub fn encoder_forward(
    net: &GsNet,
    params: &ParamStore,
    cloud: &PointCloud,
    fps_seed: usize,
) -> Result<Vec<(PointCloud, FeatureMap)>> {
    let h = net.hierarchy(cloud, fps_seed)?;
    let mut tape = Tape::new();
    let levels = net.encode(&mut tape, params, &h)?;
    levels
        .iter()
        .zip(&h.levels)
        .enumerate()
        .map(|(l, (&v, geo))| Ok((geo.cloud.clone(), FeatureMap::new(tape.value(v).clone(), l + 1)?)))
        .collect()
}
