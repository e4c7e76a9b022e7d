use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use super::config::Branches;
use super::features::FeatureMap;
use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::eigen_graph::{NeighborGraph, NeighborRows};
use crate::error::{Error, Result};

/// Flattened gather indices for one branch: row `i·k + s` of an edge block
/// pairs anchor `anchor[i·k + s] = i` with neighbor `neighbor[i·k + s]`.
#[derive(Clone, Debug)]
pub struct EdgeIndex {
    pub k: usize,
    pub anchor: Arc<[usize]>,
    pub neighbor: Arc<[usize]>,
}

impl EdgeIndex {
    pub fn new(rows: &NeighborRows) -> Self {
        let k = rows.k();
        let anchor: Vec<usize> = (0..rows.len()).flat_map(|i| std::iter::repeat_n(i, k)).collect();
        Self {
            k,
            anchor: anchor.into(),
            neighbor: rows.as_flat().into(),
        }
    }
}

/// Gather indices for both branches of a level.
#[derive(Clone, Debug)]
pub struct GraphIndex {
    pub euclidean: EdgeIndex,
    pub eigen: EdgeIndex,
}

impl GraphIndex {
    pub fn new(graph: &NeighborGraph) -> Self {
        Self {
            euclidean: EdgeIndex::new(&graph.euclid),
            eigen: EdgeIndex::new(&graph.eigen),
        }
    }
}

/// Weight and bias of every layer of one branch's shared edge MLP.
#[derive(Clone, Debug)]
pub struct BranchParams {
    pub in_width: usize,
    pub layers: Vec<(ParamId, ParamId)>,
}

/// Parameters of one Geometry Similarity Connection level.
#[derive(Clone, Debug)]
pub struct GscLayer {
    pub level: usize,
    pub euclidean: Option<BranchParams>,
    pub eigen: Option<BranchParams>,
    pub out_width: usize,
}

/// What a GSC level consumes.
pub enum GscInput<'a> {
    /// Precomputed edge rows and neighbor count per active branch (level 1).
    Edges {
        euclidean: Option<(Var, usize)>,
        eigen: Option<(Var, usize)>,
    },
    /// Per-point features grouped on the fly as `(f_j - f_i, f_j)`.
    Features { features: Var, index: &'a GraphIndex },
}

impl GscLayer {
    /// Registers `level{l}.{eu,ei}.layer{j}.{weight,bias}`. Each branch ends
    /// at `widths.last() / 2` channels when both are active.
    pub fn register(
        store: &mut ParamStore,
        level: usize,
        branches: Branches,
        in_widths: (usize, usize),
        widths: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let out_width = *widths
            .last()
            .ok_or_else(|| Error::invalid(format!("level {level} has no MLP widths")))?;
        if branches == Branches::Both && out_width % 2 != 0 {
            return Err(Error::invalid(format!("level {level} output width {out_width} is odd")));
        }
        let mut branch = |tag: &str, in_width: usize| -> Result<BranchParams> {
            let mut dims: Vec<usize> = widths.to_vec();
            if branches == Branches::Both {
                *dims.last_mut().unwrap() /= 2;
            }
            let mut layers = Vec::with_capacity(dims.len());
            let mut fan_in = in_width;
            for (j, &w) in dims.iter().enumerate() {
                let prefix = format!("level{level}.{tag}.layer{j}");
                let wid = store.register_he(format!("{prefix}.weight"), fan_in, w, rng)?;
                let bid = store.register(format!("{prefix}.bias"), ndarray::Array2::zeros((1, w)))?;
                layers.push((wid, bid));
                fan_in = w;
            }
            Ok(BranchParams { in_width, layers })
        };
        let euclidean = if branches.euclidean() {
            Some(branch("eu", in_widths.0)?)
        } else {
            None
        };
        let eigen = if branches.eigen() {
            Some(branch("ei", in_widths.1)?)
        } else {
            None
        };
        Ok(Self {
            level,
            euclidean,
            eigen,
            out_width,
        })
    }

    /// Records the level on `tape` and returns its `N × C_out` output.
    pub fn forward(&self, tape: &mut Tape, params: &ParamStore, input: GscInput<'_>) -> Result<Var> {
        let mut outs = Vec::with_capacity(2);
        match input {
            GscInput::Edges { euclidean, eigen } => {
                for (branch, edges, name) in [(&self.euclidean, euclidean, "EU"), (&self.eigen, eigen, "EI")] {
                    match (branch, edges) {
                        (Some(b), Some((x, k))) => outs.push(self.branch_edges(tape, params, b, x, k)?),
                        (None, None) => {}
                        _ => {
                            return Err(Error::invalid(format!(
                                "level {}: {name} branch input does not match the configured branches",
                                self.level
                            )))
                        }
                    }
                }
            }
            GscInput::Features { features, index } => {
                if let Some(b) = &self.euclidean {
                    outs.push(self.branch_grouped(tape, params, b, features, &index.euclidean)?);
                }
                if let Some(b) = &self.eigen {
                    outs.push(self.branch_grouped(tape, params, b, features, &index.eigen)?);
                }
            }
        }
        if outs.len() == 1 {
            Ok(outs[0])
        } else {
            tape.concat(&outs)
        }
    }

    fn branch_edges(&self, tape: &mut Tape, params: &ParamStore, b: &BranchParams, x: Var, k: usize) -> Result<Var> {
        let width = tape.value(x).ncols();
        if width != b.in_width {
            return Err(Error::invalid(format!(
                "level {}: edge width {width} does not match first-layer input width {}",
                self.level, b.in_width
            )));
        }
        let (w, bias) = b.layers[0];
        let wv = tape.param(params, w);
        let h = tape.linear(x, wv)?;
        let h = self.finish(tape, params, b, h, bias)?;
        tape.segment_max(h, k)
    }

    fn branch_grouped(
        &self,
        tape: &mut Tape,
        params: &ParamStore,
        b: &BranchParams,
        features: Var,
        index: &EdgeIndex,
    ) -> Result<Var> {
        let c = tape.value(features).ncols();
        if 2 * c != b.in_width {
            return Err(Error::invalid(format!(
                "level {}: grouped width {} does not match first-layer input width {}",
                self.level,
                2 * c,
                b.in_width
            )));
        }
        // (f_j - f_i)·W_d + f_j·W_f = f_j·(W_d + W_f) - f_i·W_d
        let (w, bias) = b.layers[0];
        let wv = tape.param(params, w);
        let wd = tape.slice_rows(wv, 0..c)?;
        let wf = tape.slice_rows(wv, c..2 * c)?;
        let sum = tape.add(wd, wf)?;
        let p = tape.linear(features, sum)?;
        let q = tape.linear(features, wd)?;
        let pj = tape.gather(p, index.neighbor.clone())?;
        let qi = tape.gather(q, index.anchor.clone())?;
        let h = tape.sub(pj, qi)?;
        let h = self.finish(tape, params, b, h, bias)?;
        tape.segment_max(h, index.k)
    }

    /// Bias + ReLU of the first layer, then the remaining layers.
    fn finish(&self, tape: &mut Tape, params: &ParamStore, b: &BranchParams, h: Var, bias: ParamId) -> Result<Var> {
        let bv = tape.param(params, bias);
        let mut h = tape.bias_add(h, bv)?;
        h = tape.relu(h);
        for &(w, bias) in &b.layers[1..] {
            let wv = tape.param(params, w);
            let bv = tape.param(params, bias);
            h = tape.linear(h, wv)?;
            h = tape.bias_add(h, bv)?;
            h = tape.relu(h);
        }
        Ok(h)
    }
}

/// Runs one level on grouped per-point features and returns its output.
pub fn gsc_forward(
    layer: &GscLayer,
    params: &ParamStore,
    features: &FeatureMap,
    graph: &NeighborGraph,
) -> Result<FeatureMap> {
    graph.euclid.validate_for(features.len())?;
    graph.eigen.validate_for(features.len())?;
    let index = GraphIndex::new(graph);
    let mut tape = Tape::new();
    let f = tape.constant(features.rows.clone());
    let out = layer.forward(
        &mut tape,
        params,
        GscInput::Features {
            features: f,
            index: &index,
        },
    )?;
    FeatureMap::new(tape.value(out).clone(), layer.level)
}
