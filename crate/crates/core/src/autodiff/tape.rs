use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::sampling::InterpolationPlan;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Constant,
    Param(ParamId),
    MatMul { x: Var, w: Var },
    BiasAdd { x: Var, b: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Relu { x: Var },
    SegmentMax { x: Var, argmax: Vec<u32> },
    SegmentMean { x: Var, segment: usize },
    Concat { parts: Vec<Var> },
    Gather { x: Var, idx: Arc<[usize]> },
    SliceRows { x: Var, start: usize },
    Interpolate { x: Var, plan: Arc<InterpolationPlan> },
    Dropout { x: Var, mask: Vec<f64> },
    SoftmaxCrossEntropy { logits: Var, labels: Vec<usize>, probs: Array2<f64> },
}

struct Node {
    value: Array2<f64>,
    op: Op,
    requires_grad: bool,
}

/// Records the forward pass of one computation; [`Tape::backward`] replays
/// it in reverse.
///
/// Node inputs always precede the node, so the graph is acyclic by
/// construction. Adjoints live only inside `backward` and start at zero.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// A trainable parameter read from `store`.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id), true)
    }

    /// `x · w` for `x: r×a`, `w: a×b`.
    pub fn linear(&mut self, x: Var, w: Var) -> Result<Var> {
        let (_, a) = self.shape(x);
        let (wa, _) = self.shape(w);
        if a != wa {
            return Err(Error::shape("linear", format!("{:?} · {:?}", self.shape(x), self.shape(w))));
        }
        let value = self.value(x).dot(self.value(w));
        let rg = self.rg(x) || self.rg(w);
        Ok(self.push(value, Op::MatMul { x, w }, rg))
    }

    /// Adds the `1×c` row `b` to every row of `x`.
    pub fn bias_add(&mut self, x: Var, b: Var) -> Result<Var> {
        let (_, c) = self.shape(x);
        if self.shape(b) != (1, c) {
            return Err(Error::shape("bias_add", format!("{:?} + {:?}", self.shape(x), self.shape(b))));
        }
        let value = self.value(x) + self.value(b);
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(value, Op::BiasAdd { x, b }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape("add", format!("{:?} + {:?}", self.shape(a), self.shape(b))));
        }
        let value = self.value(a) + self.value(b);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add { a, b }, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape("subtract", format!("{:?} - {:?}", self.shape(a), self.shape(b))));
        }
        let value = self.value(a) - self.value(b);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Sub { a, b }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let mut value = self.value(x).as_standard_layout().into_owned();
        for v in value.as_slice_mut().expect("standard layout") {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let rg = self.rg(x);
        self.push(value, Op::Relu { x }, rg)
    }

    /// Componentwise max over consecutive blocks of `segment` rows.
    ///
    /// Output row `s` is the max of input rows `s·segment .. (s+1)·segment`.
    /// The gradient is routed to the winning row, the lowest on exact ties.
    pub fn segment_max(&mut self, x: Var, segment: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if segment == 0 || r % segment != 0 {
            return Err(Error::shape("max_pool", format!("{r} rows do not split into segments of {segment}")));
        }
        let groups = r / segment;
        let xv = self.value(x).as_standard_layout();
        let data = xv.as_slice().expect("standard layout");
        let mut value = vec![0.0; groups * c];
        let mut argmax = vec![0u32; groups * c];
        for g in 0..groups {
            let base = g * segment;
            let best = &mut value[g * c..(g + 1) * c];
            let arg = &mut argmax[g * c..(g + 1) * c];
            best.copy_from_slice(&data[base * c..(base + 1) * c]);
            arg.fill(base as u32);
            for rr in base + 1..base + segment {
                let row = &data[rr * c..(rr + 1) * c];
                for ((b, a), &v) in best.iter_mut().zip(arg.iter_mut()).zip(row) {
                    if v > *b {
                        *b = v;
                        *a = rr as u32;
                    }
                }
            }
        }
        let value = Array2::from_shape_vec((groups, c), value).expect("sized above");
        let rg = self.rg(x);
        Ok(self.push(value, Op::SegmentMax { x, argmax }, rg))
    }

    /// Componentwise mean over consecutive blocks of `segment` rows.
    pub fn segment_mean(&mut self, x: Var, segment: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if segment == 0 || r % segment != 0 {
            return Err(Error::shape("mean_pool", format!("{r} rows do not split into segments of {segment}")));
        }
        let xv = self.value(x);
        let value = xv
            .to_shape((r / segment, segment, c))
            .map_err(|e| Error::shape("mean_pool", e.to_string()))?
            .mean_axis(Axis(1))
            .expect("segment is non-empty");
        let rg = self.rg(x);
        Ok(self.push(value, Op::SegmentMean { x, segment }, rg))
    }

    /// Column-wise concatenation of equally tall blocks.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::shape("concat", "no inputs"));
        };
        let rows = self.shape(first).0;
        if let Some(bad) = parts.iter().find(|p| self.shape(**p).0 != rows) {
            return Err(Error::shape("concat", format!("{rows} rows vs {:?}", self.shape(*bad))));
        }
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|p| self.value(*p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).map_err(|e| Error::shape("concat", e.to_string()))?;
        let rg = parts.iter().any(|p| self.rg(*p));
        Ok(self.push(value, Op::Concat { parts: parts.to_vec() }, rg))
    }

    /// Rows of `x` picked by `idx` (repeats allowed).
    pub fn gather(&mut self, x: Var, idx: Arc<[usize]>) -> Result<Var> {
        let r = self.shape(x).0;
        if let Some(bad) = idx.iter().find(|&&i| i >= r) {
            return Err(Error::shape("gather", format!("index {bad} out of range for {r} rows")));
        }
        let value = self.value(x).select(Axis(0), &idx);
        let rg = self.rg(x);
        Ok(self.push(value, Op::Gather { x, idx }, rg))
    }

    /// Contiguous rows `range` of `x`.
    pub fn slice_rows(&mut self, x: Var, range: std::ops::Range<usize>) -> Result<Var> {
        let r = self.shape(x).0;
        if range.start > range.end || range.end > r {
            return Err(Error::shape("slice_rows", format!("{range:?} out of range for {r} rows")));
        }
        let value = self.value(x).slice(s![range.clone(), ..]).to_owned();
        let rg = self.rg(x);
        Ok(self.push(value, Op::SliceRows { x, start: range.start }, rg))
    }

    /// Inverse-distance blend of rows of `x` per `plan`.
    pub fn interpolate(&mut self, x: Var, plan: Arc<InterpolationPlan>) -> Result<Var> {
        let value = crate::sampling::interpolate(&plan, self.value(x).view())
            .map_err(|e| Error::shape("interpolate", e.to_string()))?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Interpolate { x, plan }, rg))
    }

    /// Inverted dropout: zeroes entries with probability `rate` and scales
    /// survivors by `1/(1-rate)`. The mask is a pure function of `seed`.
    /// Rate 0 returns `x` itself.
    pub fn dropout(&mut self, x: Var, rate: f64, seed: u64) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::shape("dropout", format!("rate {rate} outside [0, 1)")));
        }
        if rate == 0.0 {
            return Ok(x);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.value(x).len())
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let mut value = self.value(x).clone();
        for (v, m) in value.iter_mut().zip(&mask) {
            *v *= m;
        }
        let rg = self.rg(x);
        Ok(self.push(value, Op::Dropout { x, mask }, rg))
    }

    /// Mean over rows of `-log softmax(logits_r)[labels_r]`, as a 1×1 node.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (r, c) = self.shape(logits);
        if labels.len() != r || r == 0 {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("{} labels for {r} rows", labels.len()),
            ));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::shape("softmax_cross_entropy", format!("label {bad} >= {c} classes")));
        }
        let lv = self.value(logits);
        let mut probs = Array2::zeros((r, c));
        let mut total = 0.0;
        for (i, row) in lv.outer_iter().enumerate() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let mut z = 0.0;
            for (p, &v) in probs.row_mut(i).iter_mut().zip(row.iter()) {
                *p = (v - max).exp();
                z += *p;
            }
            probs.row_mut(i).mapv_inplace(|p| p / z);
            total += max + z.ln() - row[labels[i]];
        }
        let value = Array2::from_elem((1, 1), total / r as f64);
        let rg = self.rg(logits);
        Ok(self.push(
            value,
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Softmax probabilities recorded by a cross-entropy node.
    pub fn probabilities(&self, loss: Var) -> Option<&Array2<f64>> {
        match &self.nodes[loss.0].op {
            Op::SoftmaxCrossEntropy { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Hash of every discrete routing decision (ReLU signs, max-pool
    /// winners). Two runs with equal signatures lie on the same smooth piece.
    pub fn signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu { x } => {
                    for &v in self.nodes[x.0].value.iter() {
                        (v > 0.0).hash(&mut h);
                    }
                }
                Op::SegmentMax { argmax, .. } => argmax.hash(&mut h),
                _ => {}
            }
        }
        h.finish()
    }

    /// Reverse pass from a 1×1 node; returns adjoints of every parameter read.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::shape("backward", format!("loss has shape {:?}", self.shape(loss))));
        }
        let mut adj: Vec<Option<Array2<f64>>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(Array2::ones((1, 1)));
        let mut grads = Gradients::default();

        for id in (0..=loss.0).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(pid) => grads.accumulate(*pid, g),
                Op::MatMul { x, w } => {
                    if self.rg(*x) {
                        let gx = g.dot(&self.value(*w).t());
                        accumulate(&mut adj, *x, gx);
                    }
                    if self.rg(*w) {
                        let gw = self.value(*x).t().dot(&g);
                        accumulate(&mut adj, *w, gw);
                    }
                }
                Op::BiasAdd { x, b } => {
                    if self.rg(*b) {
                        let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        accumulate(&mut adj, *b, gb);
                    }
                    if self.rg(*x) {
                        accumulate(&mut adj, *x, g);
                    }
                }
                Op::Add { a, b } => {
                    if self.rg(*b) {
                        accumulate(&mut adj, *b, g.clone());
                    }
                    if self.rg(*a) {
                        accumulate(&mut adj, *a, g);
                    }
                }
                Op::Sub { a, b } => {
                    if self.rg(*b) {
                        accumulate(&mut adj, *b, -&g);
                    }
                    if self.rg(*a) {
                        accumulate(&mut adj, *a, g);
                    }
                }
                Op::Relu { x } => {
                    let mut gx = g;
                    ndarray::Zip::from(&mut gx)
                        .and(&self.nodes[x.0].value)
                        .for_each(|gv, &xv| {
                            if xv <= 0.0 {
                                *gv = 0.0;
                            }
                        });
                    accumulate(&mut adj, *x, gx);
                }
                Op::SegmentMax { x, argmax } => {
                    let (r, c) = self.shape(*x);
                    let mut gx = Array2::zeros((r, c));
                    for (out_row, grow) in g.outer_iter().enumerate() {
                        for (ch, &gv) in grow.iter().enumerate() {
                            gx[[argmax[out_row * c + ch] as usize, ch]] += gv;
                        }
                    }
                    accumulate(&mut adj, *x, gx);
                }
                Op::SegmentMean { x, segment } => {
                    let (r, c) = self.shape(*x);
                    let scale = 1.0 / *segment as f64;
                    let mut gx = Array2::zeros((r, c));
                    for (row, mut out) in gx.outer_iter_mut().enumerate() {
                        out.scaled_add(scale, &g.row(row / segment));
                    }
                    accumulate(&mut adj, *x, gx);
                }
                Op::Concat { parts } => {
                    let mut col = 0;
                    for p in parts {
                        let w = self.shape(*p).1;
                        if self.rg(*p) {
                            accumulate(&mut adj, *p, g.slice(s![.., col..col + w]).to_owned());
                        }
                        col += w;
                    }
                }
                Op::Gather { x, idx } => {
                    let mut gx = Array2::zeros(self.shape(*x));
                    for (row, &src) in idx.iter().enumerate() {
                        let mut target = gx.row_mut(src);
                        target += &g.row(row);
                    }
                    accumulate(&mut adj, *x, gx);
                }
                Op::SliceRows { x, start } => {
                    let mut gx = Array2::zeros(self.shape(*x));
                    gx.slice_mut(s![*start..*start + g.nrows(), ..]).assign(&g);
                    accumulate(&mut adj, *x, gx);
                }
                Op::Interpolate { x, plan } => {
                    let mut gx = Array2::zeros(self.shape(*x));
                    for (t, grow) in g.outer_iter().enumerate() {
                        for q in 0..3 {
                            let w = plan.weights[t][q];
                            if w != 0.0 {
                                gx.row_mut(plan.indices[t][q]).scaled_add(w, &grow);
                            }
                        }
                    }
                    accumulate(&mut adj, *x, gx);
                }
                Op::Dropout { x, mask } => {
                    let mut gx = g;
                    for (v, m) in gx.iter_mut().zip(mask) {
                        *v *= m;
                    }
                    accumulate(&mut adj, *x, gx);
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    labels,
                    probs,
                } => {
                    let upstream = g[[0, 0]] / labels.len() as f64;
                    let mut gl = probs.clone();
                    for (i, &l) in labels.iter().enumerate() {
                        gl[[i, l]] -= 1.0;
                    }
                    gl.mapv_inplace(|v| v * upstream);
                    accumulate(&mut adj, *logits, gl);
                }
            }
        }
        Ok(grads)
    }
}

fn accumulate(adj: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
    match &mut adj[v.0] {
        Some(existing) => *existing += &g,
        slot => *slot = Some(g),
    }
}
