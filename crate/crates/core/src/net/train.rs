use std::time::Instant;

use ndarray::ArrayView1;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hierarchy::Hierarchy;
use super::model::{GsNet, NetworkOutput};
use crate::autodiff::{seeded_rng, Gradients, Optimizer, OptimizerConfig, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// A cloud with its precomputed hierarchy and labels.
#[derive(Clone, Debug)]
pub struct Sample {
    pub hierarchy: Hierarchy,
    /// Class label, or the object category for segmentation.
    pub label: usize,
    /// Part label of every level-1 point (segmentation only).
    pub part_labels: Option<Vec<usize>>,
}

impl Sample {
    pub fn classification(net: &GsNet, cloud: &PointCloud, label: usize) -> Result<Self> {
        if label >= net.config().classes {
            return Err(Error::invalid(format!("label {label} >= {} classes", net.config().classes)));
        }
        Ok(Self {
            hierarchy: net.hierarchy(cloud, 0)?,
            label,
            part_labels: None,
        })
    }

    /// `parts` holds one label per input point; it is carried over to the
    /// level-1 subsample.
    pub fn segmentation(net: &GsNet, cloud: &PointCloud, category: usize, parts: &[usize]) -> Result<Self> {
        let seg = net
            .config()
            .segmentation
            .as_ref()
            .ok_or_else(|| Error::invalid("network was built for classification"))?;
        if parts.len() != cloud.len() {
            return Err(Error::invalid(format!("{} part labels for {} points", parts.len(), cloud.len())));
        }
        if category >= seg.categories {
            return Err(Error::invalid(format!("category {category} >= {}", seg.categories)));
        }
        if let Some(bad) = parts.iter().find(|&&p| p >= seg.parts) {
            return Err(Error::invalid(format!("part label {bad} >= {}", seg.parts)));
        }
        let hierarchy = net.hierarchy(cloud, 0)?;
        let part_labels = hierarchy.level1_indices().iter().map(|&i| parts[i]).collect();
        Ok(Self {
            hierarchy,
            label: category,
            part_labels: Some(part_labels),
        })
    }
}

/// Builds classification samples in parallel; order is preserved.
pub fn prepare_classification(net: &GsNet, items: &[(PointCloud, usize)]) -> Result<Vec<Sample>> {
    items
        .par_iter()
        .map(|(c, l)| Sample::classification(net, c, *l))
        .collect()
}

pub fn prepare_segmentation(net: &GsNet, items: &[(PointCloud, usize, Vec<usize>)]) -> Result<Vec<Sample>> {
    items
        .par_iter()
        .map(|(c, cat, parts)| Sample::segmentation(net, c, *cat, parts))
        .collect()
}

/// Loss and hit counts of one optimizer step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepStats {
    pub loss: f64,
    /// Correct predictions (clouds or points) under the training-mode pass.
    pub correct: usize,
    pub count: usize,
}

fn mix(seed: u64, step: usize, item: usize) -> u64 {
    let mut z = seed
        ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (item as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn sample_loss(net: &GsNet, params: &ParamStore, s: &Sample, dropout_seed: u64) -> Result<(f64, usize, usize, Gradients)> {
    let mut tape = Tape::new();
    let (logits, labels): (_, Vec<usize>) = match (&net.config().segmentation, &s.part_labels) {
        (None, _) => (net.classify(&mut tape, params, &s.hierarchy, Some(dropout_seed))?, vec![s.label]),
        (Some(seg), Some(parts)) => {
            let mut onehot = vec![0.0; seg.categories];
            onehot[s.label] = 1.0;
            (net.segment(&mut tape, params, &s.hierarchy, &onehot)?, parts.clone())
        }
        (Some(_), None) => return Err(Error::invalid("segmentation sample without part labels")),
    };
    let loss = tape.softmax_cross_entropy(logits, &labels)?;
    let correct = tape
        .value(logits)
        .outer_iter()
        .zip(&labels)
        .filter(|(row, &l)| argmax(row.view()) == l)
        .count();
    let value = tape.scalar(loss);
    let grads = tape.backward(loss)?;
    Ok((value, correct, labels.len(), grads))
}

/// One optimizer step on the mean loss of `batch`.
///
/// Per-sample passes may run in parallel; gradients are summed in batch
/// order so results do not depend on the thread count. A non-finite loss or
/// gradient aborts with [`Error::Divergence`] before parameters change.
pub fn train_step(
    net: &GsNet,
    params: &mut ParamStore,
    optimizer: &mut Optimizer,
    batch: &[&Sample],
    lr: f64,
    step: usize,
    seed: u64,
) -> Result<StepStats> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let shared: &ParamStore = params;
    let results: Vec<_> = batch
        .par_iter()
        .enumerate()
        .map(|(i, s)| sample_loss(net, shared, s, mix(seed, step, i)))
        .collect::<Result<_>>()?;
    let mut grads = Gradients::default();
    let mut stats = StepStats::default();
    for (loss, correct, count, g) in results {
        stats.loss += loss;
        stats.correct += correct;
        stats.count += count;
        grads.merge(g);
    }
    stats.loss /= batch.len() as f64;
    grads.scale(1.0 / batch.len() as f64);
    let finite = grads.iter().all(|(_, g)| g.iter().all(|v| v.is_finite()));
    if !stats.loss.is_finite() || !finite {
        return Err(Error::Divergence { step, loss: stats.loss });
    }
    optimizer.step(params, &grads, lr);
    Ok(stats)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            learning_rate: 1e-3,
            lr_decay: 0.95,
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub learning_rate: f64,
    /// Seconds since training started.
    pub wall_time: f64,
}

/// Mini-batch training over a seeded shuffle of `train`. `on_epoch` sees
/// every finished epoch and may abort by returning an error.
pub fn fit<F>(
    net: &GsNet,
    params: &mut ParamStore,
    train: &[Sample],
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<Vec<EpochRecord>>
where
    F: FnMut(&EpochRecord, &ParamStore) -> Result<()>,
{
    if train.is_empty() || config.batch_size == 0 {
        return Err(Error::invalid("training needs samples and a positive batch size"));
    }
    if !(config.learning_rate >= 0.0) || !(config.lr_decay > 0.0) {
        return Err(Error::invalid("learning rate must be >= 0 and decay > 0"));
    }
    let start = Instant::now();
    let mut optimizer = Optimizer::new(config.optimizer);
    let mut rng = seeded_rng(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut lr = config.learning_rate;
    let mut step = 0;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = StepStats::default();
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train[i]).collect();
            let s = train_step(net, params, &mut optimizer, &batch, lr, step, config.seed)?;
            step += 1;
            batches += 1;
            total.loss += s.loss;
            total.correct += s.correct;
            total.count += s.count;
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            step,
            loss: total.loss / batches as f64,
            train_accuracy: total.correct as f64 / total.count as f64,
            learning_rate: lr,
            wall_time: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record, params)?;
        history.push(record);
        lr *= config.lr_decay;
    }
    Ok(history)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    /// `None` for classes absent from the evaluated set.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub count: usize,
}

/// Predicted class of every sample, evaluated in parallel.
pub fn predict_classes(net: &GsNet, params: &ParamStore, samples: &[Sample]) -> Result<Vec<usize>> {
    samples
        .par_iter()
        .map(|s| match net.predict(params, &s.hierarchy, None)? {
            NetworkOutput::Classification(l) => Ok(argmax(l.row(0))),
            NetworkOutput::Segmentation(_) => Err(Error::invalid("network was built for segmentation")),
        })
        .collect()
}

pub fn evaluate_classification(net: &GsNet, params: &ParamStore, samples: &[Sample]) -> Result<ClassificationMetrics> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples to evaluate"));
    }
    let classes = net.config().classes;
    let predicted = predict_classes(net, params, samples)?;
    let mut confusion = vec![vec![0; classes]; classes];
    for (s, &p) in samples.iter().zip(&predicted) {
        confusion[s.label][p] += 1;
    }
    let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();
    let per_class_accuracy = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let n: usize = row.iter().sum();
            (n > 0).then(|| row[c] as f64 / n as f64)
        })
        .collect();
    Ok(ClassificationMetrics {
        accuracy: correct as f64 / samples.len() as f64,
        per_class_accuracy,
        confusion,
        count: samples.len(),
    })
}

/// Mean IoU over `parts` for one shape. A part absent from both prediction
/// and truth counts as IoU 1.
pub fn shape_iou(predicted: &[usize], truth: &[usize], parts: &[usize]) -> f64 {
    if parts.is_empty() {
        return 1.0;
    }
    let total: f64 = parts
        .iter()
        .map(|&p| {
            let (mut inter, mut union) = (0usize, 0usize);
            for (&a, &b) in predicted.iter().zip(truth) {
                let (x, y) = (a == p, b == p);
                inter += (x && y) as usize;
                union += (x || y) as usize;
            }
            if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            }
        })
        .sum();
    total / parts.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentationMetrics {
    /// Mean over shapes of the per-shape mIoU.
    pub instance_miou: f64,
    /// Mean over categories present of their shapes' mean mIoU.
    pub class_miou: f64,
    pub per_category_miou: Vec<Option<f64>>,
    pub point_accuracy: f64,
}

/// Per-point part predictions, restricted to the parts of each sample's
/// category.
pub fn predict_parts(net: &GsNet, params: &ParamStore, samples: &[Sample]) -> Result<Vec<Vec<usize>>> {
    let seg = net
        .config()
        .segmentation
        .as_ref()
        .ok_or_else(|| Error::invalid("network was built for classification"))?;
    samples
        .par_iter()
        .map(|s| {
            let NetworkOutput::Segmentation(logits) = net.predict(params, &s.hierarchy, Some(s.label))? else {
                unreachable!("segmentation network")
            };
            let allowed = &seg.category_parts[s.label];
            Ok(logits
                .outer_iter()
                .map(|row| {
                    let mut best = allowed.first().copied().unwrap_or_else(|| argmax(row));
                    for &p in allowed {
                        if row[p] > row[best] {
                            best = p;
                        }
                    }
                    best
                })
                .collect())
        })
        .collect()
}

pub fn evaluate_segmentation(net: &GsNet, params: &ParamStore, samples: &[Sample]) -> Result<SegmentationMetrics> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples to evaluate"));
    }
    let seg = net.config().segmentation.as_ref().expect("checked by predict_parts");
    let predicted = predict_parts(net, params, samples)?;
    let mut per_cat = vec![(0.0, 0usize); seg.categories];
    let (mut inst, mut hits, mut points) = (0.0, 0usize, 0usize);
    for (s, pred) in samples.iter().zip(&predicted) {
        let truth = s.part_labels.as_ref().ok_or_else(|| Error::invalid("sample without part labels"))?;
        let iou = shape_iou(pred, truth, &seg.category_parts[s.label]);
        inst += iou;
        per_cat[s.label].0 += iou;
        per_cat[s.label].1 += 1;
        hits += pred.iter().zip(truth).filter(|(a, b)| a == b).count();
        points += truth.len();
    }
    let per_category_miou: Vec<Option<f64>> =
        per_cat.iter().map(|&(s, n)| (n > 0).then(|| s / n as f64)).collect();
    let present: Vec<f64> = per_category_miou.iter().flatten().copied().collect();
    Ok(SegmentationMetrics {
        instance_miou: inst / samples.len() as f64,
        class_miou: present.iter().sum::<f64>() / present.len() as f64,
        per_category_miou,
        point_accuracy: hits as f64 / points as f64,
    })
}
