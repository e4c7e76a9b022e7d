use crate::autodiff::{grad_check_with, GradCheckOptions, GradCheckReport, ParamStore, Tape};
use crate::error::{Error, Result};

use super::model::GsNet;
use super::train::Sample;

/// Finite-difference check of every parameter of `net` on the summed
/// training loss of `samples`. Dropout runs with fixed masks derived from
/// `dropout_seed`, so the checked function is deterministic.
pub fn network_grad_check(
    net: &GsNet,
    params: &mut ParamStore,
    samples: &[Sample],
    dropout_seed: u64,
    tolerance: f64,
    options: GradCheckOptions,
) -> Result<GradCheckReport> {
    if samples.is_empty() {
        return Err(Error::invalid("gradient check needs at least one sample"));
    }
    net.check_params(params)?;
    let forward = |p: &ParamStore| -> Result<_> {
        let mut tape = Tape::new();
        let mut total = None;
        for (i, s) in samples.iter().enumerate() {
            let (logits, labels) = match (&net.config().segmentation, &s.part_labels) {
                (None, _) => (
                    net.classify(&mut tape, p, &s.hierarchy, Some(dropout_seed.wrapping_add(1000 * i as u64)))?,
                    vec![s.label],
                ),
                (Some(seg), Some(parts)) => {
                    let mut onehot = vec![0.0; seg.categories];
                    onehot[s.label] = 1.0;
                    (net.segment(&mut tape, p, &s.hierarchy, &onehot)?, parts.clone())
                }
                (Some(_), None) => return Err(Error::invalid("segmentation sample without part labels")),
            };
            let loss = tape.softmax_cross_entropy(logits, &labels)?;
            total = Some(match total {
                None => loss,
                Some(t) => tape.add(t, loss)?,
            });
        }
        Ok((tape, total.expect("non-empty")))
    };
    grad_check_with(params, forward, tolerance, options)
}
