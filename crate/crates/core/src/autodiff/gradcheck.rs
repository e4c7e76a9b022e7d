use serde::Serialize;

use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Knobs for [`grad_check_with`].
#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Denominator floor: error is `|a - n| / max(|a|, |n|, abs_floor)`.
    pub abs_floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            abs_floor: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub entries: usize,
    /// Entries whose ±step evaluation changed a ReLU sign or max-pool winner.
    pub skipped: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub step: f64,
    pub params: Vec<ParamCheck>,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }
}

pub fn grad_check<F>(params: &mut ParamStore, forward: F, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(Tape, Var)>,
{
    grad_check_with(params, forward, tolerance, GradCheckOptions::default())
}

/// Compares backprop gradients with central differences for every entry of
/// every parameter. A parameter passes when its worst relative error is
/// strictly below `tolerance`.
///
/// The forward closure must be deterministic; two evaluations at the same
/// point that disagree produce [`Error::ContractViolation`]. Entries whose
/// perturbation crosses a non-smooth point (detected through
/// [`Tape::signature`]) are skipped and counted.
pub fn grad_check_with<F>(
    params: &mut ParamStore,
    forward: F,
    tolerance: f64,
    options: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(Tape, Var)>,
{
    let (tape, loss) = forward(params)?;
    let base_loss = tape.scalar(loss);
    let base_sig = tape.signature();
    let grads = tape.backward(loss)?;
    drop(tape);

    let (again, again_loss) = forward(params)?;
    if again.scalar(again_loss).to_bits() != base_loss.to_bits() || again.signature() != base_sig {
        return Err(Error::ContractViolation(
            "forward pass is not deterministic; fix dropout masks and seeds before checking".into(),
        ));
    }
    drop(again);

    let h = options.step;
    let ids: Vec<_> = params.ids().collect();
    let mut checks = Vec::with_capacity(ids.len());
    for id in ids {
        let analytic = grads
            .get(id)
            .cloned()
            .unwrap_or_else(|| ndarray::Array2::zeros(params.value(id).dim()));
        let (rows, cols) = params.value(id).dim();
        let mut max_err: f64 = 0.0;
        let mut skipped = 0;
        for r in 0..rows {
            for c in 0..cols {
                let original = params.value(id)[[r, c]];
                params.value_mut(id)[[r, c]] = original + h;
                let (tp, lp) = forward(params)?;
                params.value_mut(id)[[r, c]] = original - h;
                let (tm, lm) = forward(params)?;
                params.value_mut(id)[[r, c]] = original;
                if tp.signature() != base_sig || tm.signature() != base_sig {
                    skipped += 1;
                    continue;
                }
                let numeric = (tp.scalar(lp) - tm.scalar(lm)) / (2.0 * h);
                let a = analytic[[r, c]];
                let denom = a.abs().max(numeric.abs()).max(options.abs_floor);
                let err = (a - numeric).abs() / denom;
                max_err = max_err.max(if err.is_nan() { f64::INFINITY } else { err });
            }
        }
        checks.push(ParamCheck {
            name: params.name(id).to_string(),
            entries: rows * cols,
            skipped,
            max_rel_error: max_err,
            passed: max_err < tolerance,
        });
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(GradCheckReport {
        tolerance,
        step: h,
        params: checks,
        passed,
    })
}
