//! Central finite-difference verification of tape gradients.

use rand::rngs::StdRng;
use rand::seq::index::sample;
use rand::SeedableRng;

use crate::error::Result;
use crate::param::ParamSet;
use crate::tape::{Tape, Var};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Check at most this many coordinates of each parameter.
    pub max_coords_per_param: Option<usize>,
    /// Coordinates whose base point lies this close to a relu or max kink
    /// are skipped.
    pub kink_margin: f64,
    /// Denominator floor for the relative error.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            max_coords_per_param: None,
            kink_margin: 1e-6,
            abs_floor: 1e-7,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    /// Parameters with `requires_grad == false`; they are not checked.
    pub frozen: Vec<String>,
}

fn evaluate<F>(params: &ParamSet, loss_fn: &mut F) -> Result<(f64, Option<crate::tape::KinkSummary>)>
where
    F: FnMut(&ParamSet, &mut Tape) -> Result<Var>,
{
    let mut tape = Tape::with_kink_tracking();
    let loss = loss_fn(params, &mut tape)?;
    Ok((tape.value(loss).item(), tape.kink_summary()))
}

/// Compares tape gradients of `loss_fn` against
/// `(L(θ+ε) - L(θ-ε)) / 2ε` for every (or a sampled subset of) trainable
/// coordinate. `loss_fn` must be deterministic.
pub fn gradient_check<F>(params: &mut ParamSet, mut loss_fn: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: FnMut(&ParamSet, &mut Tape) -> Result<Var>,
{
    let mut tape = Tape::with_kink_tracking();
    let loss = loss_fn(params, &mut tape)?;
    let grads = tape.backward(loss)?;
    let base_sig = tape.kink_summary().map(|k| k.signature);

    let mut report = GradCheckReport::default();
    let mut rng = StdRng::seed_from_u64(opts.seed);
    let ids: Vec<_> = params.iter().map(|(id, _)| id).collect();
    for id in ids {
        let (name, len, trainable) = {
            let p = params.get(id);
            (p.name().to_string(), p.value.len(), p.requires_grad)
        };
        if !trainable {
            report.frozen.push(name);
            continue;
        }
        let analytic = grads.param(id).unwrap_or_else(|| vec![0.0; len]);
        let coords: Vec<usize> = match opts.max_coords_per_param {
            Some(k) if k < len => sample(&mut rng, len, k).into_vec(),
            _ => (0..len).collect(),
        };
        for c in coords {
            let orig = params.get(id).value.data()[c];
            params.get_mut(id).value.data_mut()[c] = orig + opts.eps;
            let (up, k_up) = evaluate(params, &mut loss_fn)?;
            params.get_mut(id).value.data_mut()[c] = orig - opts.eps;
            let (down, k_down) = evaluate(params, &mut loss_fn)?;
            params.get_mut(id).value.data_mut()[c] = orig;

            let near_kink = match (k_up, k_down) {
                (Some(a), Some(b)) => {
                    Some(a.signature) != base_sig
                        || Some(b.signature) != base_sig
                        || tape.kink_summary().is_some_and(|k| k.min_margin < opts.kink_margin)
                }
                _ => false,
            };
            if near_kink {
                report.skipped_kinks += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * opts.eps);
            let a = analytic[c];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(opts.abs_floor);
            report.checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((name.clone(), c));
            }
        }
    }
    Ok(report)
}
