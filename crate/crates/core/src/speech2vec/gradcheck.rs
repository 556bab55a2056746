//! Central finite-difference check of the analytic gradient.

use rand::Rng;

use super::corpus::PaddedWord;
use super::model::{batch_loss, grad};
use super::params::ModelParams;
use super::{S2vError, MFCC_DIM};
use crate::rng;

/// Default central-difference step.
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Relative error is `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub n_params: usize,
    pub max_rel_error: f64,
    /// Flat index and tensor name of the worst parameter.
    pub worst_index: usize,
    pub worst_tensor: String,
    pub analytic: f64,
    pub numeric: f64,
}

/// Random sentences of padded words with valid lengths in
/// `1..=fixed_frames`, frame values in [-1, 1), and nonzero padding so that
/// any leak of padded frames into the loss would show.
pub fn random_batch(seed: u64, sentences: usize, sentence_len: usize, fixed_frames: usize) -> Vec<Vec<PaddedWord>> {
    let mut r = rng::substream(seed, 0x6763);
    (0..sentences)
        .map(|_| {
            (0..sentence_len)
                .map(|_| {
                    let valid_len = r.random_range(1..=fixed_frames);
                    let frames = (0..fixed_frames)
                        .map(|t| {
                            let mut f = [0.0; MFCC_DIM];
                            let scale = if t < valid_len { 1.0 } else { 3.0 };
                            f.iter_mut().for_each(|x| *x = scale * r.random_range(-1.0..1.0));
                            f
                        })
                        .collect();
                    PaddedWord { frames, valid_len }
                })
                .collect()
        })
        .collect()
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

fn tensor_name(params: &ModelParams, mut index: usize) -> String {
    for (name, t) in params.tensors() {
        if index < t.len() {
            return name;
        }
        index -= t.len();
    }
    String::from("?")
}

/// Compare `analytic` against central differences of the batch loss for
/// every parameter.
pub fn compare_gradient(
    params: &ModelParams,
    batch: &[Vec<PaddedWord>],
    window: usize,
    analytic: &ModelParams,
    epsilon: f64,
) -> Result<GradCheckReport, S2vError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(S2vError::InvalidConfig(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let a = analytic.flatten();
    let base = params.flatten();
    if a.len() != base.len() {
        return Err(S2vError::Shape("gradient and parameters differ in size".into()));
    }
    let mut probe = params.clone();
    let mut flat = base.clone();
    let mut worst = (0usize, -1.0f64, 0.0f64);
    for k in 0..base.len() {
        flat[k] = base[k] + epsilon;
        probe.set_flat(&flat);
        let up = batch_loss(&probe, batch, window)?;
        flat[k] = base[k] - epsilon;
        probe.set_flat(&flat);
        let down = batch_loss(&probe, batch, window)?;
        flat[k] = base[k];
        let n = (up - down) / (2.0 * epsilon);
        let e = relative_error(a[k], n);
        if e > worst.1 {
            worst = (k, e, n);
        }
    }
    Ok(GradCheckReport {
        n_params: base.len(),
        max_rel_error: worst.1.max(0.0),
        worst_index: worst.0,
        worst_tensor: tensor_name(params, worst.0),
        analytic: a[worst.0],
        numeric: worst.2,
    })
}

/// Analytic gradient from [`grad`] checked against finite differences.
pub fn grad_check(
    params: &ModelParams,
    batch: &[Vec<PaddedWord>],
    window: usize,
    epsilon: f64,
) -> Result<GradCheckReport, S2vError> {
    let (_, g) = grad(params, batch, window)?;
    compare_gradient(params, batch, window, &g, epsilon)
}
