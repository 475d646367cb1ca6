//! Pieces shared by the training loops.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use imfilm_nn::ParamSet;

/// One row of a training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    /// Validation metric when the stage has one (accuracy or loss).
    pub val: Option<f64>,
}

/// Shuffled minibatches of `0..n`.
pub fn minibatches<R: Rng>(n: usize, batch: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch.max(1)).map(<[usize]>::to_vec).collect()
}

/// Fails with a divergence error when the loss or the gradients are not
/// finite.
pub fn ensure_finite(epoch: usize, loss: f64, grads: &ParamSet) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Diverged {
            epoch,
            detail: format!("loss is {loss}"),
        });
    }
    if !grads.is_finite() {
        return Err(Error::Diverged {
            epoch,
            detail: "non-finite gradient".into(),
        });
    }
    Ok(())
}

/// Renders a log as CSV.
pub fn log_csv(log: &[EpochLog]) -> String {
    let mut s = String::from("epoch,loss,val\n");
    for e in log {
        match e.val {
            Some(v) => s.push_str(&format!("{},{:.9},{:.9}\n", e.epoch, e.loss, v)),
            None => s.push_str(&format!("{},{:.9},\n", e.epoch, e.loss)),
        }
    }
    s
}
