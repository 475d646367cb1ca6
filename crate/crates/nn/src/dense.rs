use rand::Rng;

use crate::error::{NnError, Result};
use crate::init::uniform_fan_in;
use crate::ops::{matvec_acc, matvec_t_acc, outer_acc};
use crate::params::ParamSet;

/// Fully connected layer whose weights live in a [`ParamSet`] under
/// `{prefix}.w` (`[input, output]`) and `{prefix}.b` (`[output]`).
#[derive(Debug, Clone)]
pub struct Dense {
    w: String,
    b: String,
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn new(prefix: &str, input: usize, output: usize) -> Self {
        Self {
            w: format!("{prefix}.w"),
            b: format!("{prefix}.b"),
            input,
            output,
        }
    }

    pub fn init<R: Rng>(&self, params: &mut ParamSet, rng: &mut R) -> Result<()> {
        params.insert(
            self.w.clone(),
            uniform_fan_in(&[self.input, self.output], self.input, rng),
        )?;
        params.insert(self.b.clone(), uniform_fan_in(&[self.output], self.input, rng))
    }

    pub fn check(&self, params: &ParamSet) -> Result<()> {
        let w = params.get(&self.w)?;
        if w.shape() != [self.input, self.output] {
            return Err(NnError::dim("Dense", w.shape(), &[self.input, self.output]));
        }
        let b = params.get(&self.b)?;
        if b.shape() != [self.output] {
            return Err(NnError::dim("Dense", b.shape(), &[self.output]));
        }
        Ok(())
    }

    pub fn forward(&self, params: &ParamSet, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input {
            return Err(NnError::dim("Dense::forward", &[x.len()], &[self.input]));
        }
        let mut y = params.get(&self.b)?.data().to_vec();
        matvec_acc(x, params.get(&self.w)?.data(), &mut y);
        Ok(y)
    }

    /// Accumulates weight gradients into `grads` and returns `dx`.
    pub fn backward(&self, params: &ParamSet, x: &[f64], dy: &[f64], grads: &mut ParamSet) -> Result<Vec<f64>> {
        let mut dx = vec![0.0; self.input];
        matvec_t_acc(dy, params.get(&self.w)?.data(), &mut dx);
        outer_acc(x, dy, grads.get_mut(&self.w)?.data_mut());
        for (g, d) in grads.get_mut(&self.b)?.data_mut().iter_mut().zip(dy) {
            *g += d;
        }
        Ok(dx)
    }
}
