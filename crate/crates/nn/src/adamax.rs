//! Adamax: Adam with the second moment replaced by an exponentially weighted
//! infinity norm.

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::params::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamaxConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamaxConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state: first moments, infinity-norm accumulators, step counter.
#[derive(Debug, Clone)]
pub struct Adamax {
    pub config: AdamaxConfig,
    pub m: ParamSet,
    pub u: ParamSet,
    pub step: u64,
}

impl Adamax {
    pub fn new(params: &ParamSet, config: AdamaxConfig) -> Self {
        Self {
            config,
            m: params.zeros_like(),
            u: params.zeros_like(),
            step: 0,
        }
    }

    /// Applies one update in place.
    pub fn update(&mut self, params: &mut ParamSet, grads: &ParamSet) -> Result<()> {
        params.check_layout(grads, "adamax_update")?;
        params.check_layout(&self.m, "adamax_update")?;
        if !grads.is_finite() {
            return Err(NnError::Numeric("non-finite gradient".into()));
        }
        self.step += 1;
        let AdamaxConfig { lr, beta1, beta2, eps } = self.config;
        let step_size = lr / (1.0 - beta1.powi(self.step.min(i32::MAX as u64) as i32));
        for (name, p) in params.iter_mut() {
            let g = grads.get(name)?.data();
            let m = self.m.get_mut(name)?.data_mut();
            for (mi, gi) in m.iter_mut().zip(g) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
            }
            let u = self.u.get_mut(name)?.data_mut();
            for (ui, gi) in u.iter_mut().zip(g) {
                *ui = (beta2 * *ui).max(gi.abs());
            }
            let m = self.m.get(name)?.data();
            let u = self.u.get(name)?.data();
            for ((pi, mi), ui) in p.data_mut().iter_mut().zip(m).zip(u) {
                *pi -= step_size * mi / (ui + eps);
            }
        }
        Ok(())
    }
}

/// Functional form: returns the updated parameters and optimizer state.
pub fn adamax_update(params: &ParamSet, grads: &ParamSet, state: &Adamax) -> Result<(ParamSet, Adamax)> {
    let mut p = params.clone();
    let mut st = state.clone();
    st.update(&mut p, grads)?;
    Ok((p, st))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::NumArray;

    fn scalar_set(v: f64) -> ParamSet {
        let mut p = ParamSet::new();
        p.insert("w", NumArray::vector(vec![v])).unwrap();
        p
    }

    /// Independent scalar transcription of the Adamax recurrence.
    fn scripted_adamax(w0: f64, lr: f64, steps: usize, grad: impl Fn(f64) -> f64) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut w, mut m, mut u) = (w0, 0.0f64, 0.0f64);
        for t in 1..=steps {
            let g = grad(w);
            m = b1 * m + (1.0 - b1) * g;
            u = (b2 * u).max(g.abs());
            w -= lr / (1.0 - b1.powi(t as i32)) * m / (u + eps);
        }
        w
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar_set(0.7);
        let g = p.zeros_like();
        let mut opt = Adamax::new(&p, AdamaxConfig::default());
        opt.update(&mut p, &g).unwrap();
        assert_eq!(p.get("w").unwrap().data(), &[0.7]);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn single_step_moves_by_lr() {
        for g in [0.3, -2.5, 40.0] {
            let p = scalar_set(1.0);
            let mut grads = p.zeros_like();
            grads.get_mut("w").unwrap().data_mut()[0] = g;
            let st = Adamax::new(&p, AdamaxConfig::default());
            let (p2, st2) = adamax_update(&p, &grads, &st).unwrap();
            let delta = p2.get("w").unwrap().data()[0] - 1.0;
            let expected = scripted_adamax(1.0, 0.001, 1, |_| g) - 1.0;
            assert!((delta - expected).abs() < 1e-15);
            assert!((delta.abs() - 0.001).abs() < 1e-9, "{delta}");
            assert_eq!(delta.signum(), -g.signum());
            assert_eq!(st2.step, 1);
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        // lr 0.1: at lr 0.001 the total travel over 500 steps is capped near 0.5.
        let cfg = AdamaxConfig {
            lr: 0.1,
            ..AdamaxConfig::default()
        };
        let mut p = scalar_set(1.0);
        let mut opt = Adamax::new(&p, cfg);
        for _ in 0..500 {
            let w = p.get("w").unwrap().data()[0];
            let mut g = p.zeros_like();
            g.get_mut("w").unwrap().data_mut()[0] = 2.0 * w;
            opt.update(&mut p, &g).unwrap();
        }
        let w = p.get("w").unwrap().data()[0];
        let oracle = scripted_adamax(1.0, 0.1, 500, |w| 2.0 * w);
        assert!((w - oracle).abs() < 1e-12);
        assert!(w.abs() < 0.05, "{w}");
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = scalar_set(1.0);
        let mut g = ParamSet::new();
        g.insert("w", NumArray::vector(vec![1.0, 2.0])).unwrap();
        let mut opt = Adamax::new(&p, AdamaxConfig::default());
        assert!(matches!(opt.update(&mut p, &g), Err(NnError::Dimension { .. })));
    }
}
