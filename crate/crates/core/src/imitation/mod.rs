//! Action imitation network.
//!
//! A first MLP turns the style feature and the current observation into a
//! context vector; a second MLP combines the context with the current action
//! and predicts the next one. Training pairs each content snippet with the
//! DTW-matched snippet of another video of the same style.

pub mod dtw;
pub mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map};

use crate::action::{Action, DIR_EPS};
use crate::error::{Error, Result};
use imfilm_nn::ops::sigmoid;
use imfilm_nn::{container, seeded_rng, Dense, ParamSet};

pub use dtw::{dtw_align, WarpingPath};

const FORMAT_VERSION: &str = "imfilm-imitation-net-1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImitationDims {
    pub style_dim: usize,
    pub obs_dim: usize,
    pub hidden1: usize,
    pub context: usize,
    pub hidden2: usize,
}

impl Default for ImitationDims {
    fn default() -> Self {
        Self {
            style_dim: 128,
            obs_dim: crate::features::FG_EMBED + crate::features::BG_EMBED,
            hidden1: 128,
            context: 64,
            hidden2: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImitationNet {
    pub dims: ImitationDims,
    pub params: ParamSet,
}

struct Layers {
    a1: Dense,
    a2: Dense,
    b1: Dense,
    b2: Dense,
}

/// Intermediate activations of one prediction.
#[derive(Debug, Clone)]
pub struct ImitationForward {
    x1: Vec<f64>,
    h1: Vec<f64>,
    pub context: Vec<f64>,
    x2: Vec<f64>,
    h2: Vec<f64>,
    /// Unconstrained output: omega (3), direction (3), scale logit (1).
    pub raw: Vec<f64>,
}

/// Output vector compared with labels: omega, unit direction, scale.
fn constrained(raw: &[f64], fallback_dir: &[f64; 3]) -> ([f64; 7], f64) {
    let n = (raw[3] * raw[3] + raw[4] * raw[4] + raw[5] * raw[5]).sqrt();
    let dir = if n >= DIR_EPS {
        [raw[3] / n, raw[4] / n, raw[5] / n]
    } else {
        *fallback_dir
    };
    ([raw[0], raw[1], raw[2], dir[0], dir[1], dir[2], sigmoid(raw[6])], n)
}

/// Sum of the content and style prediction errors, the latter weighted by
/// `lambda`. Each error is the Euclidean norm over the 7-vector.
pub fn imitation_loss(pred_c: &[f64], label_c: &[f64], pred_s: &[f64], label_s: &[f64], lambda: f64) -> f64 {
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    d(pred_c, label_c) + lambda * d(pred_s, label_s)
}

/// One training example. `style` carries the matched style snippet's
/// current action and next-action label; it is absent for the single-term
/// baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample {
    pub v: Vec<f64>,
    pub obs: Vec<f64>,
    pub action: [f64; 7],
    pub label: [f64; 7],
    pub style: Option<([f64; 7], [f64; 7])>,
}

impl ImitationNet {
    pub fn new(dims: ImitationDims, seed: u64) -> Result<Self> {
        let mut params = ParamSet::new();
        let mut rng = seeded_rng(seed);
        let l = layers(&dims);
        for d in [&l.a1, &l.a2, &l.b1, &l.b2] {
            d.init(&mut params, &mut rng)?;
        }
        Ok(Self { dims, params })
    }

    pub fn zeroed(dims: ImitationDims) -> Result<Self> {
        let mut n = Self::new(dims, 0)?;
        n.params.fill(0.0);
        Ok(n)
    }

    pub fn forward_with(&self, p: &ParamSet, v: &[f64], obs: &[f64], action: &[f64]) -> Result<ImitationForward> {
        if v.len() != self.dims.style_dim || obs.len() != self.dims.obs_dim || action.len() != Action::DIM {
            return Err(Error::Argument(format!(
                "imitation input sizes ({}, {}, {}) do not match ({}, {}, {})",
                v.len(),
                obs.len(),
                action.len(),
                self.dims.style_dim,
                self.dims.obs_dim,
                Action::DIM
            )));
        }
        let l = layers(&self.dims);
        let mut x1 = v.to_vec();
        x1.extend_from_slice(obs);
        let h1: Vec<f64> = l.a1.forward(p, &x1)?.into_iter().map(f64::tanh).collect();
        let context: Vec<f64> = l.a2.forward(p, &h1)?.into_iter().map(f64::tanh).collect();
        let mut x2 = context.clone();
        x2.extend_from_slice(action);
        let h2: Vec<f64> = l.b1.forward(p, &x2)?.into_iter().map(f64::tanh).collect();
        let raw = l.b2.forward(p, &h2)?;
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("imitation network output is not finite".into()));
        }
        Ok(ImitationForward {
            x1,
            h1,
            context,
            x2,
            h2,
            raw,
        })
    }

    /// Next action given style feature, observation and current action.
    pub fn predict(&self, v: &[f64], obs: &[f64], a: &Action) -> Result<Action> {
        let f = self.forward_with(&self.params, v, obs, &a.to_vec())?;
        let (out, _) = constrained(&f.raw, &a.dir);
        let mut act = Action::from_slice(&out);
        act.scale = act.scale.clamp(0.0, 1.0);
        Ok(act)
    }

    /// Error norm of one prediction term and the gradient with respect to the
    /// raw output.
    fn term(&self, f: &ImitationForward, fallback_dir: &[f64; 3], label: &[f64; 7]) -> (f64, Vec<f64>) {
        let (out, n) = constrained(&f.raw, fallback_dir);
        let diff: Vec<f64> = out.iter().zip(label).map(|(a, b)| a - b).collect();
        let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        let mut g = vec![0.0; 7];
        if norm == 0.0 {
            return (0.0, g);
        }
        let e: Vec<f64> = diff.iter().map(|d| d / norm).collect();
        g[..3].copy_from_slice(&e[..3]);
        if n >= DIR_EPS {
            let u = [out[3], out[4], out[5]];
            let dot = u[0] * e[3] + u[1] * e[4] + u[2] * e[5];
            for k in 0..3 {
                g[3 + k] = (e[3 + k] - u[k] * dot) / n;
            }
        }
        g[6] = e[6] * out[6] * (1.0 - out[6]);
        (norm, g)
    }

    fn backward(&self, p: &ParamSet, f: &ImitationForward, draw: &[f64], grads: &mut ParamSet) -> Result<()> {
        let l = layers(&self.dims);
        let dh2 = l.b2.backward(p, &f.h2, draw, grads)?;
        let dpre2: Vec<f64> = dh2.iter().zip(&f.h2).map(|(g, h)| g * (1.0 - h * h)).collect();
        let dx2 = l.b1.backward(p, &f.x2, &dpre2, grads)?;
        let dctx: Vec<f64> = dx2[..self.dims.context]
            .iter()
            .zip(&f.context)
            .map(|(g, h)| g * (1.0 - h * h))
            .collect();
        let dh1 = l.a2.backward(p, &f.h1, &dctx, grads)?;
        let dpre1: Vec<f64> = dh1.iter().zip(&f.h1).map(|(g, h)| g * (1.0 - h * h)).collect();
        l.a1.backward(p, &f.x1, &dpre1, grads)?;
        Ok(())
    }

    /// Training loss of one sample: content term plus `lambda` times the
    /// style term (when present). Both terms share the style feature and the
    /// content observation and differ in the conditioning action.
    pub fn loss_with(&self, p: &ParamSet, s: &PairSample, lambda: f64, grads: Option<&mut ParamSet>) -> Result<f64> {
        let fc = self.forward_with(p, &s.v, &s.obs, &s.action)?;
        let (lc, gc) = self.term(&fc, &[s.action[3], s.action[4], s.action[5]], &s.label);
        let mut style = None;
        let mut loss = lc;
        if let Some((a, y)) = &s.style {
            let fs = self.forward_with(p, &s.v, &s.obs, a)?;
            let (ls, gs) = self.term(&fs, &[a[3], a[4], a[5]], y);
            loss += lambda * ls;
            style = Some((fs, gs));
        }
        if let Some(grads) = grads {
            self.backward(p, &fc, &gc, grads)?;
            if let Some((fs, gs)) = style {
                let gs: Vec<f64> = gs.iter().map(|g| lambda * g).collect();
                self.backward(p, &fs, &gs, grads)?;
            }
        }
        Ok(loss)
    }

    pub fn save(&self, path: &Path, kind: &str) -> Result<()> {
        let mut meta = Map::new();
        meta.insert("format".into(), json!(FORMAT_VERSION));
        meta.insert("kind".into(), json!(kind));
        meta.insert(
            "dims".into(),
            serde_json::to_value(self.dims).map_err(|e| Error::format(path, e.to_string()))?,
        );
        container::save(path, &self.params, meta)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (params, side) = container::load(path)?;
        let dims: ImitationDims = side
            .meta
            .get("dims")
            .cloned()
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| Error::format(path, e.to_string()))?
            .ok_or_else(|| Error::format(path, "missing dims"))?;
        let net = Self { dims, params };
        net.params
            .check_layout(&Self::new(dims, 0)?.params, "imitation net load")?;
        Ok(net)
    }
}

fn layers(d: &ImitationDims) -> Layers {
    Layers {
        a1: Dense::new("mlp1.l1", d.style_dim + d.obs_dim, d.hidden1),
        a2: Dense::new("mlp1.l2", d.hidden1, d.context),
        b1: Dense::new("mlp2.l1", d.context + Action::DIM, d.hidden2),
        b2: Dense::new("mlp2.l2", d.hidden2, Action::DIM),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_arithmetic() {
        let y = [0.0, 0.1, 0.0, 1.0, 0.0, 0.0, 0.3];
        assert_eq!(imitation_loss(&y, &y, &y, &y, 0.7), 0.0);
        let mut off = y;
        off[0] += 1.0;
        assert!((imitation_loss(&off, &y, &y, &y, 0.7) - 1.0).abs() < 1e-15);
        assert!((imitation_loss(&off, &y, &off, &y, 0.7) - 1.7).abs() < 1e-15);
    }

    #[test]
    fn zero_network_output() {
        let net = ImitationNet::zeroed(ImitationDims::default()).unwrap();
        let prev = Action {
            omega: [0.1, 0.2, 0.3],
            dir: [0.0, 1.0, 0.0],
            scale: 0.9,
        };
        let a = net.predict(&[0.0; 128], &[0.0; 96], &prev).unwrap();
        assert_eq!(a.omega, [0.0; 3]);
        assert_eq!(a.dir, prev.dir);
        assert_eq!(a.scale, 0.5);
    }

    #[test]
    fn predictions_are_valid_actions() {
        use rand::Rng;
        let dims = ImitationDims {
            style_dim: 4,
            obs_dim: 3,
            hidden1: 5,
            context: 4,
            hidden2: 5,
        };
        let net = ImitationNet::new(dims, 3).unwrap();
        let mut rng = seeded_rng(4);
        for _ in 0..50 {
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let o: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = Action {
                omega: [0.0; 3],
                dir: [1.0, 0.0, 0.0],
                scale: 0.2,
            };
            let p = net.predict(&v, &o, &a).unwrap();
            assert!(p.is_valid());
            assert_eq!(p, net.predict(&v, &o, &a).unwrap());
        }
    }
}
