//! LSTM layer with backpropagation through time.
//!
//! Gate pre-activations are packed as `[input | forget | candidate | output]`,
//! each `hidden` wide, so the weights are `wx: [input, 4H]`, `wh: [H, 4H]` and
//! `b: [4H]`.

use rand::Rng;

use crate::array::NumArray;
use crate::error::{NnError, Result};
use crate::init::uniform_fan_in;
use crate::ops::{matvec_acc, matvec_t_acc, outer_acc, sigmoid};
use crate::params::ParamSet;

fn pname(prefix: &str, leaf: &str) -> String {
    if prefix.is_empty() {
        leaf.to_string()
    } else {
        format!("{prefix}.{leaf}")
    }
}

#[derive(Debug, Clone)]
pub struct LstmLayer {
    wx: String,
    wh: String,
    b: String,
    pub input: usize,
    pub hidden: usize,
}

/// Everything one step needs for its backward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates `[i | f | g | o]`.
    gates: Vec<f64>,
    pub c: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmLayer {
    pub fn new(prefix: &str, input: usize, hidden: usize) -> Self {
        Self {
            wx: pname(prefix, "wx"),
            wh: pname(prefix, "wh"),
            b: pname(prefix, "b"),
            input,
            hidden,
        }
    }

    /// Reads the layer dimensions off an existing parameter set.
    pub fn from_params(prefix: &str, params: &ParamSet) -> Result<Self> {
        let (input, four_h) = params.get(&pname(prefix, "wx"))?.dims2()?;
        if four_h % 4 != 0 {
            return Err(NnError::Argument(format!(
                "LSTM gate width {four_h} is not a multiple of 4"
            )));
        }
        let layer = Self::new(prefix, input, four_h / 4);
        layer.check(params)?;
        Ok(layer)
    }

    pub fn init<R: Rng>(&self, params: &mut ParamSet, rng: &mut R) -> Result<()> {
        let g = 4 * self.hidden;
        params.insert(self.wx.clone(), uniform_fan_in(&[self.input, g], self.hidden, rng))?;
        params.insert(self.wh.clone(), uniform_fan_in(&[self.hidden, g], self.hidden, rng))?;
        params.insert(self.b.clone(), uniform_fan_in(&[g], self.hidden, rng))
    }

    pub fn check(&self, params: &ParamSet) -> Result<()> {
        let g = 4 * self.hidden;
        for (name, shape) in [
            (&self.wx, vec![self.input, g]),
            (&self.wh, vec![self.hidden, g]),
            (&self.b, vec![g]),
        ] {
            let p = params.get(name)?;
            if p.shape() != shape.as_slice() {
                return Err(NnError::dim("LstmLayer", p.shape(), &shape));
            }
        }
        Ok(())
    }

    pub fn step(&self, params: &ParamSet, x: &[f64], h: &[f64], c: &[f64]) -> Result<LstmCache> {
        let hd = self.hidden;
        if x.len() != self.input || h.len() != hd || c.len() != hd {
            return Err(NnError::dim(
                "lstm_step",
                &[x.len(), h.len(), c.len()],
                &[self.input, hd, hd],
            ));
        }
        let mut z = params.get(&self.b)?.data().to_vec();
        matvec_acc(x, params.get(&self.wx)?.data(), &mut z);
        matvec_acc(h, params.get(&self.wh)?.data(), &mut z);
        for (k, v) in z.iter_mut().enumerate() {
            *v = if (2 * hd..3 * hd).contains(&k) {
                v.tanh()
            } else {
                sigmoid(*v)
            };
        }
        let mut c_new = vec![0.0; hd];
        let mut tanh_c = vec![0.0; hd];
        let mut h_new = vec![0.0; hd];
        for j in 0..hd {
            c_new[j] = z[hd + j] * c[j] + z[j] * z[2 * hd + j];
            tanh_c[j] = c_new[j].tanh();
            h_new[j] = z[3 * hd + j] * tanh_c[j];
        }
        Ok(LstmCache {
            x: x.to_vec(),
            h_prev: h.to_vec(),
            c_prev: c.to_vec(),
            gates: z,
            c: c_new,
            tanh_c,
            h: h_new,
        })
    }

    /// Runs the layer over `xs` starting from a zero state.
    pub fn forward_seq<X: AsRef<[f64]>>(&self, params: &ParamSet, xs: &[X]) -> Result<Vec<LstmCache>> {
        let zero = vec![0.0; self.hidden];
        self.forward_seq_from(params, xs, &zero, &zero)
    }

    pub fn forward_seq_from<X: AsRef<[f64]>>(
        &self,
        params: &ParamSet,
        xs: &[X],
        h0: &[f64],
        c0: &[f64],
    ) -> Result<Vec<LstmCache>> {
        let mut out: Vec<LstmCache> = Vec::with_capacity(xs.len());
        for x in xs {
            let cache = match out.last() {
                Some(prev) => self.step(params, x.as_ref(), &prev.h, &prev.c)?,
                None => self.step(params, x.as_ref(), h0, c0)?,
            };
            out.push(cache);
        }
        Ok(out)
    }

    /// Backpropagation through time.
    ///
    /// `dh[t]` is the gradient flowing into `h_t` from outside the recurrence
    /// (an empty vector means none). `dc_last` optionally seeds the gradient of
    /// the final cell state. Parameter gradients are accumulated into `grads`.
    /// Returns the input gradients plus the gradients of the initial `(h, c)`.
    pub fn backward_seq(
        &self,
        params: &ParamSet,
        caches: &[LstmCache],
        dh: &[Vec<f64>],
        dc_last: Option<&[f64]>,
        grads: &mut ParamSet,
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
        let hd = self.hidden;
        if dh.len() != caches.len() {
            return Err(NnError::dim("lstm backward", &[dh.len()], &[caches.len()]));
        }
        let wx = params.get(&self.wx)?.data();
        let wh = params.get(&self.wh)?.data();
        let mut gwx = grads.get(&self.wx)?.data().to_vec();
        let mut gwh = grads.get(&self.wh)?.data().to_vec();
        let mut gb = grads.get(&self.b)?.data().to_vec();

        let mut dh_next = vec![0.0; hd];
        let mut dc_next = dc_last.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; hd]);
        let mut dxs = vec![Vec::new(); caches.len()];
        let mut dz = vec![0.0; 4 * hd];
        for t in (0..caches.len()).rev() {
            let cache = &caches[t];
            let g = &cache.gates;
            for j in 0..hd {
                let dht = dh_next[j] + dh.get(t).and_then(|v| v.get(j)).copied().unwrap_or(0.0);
                let (i, f, cand, o) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
                let tc = cache.tanh_c[j];
                let dc = dc_next[j] + dht * o * (1.0 - tc * tc);
                dz[j] = dc * cand * i * (1.0 - i);
                dz[hd + j] = dc * cache.c_prev[j] * f * (1.0 - f);
                dz[2 * hd + j] = dc * i * (1.0 - cand * cand);
                dz[3 * hd + j] = dht * tc * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            outer_acc(&cache.x, &dz, &mut gwx);
            outer_acc(&cache.h_prev, &dz, &mut gwh);
            for (a, b) in gb.iter_mut().zip(&dz) {
                *a += b;
            }
            let mut dx = vec![0.0; self.input];
            matvec_t_acc(&dz, wx, &mut dx);
            dxs[t] = dx;
            let mut dhp = vec![0.0; hd];
            matvec_t_acc(&dz, wh, &mut dhp);
            dh_next = dhp;
        }
        grads.get_mut(&self.wx)?.data_mut().copy_from_slice(&gwx);
        grads.get_mut(&self.wh)?.data_mut().copy_from_slice(&gwh);
        grads.get_mut(&self.b)?.data_mut().copy_from_slice(&gb);
        Ok((dxs, dh_next, dc_next))
    }
}

/// One LSTM cell update with parameters `wx`, `wh`, `b` (no prefix).
pub fn lstm_step(x: &NumArray, h: &NumArray, c: &NumArray, params: &ParamSet) -> Result<(NumArray, NumArray)> {
    let layer = LstmLayer::from_params("", params)?;
    let cache = layer.step(params, x.data(), h.data(), c.data())?;
    Ok((NumArray::vector(cache.h), NumArray::vector(cache.c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::seeded_rng;

    #[test]
    fn zero_everything_gives_zero_state() {
        let layer = LstmLayer::new("", 3, 4);
        let mut p = ParamSet::new();
        layer.init(&mut p, &mut seeded_rng(0)).unwrap();
        p.fill(0.0);
        let (h, c) = lstm_step(
            &NumArray::zeros(&[3]),
            &NumArray::zeros(&[4]),
            &NumArray::zeros(&[4]),
            &p,
        )
        .unwrap();
        assert!(h.data().iter().all(|v| *v == 0.0));
        assert!(c.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn step_is_pure() {
        let layer = LstmLayer::new("", 3, 4);
        let mut p = ParamSet::new();
        layer.init(&mut p, &mut seeded_rng(5)).unwrap();
        let x = NumArray::vector(vec![0.3, -0.2, 0.9]);
        let h = NumArray::vector(vec![0.1, 0.0, -0.4, 0.2]);
        let c = NumArray::vector(vec![-0.5, 0.3, 0.0, 1.0]);
        let a = lstm_step(&x, &h, &c, &p).unwrap();
        let b = lstm_step(&x, &h, &c, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let layer = LstmLayer::new("", 3, 4);
        let mut p = ParamSet::new();
        layer.init(&mut p, &mut seeded_rng(0)).unwrap();
        let r = lstm_step(
            &NumArray::zeros(&[2]),
            &NumArray::zeros(&[4]),
            &NumArray::zeros(&[4]),
            &p,
        );
        assert!(matches!(r, Err(NnError::Dimension { .. })));
    }
}
