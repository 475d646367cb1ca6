//! Elementwise functions, the affine map, softmax and losses.
//!
//! The slice kernels (`matvec_acc` and friends) are what the layers use in
//! their hot loops; the `NumArray` entry points validate shapes and delegate.

use crate::array::NumArray;
use crate::error::{NnError, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `out[j] += sum_i x[i] * w[i, j]` with `w` row-major `[x.len(), out.len()]`.
#[inline]
pub fn matvec_acc(x: &[f64], w: &[f64], out: &mut [f64]) {
    let cols = out.len();
    debug_assert_eq!(w.len(), x.len() * cols);
    for (xi, row) in x.iter().zip(w.chunks_exact(cols)) {
        if *xi == 0.0 {
            continue;
        }
        for (o, wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
}

/// `dx[i] += sum_j w[i, j] * dy[j]`.
#[inline]
pub fn matvec_t_acc(dy: &[f64], w: &[f64], dx: &mut [f64]) {
    let cols = dy.len();
    debug_assert_eq!(w.len(), dx.len() * cols);
    for (d, row) in dx.iter_mut().zip(w.chunks_exact(cols)) {
        *d += row.iter().zip(dy).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dw[i, j] += x[i] * dy[j]`.
#[inline]
pub fn outer_acc(x: &[f64], dy: &[f64], dw: &mut [f64]) {
    let cols = dy.len();
    debug_assert_eq!(dw.len(), x.len() * cols);
    for (xi, row) in x.iter().zip(dw.chunks_exact_mut(cols)) {
        if *xi == 0.0 {
            continue;
        }
        for (g, d) in row.iter_mut().zip(dy) {
            *g += xi * d;
        }
    }
}

fn affine_dims(x: &NumArray, w: &NumArray, b: &NumArray) -> Result<(usize, usize, usize)> {
    let (inp, out) = w.dims2()?;
    let rows = match x.shape() {
        [n] if *n == inp => 1,
        [r, n] if *n == inp => *r,
        _ => return Err(NnError::dim("affine", x.shape(), w.shape())),
    };
    if b.shape() != [out] {
        return Err(NnError::dim("affine", w.shape(), b.shape()));
    }
    Ok((rows, inp, out))
}

/// `y = x W + b` for a vector `x` of shape `[in]` or a batch `[rows, in]`.
pub fn affine(x: &NumArray, w: &NumArray, b: &NumArray) -> Result<NumArray> {
    let (rows, inp, out) = affine_dims(x, w, b)?;
    let mut y = Vec::with_capacity(rows * out);
    for xr in x.data().chunks_exact(inp) {
        let mut yr = b.data().to_vec();
        matvec_acc(xr, w.data(), &mut yr);
        y.extend_from_slice(&yr);
    }
    let shape = if x.ndim() == 1 { vec![out] } else { vec![rows, out] };
    NumArray::new(shape, y)
}

/// Gradients of `affine` given the upstream gradient `dy` (same shape as `y`).
/// Returns `(dx, dw, db)`.
pub fn affine_backward(
    x: &NumArray,
    w: &NumArray,
    b: &NumArray,
    dy: &NumArray,
) -> Result<(NumArray, NumArray, NumArray)> {
    let (rows, inp, out) = affine_dims(x, w, b)?;
    if dy.len() != rows * out {
        return Err(NnError::dim("affine_backward", dy.shape(), &[rows, out]));
    }
    let mut dx = NumArray::zeros(x.shape());
    let mut dw = NumArray::zeros(w.shape());
    let mut db = NumArray::zeros(b.shape());
    for ((xr, dyr), dxr) in x
        .data()
        .chunks_exact(inp)
        .zip(dy.data().chunks_exact(out))
        .zip(dx.data_mut().chunks_exact_mut(inp))
    {
        matvec_t_acc(dyr, w.data(), dxr);
        outer_acc(xr, dyr, dw.data_mut());
        for (g, d) in db.data_mut().iter_mut().zip(dyr) {
            *g += d;
        }
    }
    Ok((dx, dw, db))
}

/// Numerically stable softmax of a slice.
pub fn softmax_slice(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn softmax(z: &NumArray) -> Result<NumArray> {
    if z.ndim() != 1 {
        return Err(NnError::Argument(format!(
            "softmax expects a vector, got shape {:?}",
            z.shape()
        )));
    }
    if z.is_empty() {
        return Err(NnError::Argument("softmax of an empty vector".into()));
    }
    if !z.is_finite() {
        return Err(NnError::Numeric("softmax input is not finite".into()));
    }
    Ok(NumArray::vector(softmax_slice(z.data())))
}

/// Probability floor used by the cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

/// `-ln(max(p[target], PROB_FLOOR))` and whether the floor was hit.
pub fn cross_entropy(probs: &[f64], target: usize) -> (f64, bool) {
    let p = probs[target];
    if p < PROB_FLOOR {
        (-PROB_FLOOR.ln(), true)
    } else {
        (-p.ln(), false)
    }
}

/// Gradient of `-ln softmax(z)[target]` w.r.t. the logits `z`.
pub fn cross_entropy_logit_grad(probs: &[f64], target: usize) -> Vec<f64> {
    let mut g = probs.to_vec();
    g[target] -= 1.0;
    g
}

/// Euclidean norm of `pred - target` and its gradient w.r.t. `pred`.
///
/// The gradient at an exact match is taken as zero.
pub fn l2_distance(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let diff: Vec<f64> = pred.iter().zip(target).map(|(p, t)| p - t).collect();
    let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
    let grad = if norm > 0.0 {
        diff.iter().map(|d| d / norm).collect()
    } else {
        vec![0.0; diff.len()]
    };
    (norm, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn affine_identity() {
        let x = NumArray::vector(vec![1.0, 0.0]);
        let w = NumArray::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = NumArray::vector(vec![0.0, 0.0]);
        assert_eq!(affine(&x, &w, &b).unwrap().data(), &[1.0, 0.0]);
    }

    #[test]
    fn affine_forced_value() {
        let x = NumArray::vector(vec![1.0, 2.0]);
        let w = NumArray::matrix(2, 1, vec![1.0, 1.0]).unwrap();
        let b = NumArray::vector(vec![3.0]);
        assert_eq!(affine(&x, &w, &b).unwrap().data(), &[6.0]);
    }

    #[test]
    fn affine_batch_matches_rows() {
        let x = NumArray::matrix(2, 2, vec![1.0, 2.0, -1.0, 0.5]).unwrap();
        let w = NumArray::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = NumArray::vector(vec![0.1, 0.2, 0.3]);
        let y = affine(&x, &w, &b).unwrap();
        assert_eq!(y.shape(), &[2, 3]);
        let r1 = affine(&NumArray::vector(vec![-1.0, 0.5]), &w, &b).unwrap();
        assert!(close(&y.data()[3..], r1.data(), 0.0));
    }

    #[test]
    fn affine_shape_error_names_both_shapes() {
        let x = NumArray::vector(vec![1.0, 2.0, 3.0]);
        let w = NumArray::zeros(&[2, 2]);
        let b = NumArray::zeros(&[2]);
        let err = affine(&x, &w, &b).unwrap_err().to_string();
        assert!(err.contains("[3]") && err.contains("[2, 2]"), "{err}");
    }

    #[test]
    fn softmax_cases() {
        let u = softmax(&NumArray::vector(vec![0.0; 5])).unwrap();
        assert!(close(u.data(), &[0.2; 5], 1e-15));
        let p = softmax(&NumArray::vector(vec![2f64.ln(), 0.0])).unwrap();
        assert!(close(p.data(), &[2.0 / 3.0, 1.0 / 3.0], 1e-15));
        let big = softmax(&NumArray::vector(vec![1000.0, 0.0])).unwrap();
        assert!(big.is_finite());
        assert!((big.data()[0] - 1.0).abs() < 1e-12 && big.data()[1] < 1e-300);
    }

    #[test]
    fn softmax_rejects_empty() {
        assert!(matches!(softmax(&NumArray::vector(vec![])), Err(NnError::Argument(_))));
    }

    #[test]
    fn cross_entropy_floor_is_flagged() {
        let (loss, floored) = cross_entropy(&[1.0, 0.0], 1);
        assert!(floored);
        assert!((loss - 1e-12f64.ln().abs()).abs() < 1e-9);
        let (loss, floored) = cross_entropy(&[0.2; 5], 0);
        assert!(!floored);
        assert!((loss - 1.6094379124341003).abs() < 1e-12);
    }

    #[test]
    fn l2_distance_zero_gradient_at_match() {
        let (n, g) = l2_distance(&[1.0, 2.0], &[1.0, 2.0]);
        assert_eq!(n, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
        let (n, _) = l2_distance(&[3.0, 4.0], &[0.0, 0.0]);
        assert_eq!(n, 5.0);
    }
}
