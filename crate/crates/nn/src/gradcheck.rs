use crate::error::{NnError, Result};
use crate::params::ParamSet;

/// Compares analytic gradients with central differences.
///
/// `f` returns the scalar value and its analytic gradient at the given
/// parameters. The result is the maximum over all scalars of
/// `|analytic - numeric| / max(1, |analytic|)`.
pub fn grad_check<F>(f: F, params: &ParamSet, eps: f64) -> Result<f64>
where
    F: Fn(&ParamSet) -> Result<(f64, ParamSet)>,
{
    let (value, analytic) = f(params)?;
    if !value.is_finite() {
        return Err(NnError::Numeric("objective is not finite".into()));
    }
    params.check_layout(&analytic, "grad_check")?;
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    let names: Vec<String> = params.names().cloned().collect();
    for name in &names {
        let n = params.get(name)?.len();
        for k in 0..n {
            let orig = params.get(name)?.data()[k];
            probe.get_mut(name)?.data_mut()[k] = orig + eps;
            let (plus, _) = f(&probe)?;
            probe.get_mut(name)?.data_mut()[k] = orig - eps;
            let (minus, _) = f(&probe)?;
            probe.get_mut(name)?.data_mut()[k] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(NnError::Numeric(format!(
                    "objective not finite when probing {name}[{k}]"
                )));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.get(name)?.data()[k];
            worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::NumArray;

    #[test]
    fn sum_of_squares_is_exact() {
        let mut p = ParamSet::new();
        p.insert("a", NumArray::vector(vec![0.5, -1.5, 3.0])).unwrap();
        p.insert("b", NumArray::matrix(2, 2, vec![1.0, 2.0, -0.1, 7.0]).unwrap())
            .unwrap();
        let f = |p: &ParamSet| {
            let mut g = p.zeros_like();
            let mut v = 0.0;
            for (name, arr) in p.iter() {
                for (k, x) in arr.data().iter().enumerate() {
                    v += x * x;
                    g.get_mut(name)?.data_mut()[k] = 2.0 * x;
                }
            }
            Ok((v, g))
        };
        assert!(grad_check(f, &p, 1e-5).unwrap() <= 1e-8);
    }

    #[test]
    fn non_finite_probe_is_an_error() {
        let mut p = ParamSet::new();
        p.insert("a", NumArray::vector(vec![0.0])).unwrap();
        let f = |p: &ParamSet| {
            let x = p.get("a")?.data()[0];
            let v = if x > 0.0 { f64::INFINITY } else { x };
            Ok((v, p.zeros_like()))
        };
        assert!(matches!(grad_check(f, &p, 1e-5), Err(NnError::Numeric(_))));
    }
}
