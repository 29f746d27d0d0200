//! Central finite-difference gradient oracle.

use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::params::ParamStore;

fn check_step(h: f64) -> Result<()> {
    if !(1e-6..=1e-3).contains(&h) {
        return Err(Error::invalid(format!("finite-difference step {h} outside [1e-6, 1e-3]")));
    }
    Ok(())
}

/// Compare the tape gradient of a scalar function at `x` against central
/// differences with step `h`; returns the largest relative error over all
/// components (see [`max_rel_error`]).
///
/// `f` receives a fresh tape and the input leaf, and must return a scalar.
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    check_step(h)?;
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone(), true);
    let out = f(&mut tape, xv)?;
    tape.backward(out)?;
    let analytic = tape.grad(xv).expect("leaf gradient");

    let eval = |t: Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let v = tape.leaf(t, false);
        let o = f(&mut tape, v)?;
        Ok(tape.scalar(o))
    };
    let mut numeric = vec![0.0; x.len()];
    for (i, slot) in numeric.iter_mut().enumerate() {
        let mut plus = x.clone();
        plus.data_mut()[i] += h;
        let mut minus = x.clone();
        minus.data_mut()[i] -= h;
        *slot = (eval(plus)? - eval(minus)?) / (2.0 * h);
    }
    Ok(max_rel_error(analytic.data(), &numeric))
}

/// [`grad_check`] over every scalar of every parameter in `store`. `f`
/// binds parameters through [`Tape::param`] and returns a scalar.
pub fn param_grad_check<F>(f: F, store: &ParamStore, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    check_step(h)?;
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    tape.backward(out)?;
    let mut grads = store.zero_grads();
    tape.accumulate_param_grads(&mut grads);
    let analytic: Vec<f64> = grads.concat();

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let o = f(&mut tape, s)?;
        Ok(tape.scalar(o))
    };
    let mut work = store.clone();
    let mut numeric = Vec::with_capacity(analytic.len());
    for p in 0..store.len() {
        for i in 0..store.get(p).value.len() {
            let orig = store.get(p).value.data()[i];
            let set = |w: &mut ParamStore, v: f64| {
                w.iter_mut().nth(p).expect("param").value.data_mut()[i] = v;
            };
            set(&mut work, orig + h);
            let plus = eval(&work)?;
            set(&mut work, orig - h);
            let minus = eval(&work)?;
            set(&mut work, orig);
            numeric.push((plus - minus) / (2.0 * h));
        }
    }
    Ok(max_rel_error(&analytic, &numeric))
}

/// Componentwise `|a − n| / max(|a|, |n|, floor)` maximized over components,
/// where `floor = 1e-3 · max|n|` (at least 1e-10). The floor keeps
/// components that are negligible next to the gradient's own scale from
/// dominating through finite-difference round-off.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (1e-3 * scale).max(1e-10);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares_is_exact() {
        let x = Tensor::new(&[5], vec![0.3, -1.2, 2.0, 0.7, -0.4]).unwrap();
        let err = grad_check(|t, v| Ok(t.sum_sq(v)), &x, 1e-4).unwrap();
        assert!(err < 1e-8, "err {err}");
    }

    #[test]
    fn rejects_out_of_range_step() {
        let x = Tensor::scalar(1.0);
        assert!(grad_check(|t, v| Ok(t.sum(v)), &x, 1e-1).is_err());
    }
}
