//! Reconstruction losses: spectral squared error, absolute error, and their
//! combination with learned log-variance weights.
//!
//! The spectral term sums `|F(gt) − F(sr)|²` over the full spectrum. Only
//! the nonnegative-frequency bins are computed; bins other than DC and
//! Nyquist are counted twice to stand in for their conjugate mirrors. By
//! Parseval the result is exactly `T · Σ(gt − sr)²`.

use crate::error::{Error, Result};
use crate::tensor::kernels::{onesided_weight, rdft, rdft_bins};
use crate::tensor::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub fmse: f64,
    pub mae: f64,
    pub total: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
}

/// `total = fmse / (2σ₁²) + mae / (2σ₂²) + ½(s₁ + s₂)` with `σᵢ² = exp(sᵢ)`.
pub fn auto_weighted_loss(fmse: f64, mae: f64, s1: f64, s2: f64) -> LossBreakdown {
    let (v1, v2) = (s1.exp(), s2.exp());
    LossBreakdown {
        fmse,
        mae,
        total: 0.5 * fmse / v1 + 0.5 * mae / v2 + 0.5 * (s1 + s2),
        sigma1_sq: v1,
        sigma2_sq: v2,
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    Ok(())
}

pub fn fmse(gt: &Tensor, sr: &Tensor) -> Result<f64> {
    same_shape("fmse", gt, sr)?;
    let (m, t) = gt.rows_cols();
    let mut total = 0.0;
    let mut diff = vec![0.0; t];
    for i in 0..m {
        for (d, (g, s)) in diff.iter_mut().zip(gt.row(i).iter().zip(sr.row(i))) {
            *d = g - s;
        }
        for (k, c) in rdft(&diff).iter().enumerate() {
            total += onesided_weight(k, t) * c.norm_sqr();
        }
    }
    Ok(total)
}

pub fn mae_loss(gt: &Tensor, sr: &Tensor) -> Result<f64> {
    same_shape("mae_loss", gt, sr)?;
    Ok(gt.data().iter().zip(sr.data()).map(|(g, s)| (g - s).abs()).sum())
}

/// Column weights for the `[re | im]` layout produced by `Tape::rdft_rows`.
pub fn spectrum_weights(t: usize) -> Vec<f64> {
    let k = rdft_bins(t);
    let w: Vec<f64> = (0..k).map(|j| onesided_weight(j, t)).collect();
    w.iter().chain(&w).copied().collect()
}

/// Differentiable spectral error between two `M × T` nodes.
pub fn fmse_var(tape: &mut Tape, gt: Var, sr: Var) -> Result<Var> {
    let t = tape.shape(gt).last().copied().unwrap_or(0);
    let d = tape.sub(gt, sr)?;
    let spec = tape.rdft_rows(d)?;
    tape.weighted_sum_sq_cols(spec, &spectrum_weights(t))
}

pub fn mae_var(tape: &mut Tape, gt: Var, sr: Var) -> Result<Var> {
    let d = tape.sub(gt, sr)?;
    Ok(tape.sum_abs(d))
}

/// Differentiable form of [`auto_weighted_loss`]; `s1`, `s2` are scalars.
pub fn auto_weighted_var(tape: &mut Tape, fmse: Var, mae: Var, s1: Var, s2: Var) -> Result<Var> {
    let term = |tape: &mut Tape, loss: Var, s: Var| -> Result<Var> {
        let neg = tape.scale(s, -1.0);
        let w = tape.exp(neg);
        let l = tape.mul(loss, w)?;
        Ok(tape.scale(l, 0.5))
    };
    let a = term(tape, fmse, s1)?;
    let b = term(tape, mae, s2)?;
    let s = tape.add(s1, s2)?;
    let s = tape.scale(s, 0.5);
    let ab = tape.add(a, b)?;
    tape.add(ab, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_inputs_give_zero() {
        let x = Tensor::new(&[2, 5], (0..10).map(|v| v as f64).collect()).unwrap();
        assert_eq!(fmse(&x, &x).unwrap(), 0.0);
        assert_eq!(mae_loss(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn sign_flip_mae() {
        let a = Tensor::new(&[1, 2], vec![1.0, -1.0]).unwrap();
        let b = Tensor::new(&[1, 2], vec![-1.0, 1.0]).unwrap();
        assert_eq!(mae_loss(&a, &b).unwrap(), 4.0);
    }

    #[test]
    fn unit_log_variances() {
        let l = auto_weighted_loss(3.0, 5.0, 0.0, 0.0);
        assert_eq!(l.total, 4.0);
        assert_eq!((l.sigma1_sq, l.sigma2_sq), (1.0, 1.0));
    }

    #[test]
    fn tape_matches_values() {
        let gt = Tensor::new(&[2, 7], (0..14).map(|v| (v as f64 * 0.9).cos()).collect()).unwrap();
        let sr = gt.map(|v| 0.5 * v + 0.1);
        let mut tape = Tape::new();
        let (g, s) = (tape.constant(gt.clone()), tape.leaf(sr.clone(), true));
        let f = fmse_var(&mut tape, g, s).unwrap();
        let m = mae_var(&mut tape, g, s).unwrap();
        let s1 = tape.leaf(Tensor::scalar(0.3), true);
        let s2 = tape.leaf(Tensor::scalar(-0.2), true);
        let tot = auto_weighted_var(&mut tape, f, m, s1, s2).unwrap();
        let fv = fmse(&gt, &sr).unwrap();
        let mv = mae_loss(&gt, &sr).unwrap();
        assert!((tape.scalar(f) - fv).abs() < 1e-9 * fv);
        assert!((tape.scalar(m) - mv).abs() < 1e-12);
        let want = auto_weighted_loss(fv, mv, 0.3, -0.2).total;
        assert!((tape.scalar(tot) - want).abs() < 1e-9 * want.abs());
    }

    #[test]
    fn shape_mismatch() {
        let a = Tensor::zeros(&[2, 4]);
        let b = Tensor::zeros(&[2, 5]);
        assert!(fmse(&a, &b).is_err());
        assert!(mae_loss(&a, &b).is_err());
    }
}
