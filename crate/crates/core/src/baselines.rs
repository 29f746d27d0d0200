//! Training-free interpolators: spherical splines and nearest-neighbor
//! averaging. Both reduce to a fixed `C_Mask × C_LR` weight matrix per mask
//! spec, applied to every time sample.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mask::MaskSpec;
use crate::model::Reconstructor;
use crate::tensor::kernels::gemm;
use crate::tensor::Tensor;

/// Systems with a larger 1-norm condition estimate are reported singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineConfig {
    /// Smoothness order.
    pub m: u32,
    /// Legendre terms in the kernel series.
    pub n_terms: usize,
    /// Ridge added to the kernel diagonal.
    pub lambda: f64,
}

impl Default for SplineConfig {
    fn default() -> Self {
        SplineConfig {
            m: 4,
            n_terms: 7,
            lambda: 0.0,
        }
    }
}

impl SplineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.n_terms == 0 || !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("invalid spline settings {self:?}")));
        }
        Ok(())
    }
}

fn check_unit(x: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("argument {x} outside [-1, 1]")));
    }
    Ok(())
}

/// Legendre polynomial `P_n(x)` by the three-term recurrence.
pub fn legendre_eval(n: usize, x: f64) -> Result<f64> {
    check_unit(x)?;
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return Ok(p0);
    }
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    Ok(p1)
}

/// `g(x) = (1/4π) Σ_{n=1}^{N} (2n+1) / (nᵐ (n+1)ᵐ) · P_n(x)`.
pub fn spline_kernel(cos_theta: f64, cfg: &SplineConfig) -> Result<f64> {
    check_unit(cos_theta)?;
    let mut sum = 0.0;
    let (mut p0, mut p1) = (1.0, cos_theta);
    for n in 1..=cfg.n_terms {
        if n > 1 {
            let k = (n - 1) as f64;
            let p2 = ((2.0 * k + 1.0) * cos_theta * p1 - k * p0) / (k + 1.0);
            p0 = p1;
            p1 = p2;
        }
        let nf = n as f64;
        sum += (2.0 * nf + 1.0) / (nf.powi(cfg.m as i32) * (nf + 1.0).powi(cfg.m as i32)) * p1;
    }
    Ok(sum / (4.0 * PI))
}

/// LU factorization with partial pivoting of a dense row-major `n × n`.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl Lu {
    fn factor(a: &[f64], n: usize) -> Result<Self> {
        let mut lu = a.to_vec();
        let mut piv: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[i * n + k].abs().total_cmp(&lu[j * n + k].abs()))
                .expect("nonempty");
            if lu[p * n + k].abs() <= 1e-14 * scale {
                return Err(Error::Singular {
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let d = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / d;
                lu[i * n + k] = f;
                for j in k + 1..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        Ok(Lu { n, lu, piv })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}

fn norm1(a: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn apply_weights(weights: &Tensor, x_lr: &Tensor, spec: &MaskSpec) -> Result<Tensor> {
    if x_lr.rank() != 2 || x_lr.shape()[0] != spec.c_lr() {
        return Err(Error::shape("interpolate", x_lr.shape(), &[spec.c_lr()]));
    }
    let (m, k) = (weights.shape()[0], weights.shape()[1]);
    let t = x_lr.shape()[1];
    let mut out = vec![0.0; m * t];
    gemm(m, k, t, weights.data(), false, x_lr.data(), false, &mut out, false);
    Tensor::new(&[m, t], out)
}

fn need_masked(spec: &MaskSpec) -> Result<()> {
    if spec.c_mask() == 0 {
        return Err(Error::invalid("mask spec has no masked channels"));
    }
    Ok(())
}

fn full_output(spec: &MaskSpec, x_lr: &Tensor, masked: &Tensor) -> Result<Tensor> {
    crate::mask::merge_channels(x_lr, Some(masked), spec)
}

/// Spherical-spline interpolation matrix for one mask spec.
#[derive(Debug, Clone)]
pub struct SplineInterpolator {
    spec: MaskSpec,
    cfg: SplineConfig,
    weights: Tensor,
    condition: f64,
}

impl SplineInterpolator {
    /// Fits `c₀ + Σ cᵢ g(cos θᵢ)` with `Σ cᵢ = 0` through the visible
    /// electrodes and precomputes its values at the masked ones.
    pub fn new(spec: &MaskSpec, cfg: SplineConfig) -> Result<Self> {
        cfg.validate()?;
        need_masked(spec)?;
        let mont = spec.montage();
        let vis = spec.visible();
        let n = vis.len();
        let dim = n + 1;
        let mut a = vec![0.0; dim * dim];
        for i in 0..n {
            for j in 0..n {
                a[i * dim + j] = spline_kernel(mont.cos_angle(vis[i], vis[j]), &cfg)?;
            }
            a[i * dim + i] += cfg.lambda;
            a[i * dim + n] = 1.0;
            a[n * dim + i] = 1.0;
        }
        let lu = Lu::factor(&a, dim)?;
        // inverse columns give the 1-norm condition estimate
        let mut inv = vec![0.0; dim * dim];
        let mut e = vec![0.0; dim];
        for j in 0..dim {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            for (i, v) in lu.solve(&e).into_iter().enumerate() {
                inv[i * dim + j] = v;
            }
        }
        let condition = norm1(&a, dim) * norm1(&inv, dim);
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(Error::Singular { condition });
        }
        let masked = spec.masked();
        let mut w = Vec::with_capacity(masked.len() * n);
        let mut rhs = vec![0.0; dim];
        for &e in masked {
            for (i, &v) in vis.iter().enumerate() {
                rhs[i] = spline_kernel(mont.cos_angle(e, v), &cfg)?;
            }
            rhs[n] = 1.0;
            // the system is symmetric, so solving against the evaluation
            // vector yields the row of the interpolation matrix
            w.extend_from_slice(&lu.solve(&rhs)[..n]);
        }
        Ok(SplineInterpolator {
            spec: spec.clone(),
            cfg,
            weights: Tensor::new(&[masked.len(), n], w)?,
            condition,
        })
    }

    pub fn config(&self) -> &SplineConfig {
        &self.cfg
    }

    /// 1-norm condition estimate of the bordered kernel system.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `C_Mask × C_LR` weights.
    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    /// Masked rows from visible rows.
    pub fn interpolate(&self, x_lr: &Tensor) -> Result<Tensor> {
        apply_weights(&self.weights, x_lr, &self.spec)
    }
}

impl Reconstructor for SplineInterpolator {
    fn name(&self) -> &str {
        "si"
    }

    fn spec(&self) -> &MaskSpec {
        &self.spec
    }

    fn reconstruct(&self, x_lr: &Tensor) -> Result<Tensor> {
        full_output(&self.spec, x_lr, &self.interpolate(x_lr)?)
    }
}

pub fn si_interpolate(x_lr: &Tensor, spec: &MaskSpec, cfg: SplineConfig) -> Result<Tensor> {
    SplineInterpolator::new(spec, cfg)?.interpolate(x_lr)
}

/// Mean of the `k` nearest visible electrodes.
#[derive(Debug, Clone)]
pub struct NeighborAverage {
    spec: MaskSpec,
    k: usize,
    neighbors: Vec<Vec<usize>>,
    weights: Tensor,
}

pub const DEFAULT_NEIGHBORS: usize = 4;

impl NeighborAverage {
    pub fn new(spec: &MaskSpec, k: usize) -> Result<Self> {
        if k == 0 || k > spec.c_lr() {
            return Err(Error::Config(format!(
                "neighbor count {k} must be in 1..={}",
                spec.c_lr()
            )));
        }
        need_masked(spec)?;
        let mont = spec.montage();
        let vis = spec.visible();
        let mut neighbors = Vec::with_capacity(spec.c_mask());
        let mut w = vec![0.0; spec.c_mask() * vis.len()];
        for (r, &e) in spec.masked().iter().enumerate() {
            let mut order: Vec<usize> = (0..vis.len()).collect();
            // stable sort keeps canonical order among ties
            order.sort_by(|&a, &b| {
                mont.great_circle(e, vis[a]).total_cmp(&mont.great_circle(e, vis[b]))
            });
            order.truncate(k);
            for &j in &order {
                w[r * vis.len() + j] = 1.0 / k as f64;
            }
            neighbors.push(order.iter().map(|&j| vis[j]).collect());
        }
        Ok(NeighborAverage {
            spec: spec.clone(),
            k,
            neighbors,
            weights: Tensor::new(&[spec.c_mask(), vis.len()], w)?,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Canonical indices of the neighbors of each masked electrode, nearest
    /// first.
    pub fn neighbors(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn interpolate(&self, x_lr: &Tensor) -> Result<Tensor> {
        apply_weights(&self.weights, x_lr, &self.spec)
    }
}

impl Reconstructor for NeighborAverage {
    fn name(&self) -> &str {
        "an"
    }

    fn spec(&self) -> &MaskSpec {
        &self.spec
    }

    fn reconstruct(&self, x_lr: &Tensor) -> Result<Tensor> {
        full_output(&self.spec, x_lr, &self.interpolate(x_lr)?)
    }
}

pub fn an_interpolate(x_lr: &Tensor, spec: &MaskSpec, k: usize) -> Result<Tensor> {
    NeighborAverage::new(spec, k)?.interpolate(x_lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::mask_case;
    use crate::montage::{Electrode, ElectrodeMontage};

    #[test]
    fn legendre_small_orders() {
        assert_eq!(legendre_eval(0, 0.3).unwrap(), 1.0);
        assert_eq!(legendre_eval(1, 0.3).unwrap(), 0.3);
        assert!((legendre_eval(2, 0.5).unwrap() + 0.125).abs() < 1e-15);
        assert!(legendre_eval(3, 1.5).is_err());
    }

    #[test]
    fn kernel_converges() {
        let a = spline_kernel(0.3, &SplineConfig::default()).unwrap();
        let b = spline_kernel(0.3, &SplineConfig { n_terms: 14, ..Default::default() }).unwrap();
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn constant_field_reproduced() {
        let m = ElectrodeMontage::builtin("standard_32").unwrap();
        let spec = mask_case(&m, 4, 1).unwrap();
        let x = Tensor::full(&[spec.c_lr(), 5], 5.0);
        let si = si_interpolate(&x, &spec, SplineConfig::default()).unwrap();
        assert!(si.data().iter().all(|v| (v - 5.0).abs() < 1e-8));
        let an = an_interpolate(&x, &spec, 4).unwrap();
        assert!(an.data().iter().all(|v| (v - 5.0).abs() < 1e-12));
    }

    #[test]
    fn equidistant_pair_average() {
        let s = 0.5f64.sqrt();
        let pts = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [s, s, 0.0]];
        let m = ElectrodeMontage::new(
            pts.iter()
                .enumerate()
                .map(|(i, p)| Electrode {
                    name: format!("E{i}"),
                    pos: *p,
                })
                .collect(),
        )
        .unwrap();
        let spec = MaskSpec::new(m, vec![0, 1], 2).unwrap();
        let x = Tensor::from_rows(&[vec![1.0], vec![3.0]]);
        assert_eq!(an_interpolate(&x, &spec, 2).unwrap().data(), &[2.0]);
        assert_eq!(an_interpolate(&x, &spec, 1).unwrap().data(), &[1.0]);
        assert!(an_interpolate(&x, &spec, 3).is_err());
    }
}
