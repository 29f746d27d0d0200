//! AdamW with decoupled weight decay.

use crate::error::{Error, Result};
use crate::params::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 5e-5,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay: 0.5,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0
            && self.weight_decay.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Moment buffers for every parameter of one store.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub cfg: AdamWConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamW {
    pub fn new(store: &ParamStore, cfg: AdamWConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(AdamW {
            cfg,
            m: store.zero_grads(),
            v: store.zero_grads(),
            step: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update. Parameters flagged without decay (the loss log-variances)
    /// skip the `param · (1 − lr·wd)` shrink.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Vec<f64>]) -> Result<()> {
        if grads.len() != store.len() || self.m.len() != store.len() {
            return Err(Error::invalid(format!(
                "{} gradients for {} parameters",
                grads.len(),
                store.len()
            )));
        }
        self.step += 1;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let shrink = 1.0 - c.lr * c.weight_decay;
        for (i, p) in store.iter_mut().enumerate() {
            let g = &grads[i];
            if g.len() != p.value.len() {
                return Err(Error::shape("adamw_step", p.value.shape(), &[g.len()]));
            }
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, w) in p.value.data_mut().iter_mut().enumerate() {
                if p.decay {
                    *w *= shrink;
                }
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                *w -= c.lr * mh / (vh.sqrt() + c.eps);
            }
        }
        Ok(())
    }
}

/// Scale gradients in place so their global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [Vec<f64>], max_norm: f64) -> f64 {
    let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().flatten().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn store(vals: &[f64]) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("x", Tensor::new(&[vals.len()], vals.to_vec()).unwrap(), true);
        s
    }

    #[test]
    fn zero_grad_without_decay_is_noop() {
        let mut s = store(&[1.0, -2.0]);
        let mut opt = AdamW::new(
            &s,
            AdamWConfig {
                weight_decay: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        opt.step(&mut s, &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(s.get(0).value.data(), &[1.0, -2.0]);
    }

    #[test]
    fn zero_grad_decay_only() {
        let mut s = store(&[1.0, -2.0]);
        let mut opt = AdamW::new(&s, AdamWConfig::default()).unwrap();
        opt.step(&mut s, &[vec![0.0, 0.0]]).unwrap();
        let f = 1.0 - 2.5e-5;
        assert_eq!(s.get(0).value.data(), &[f, -2.0 * f]);
    }

    #[test]
    fn no_decay_flag_respected() {
        let mut s = ParamStore::new();
        s.add("s", Tensor::scalar(1.0), false);
        let mut opt = AdamW::new(&s, AdamWConfig::default()).unwrap();
        opt.step(&mut s, &[vec![0.0]]).unwrap();
        assert_eq!(s.get(0).value.data(), &[1.0]);
    }

    #[test]
    fn clipping() {
        let mut g = vec![vec![3.0], vec![4.0]];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g[0][0] - 0.6).abs() < 1e-15 && (g[1][0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn bad_config_and_shapes() {
        let s = store(&[1.0]);
        assert!(AdamW::new(&s, AdamWConfig { beta1: 1.0, ..Default::default() }).is_err());
        let mut s = store(&[1.0]);
        let mut opt = AdamW::new(&s, AdamWConfig::default()).unwrap();
        assert!(opt.step(&mut s, &[vec![0.0, 1.0]]).is_err());
    }
}
