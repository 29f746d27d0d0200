//! Synthetic EEG with spatially smooth structure.
//!
//! A fixed set of point sources sits on the upper hemisphere. Each source
//! emits a sum of sinusoids, one per frequency band, with a random in-band
//! frequency and phase per window. Band amplitudes follow a per-class
//! profile with per-window jitter. Electrodes see every source with gain
//! `exp(−κ · great-circle distance)`. Channels are then scaled to unit
//! standard deviation over the whole dataset, and AR(1) noise is added.

use std::f64::consts::PI;

use rand::Rng as _;

use super::EEGDataset;
use crate::error::{Error, Result};
use crate::montage::{great_circle, ElectrodeMontage};
use crate::rng::{self, Rng};
use crate::tensor::Tensor;

/// Delta, theta, alpha, beta, gamma, in Hz (`[lo, hi)`).
pub const BANDS: [(f64, f64); 5] = [(0.5, 4.0), (4.0, 8.0), (8.0, 13.0), (13.0, 30.0), (30.0, 50.0)];
pub const BAND_NAMES: [&str; 5] = ["delta", "theta", "alpha", "beta", "gamma"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_sources: usize,
    /// Amplitude range per band; each source draws its base amplitude from it.
    pub band_amp: [(f64, f64); 5],
    pub noise_std: f64,
    /// AR(1) coefficient of the additive noise (0 gives white noise).
    pub noise_ar: f64,
    /// Zero means unlabeled.
    pub n_classes: usize,
    /// Relative spread of class amplitude profiles around the base.
    pub class_perturbation: f64,
    /// Relative per-window amplitude jitter.
    pub jitter: f64,
    /// Spatial decay of source gain per radian.
    pub kappa: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_sources: 6,
            band_amp: [(1.0, 2.0), (0.5, 1.5), (0.5, 2.0), (0.3, 1.0), (0.1, 0.5)],
            noise_std: 0.1,
            noise_ar: 0.9,
            n_classes: 0,
            class_perturbation: 0.6,
            jitter: 0.3,
            kappa: 3.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_sources == 0 {
            return bad("n_sources must be positive".into());
        }
        for (i, (lo, hi)) in self.band_amp.iter().enumerate() {
            if !(*lo >= 0.0 && hi >= lo && hi.is_finite()) {
                return bad(format!("band {} amplitude range [{lo}, {hi}] invalid", BAND_NAMES[i]));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std {} invalid", self.noise_std));
        }
        if !(0.0..1.0).contains(&self.noise_ar) {
            return bad(format!("noise_ar {} outside [0, 1)", self.noise_ar));
        }
        if self.n_classes > u16::MAX as usize {
            return bad("too many classes".into());
        }
        if !(0.0..1.0).contains(&self.class_perturbation) || !(0.0..1.0).contains(&self.jitter) {
            return bad("class_perturbation and jitter must be in [0, 1)".into());
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa {} invalid", self.kappa));
        }
        Ok(())
    }
}

fn random_upper_direction(r: &mut Rng) -> [f64; 3] {
    loop {
        let v = [
            r.random_range(-1.0..1.0),
            r.random_range(-1.0..1.0),
            r.random_range(0.0..1.0),
        ];
        let n: f64 = v.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Generate `n_windows` windows of `round(sample_rate · window_seconds)`
/// samples. Values are rounded to `f32` so saved datasets reload exactly.
pub fn synth_generate(
    cfg: &SyntheticConfig,
    montage: &ElectrodeMontage,
    sample_rate: f64,
    window_seconds: f64,
    n_windows: usize,
) -> Result<EEGDataset> {
    cfg.validate()?;
    if !(sample_rate > 0.0 && window_seconds > 0.0) || n_windows == 0 {
        return Err(Error::Config("sample rate, window length and window count must be positive".into()));
    }
    let t_len = (sample_rate * window_seconds).round() as usize;
    if t_len < 2 {
        return Err(Error::Config(format!("window of {t_len} samples too short")));
    }
    let c = montage.len();
    let s = cfg.n_sources;
    let nyquist = sample_rate / 2.0;

    let mut geo = rng::derive(cfg.seed, 0);
    let sources: Vec<[f64; 3]> = (0..s).map(|_| random_upper_direction(&mut geo)).collect();
    let gain: Vec<Vec<f64>> = (0..c)
        .map(|e| {
            sources
                .iter()
                .map(|src| (-cfg.kappa * great_circle(montage.position(e), *src)).exp())
                .collect()
        })
        .collect();
    let base: Vec<[f64; 5]> = (0..s)
        .map(|_| {
            let mut a = [0.0; 5];
            for (b, (lo, hi)) in cfg.band_amp.iter().enumerate() {
                a[b] = if hi > lo { geo.random_range(*lo..*hi) } else { *lo };
            }
            a
        })
        .collect();
    let n_profiles = cfg.n_classes.max(1);
    let profiles: Vec<Vec<[f64; 5]>> = (0..n_profiles)
        .map(|_| {
            base.iter()
                .map(|a| {
                    let mut p = *a;
                    for v in &mut p {
                        *v *= 1.0 + cfg.class_perturbation * geo.random_range(-1.0..1.0);
                    }
                    p
                })
                .collect()
        })
        .collect();

    let mut sig = rng::derive(cfg.seed, 1);
    let labels: Vec<u16> = (0..n_windows).map(|i| (i % n_profiles) as u16).collect();
    let mut data = vec![0.0; n_windows * c * t_len];
    let mut src = vec![0.0; t_len];
    for (w, &label) in labels.iter().enumerate() {
        let block = &mut data[w * c * t_len..(w + 1) * c * t_len];
        for (si, amps) in profiles[label as usize].iter().enumerate() {
            src.iter_mut().for_each(|v| *v = 0.0);
            for (b, &(lo, hi)) in BANDS.iter().enumerate() {
                let hi = hi.min(nyquist);
                if lo >= hi {
                    continue;
                }
                let f = sig.random_range(lo..hi);
                let phase = sig.random_range(0.0..2.0 * PI);
                let amp = amps[b] * (1.0 + cfg.jitter * sig.random_range(-1.0..1.0));
                let step = 2.0 * PI * f / sample_rate;
                for (t, v) in src.iter_mut().enumerate() {
                    *v += amp * (step * t as f64 + phase).sin();
                }
            }
            for e in 0..c {
                let g = gain[e][si];
                for (o, v) in block[e * t_len..(e + 1) * t_len].iter_mut().zip(&src) {
                    *o += g * v;
                }
            }
        }
    }

    // per-channel unit std over the whole dataset
    for e in 0..c {
        let (mut sum, mut sq) = (0.0, 0.0);
        for w in 0..n_windows {
            for &v in &data[(w * c + e) * t_len..(w * c + e + 1) * t_len] {
                sum += v;
                sq += v * v;
            }
        }
        let n = (n_windows * t_len) as f64;
        let var = sq / n - (sum / n) * (sum / n);
        let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
        for w in 0..n_windows {
            for v in &mut data[(w * c + e) * t_len..(w * c + e + 1) * t_len] {
                *v *= scale;
            }
        }
    }

    if cfg.noise_std > 0.0 {
        let mut noise = rng::derive(cfg.seed, 2);
        let innov = cfg.noise_std * (1.0 - cfg.noise_ar * cfg.noise_ar).sqrt();
        for row in data.chunks_exact_mut(t_len) {
            let mut n = rng::normal(&mut noise, cfg.noise_std);
            for v in row.iter_mut() {
                *v += n;
                n = cfg.noise_ar * n + rng::normal(&mut noise, innov);
            }
        }
    }

    for v in &mut data {
        *v = *v as f32 as f64;
    }
    let labels = (cfg.n_classes >= 1).then_some(labels);
    EEGDataset::new(
        montage.clone(),
        sample_rate as f32 as f64,
        Tensor::new(&[n_windows, c, t_len], data)?,
        labels,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::pearson;

    #[test]
    fn deterministic_and_normalized() {
        let m = ElectrodeMontage::builtin("standard_16").unwrap();
        let cfg = SyntheticConfig {
            noise_std: 0.0,
            ..Default::default()
        };
        let a = synth_generate(&cfg, &m, 128.0, 1.0, 20).unwrap();
        let b = synth_generate(&cfg, &m, 128.0, 1.0, 20).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.time_len(), 128);
        for e in 0..16 {
            let vals: Vec<f64> = (0..20).flat_map(|w| a.window(w).row(e).to_vec()).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            assert!((sd - 1.0).abs() < 1e-3, "channel {e} std {sd}");
        }
    }

    #[test]
    fn single_noiseless_source_is_rank_one() {
        let m = ElectrodeMontage::builtin("standard_16").unwrap();
        let cfg = SyntheticConfig {
            n_sources: 1,
            noise_std: 0.0,
            ..Default::default()
        };
        let ds = synth_generate(&cfg, &m, 128.0, 1.0, 3).unwrap();
        let w = ds.window(1);
        for e in 1..16 {
            let r = pearson(w.row(0), w.row(e)).unwrap();
            assert!((r.abs() - 1.0).abs() < 1e-6, "{r}");
        }
    }

    #[test]
    fn labels_only_with_classes() {
        let m = ElectrodeMontage::builtin("toy_6").unwrap();
        let plain = synth_generate(&SyntheticConfig::default(), &m, 64.0, 1.0, 4).unwrap();
        assert!(plain.labels().is_none());
        let cfg = SyntheticConfig {
            n_classes: 3,
            ..Default::default()
        };
        let ds = synth_generate(&cfg, &m, 64.0, 1.0, 6).unwrap();
        assert_eq!(ds.labels().unwrap(), &[0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn invalid_config() {
        let m = ElectrodeMontage::builtin("toy_6").unwrap();
        let cfg = SyntheticConfig {
            n_sources: 0,
            ..Default::default()
        };
        assert!(synth_generate(&cfg, &m, 64.0, 1.0, 4).is_err());
        assert!(synth_generate(&SyntheticConfig::default(), &m, 64.0, 1.0, 0).is_err());
    }
}
