//! Band features (log power and differential entropy) and a small
//! two-block MLP classifier used to compare LR, SR and GT inputs.

use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;

use crate::data::{EEGDataset, BANDS, BAND_NAMES};
use crate::error::{Error, Result};
use crate::layers::{Ctx, Linear};
use crate::model::Reconstructor;
use crate::optim::{AdamW, AdamWConfig};
use crate::params::{ParamBuilder, ParamStore};
use crate::rng;
use crate::tensor::kernels::{onesided_weight, rdft};
use crate::tensor::{Mode, Tape, Tensor, Var};

/// Guard added before taking logarithms of band powers.
pub const FEATURE_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub name: String,
    /// `[lo, hi)` in Hz.
    pub lo: f64,
    pub hi: f64,
}

/// Delta through gamma.
pub fn standard_bands() -> Vec<Band> {
    BANDS
        .iter()
        .zip(BAND_NAMES)
        .map(|(&(lo, hi), name)| Band {
            name: name.to_string(),
            lo,
            hi,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Psd,
    De,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Psd => "psd",
            FeatureKind::De => "de",
        })
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "psd" => Ok(FeatureKind::Psd),
            "de" => Ok(FeatureKind::De),
            _ => Err(Error::Config(format!("unknown feature kind {s:?} (psd|de)"))),
        }
    }
}

/// `N × C × B` features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Tensor,
    pub band_names: Vec<String>,
    pub kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn samples(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn bands(&self) -> usize {
        self.values.shape()[2]
    }

    /// Single-band view (`B = 1`).
    pub fn band(&self, b: usize) -> Result<FeatureMatrix> {
        let nb = self.bands();
        if b >= nb {
            return Err(Error::OutOfBounds {
                op: "band",
                detail: format!("band {b} of {nb}"),
            });
        }
        let data = self.values.data().iter().skip(b).step_by(nb).copied().collect();
        Ok(FeatureMatrix {
            values: Tensor::new(&[self.samples(), self.channels(), 1], data)?,
            band_names: vec![self.band_names[b].clone()],
            kind: self.kind,
        })
    }

    /// Row-per-(window, channel) CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("window,channel");
        for b in &self.band_names {
            let _ = write!(s, ",{b}");
        }
        s.push('\n');
        let nb = self.bands();
        for (i, row) in self.values.data().chunks(nb).enumerate() {
            let _ = write!(s, "{},{}", i / self.channels(), i % self.channels());
            for v in row {
                let _ = write!(s, ",{v:e}");
            }
            s.push('\n');
        }
        s
    }
}

/// Bin ranges `[start, end)` of each band for a length-`t` window.
fn band_bins(t: usize, fs: f64, bands: &[Band]) -> Result<Vec<(usize, usize)>> {
    if bands.is_empty() {
        return Err(Error::Config("no bands requested".into()));
    }
    let nyquist = fs / 2.0;
    let df = fs / t as f64;
    bands
        .iter()
        .map(|b| {
            if !(b.lo >= 0.0 && b.hi > b.lo) {
                return Err(Error::Config(format!("band {} [{}, {}) invalid", b.name, b.lo, b.hi)));
            }
            if b.hi > nyquist + 1e-9 {
                return Err(Error::Config(format!(
                    "band {} reaches {} Hz above Nyquist {nyquist} Hz",
                    b.name, b.hi
                )));
            }
            let start = (b.lo / df - 1e-9).ceil() as usize;
            let end = ((b.hi / df - 1e-9).ceil() as usize).min(t / 2 + 1);
            if start >= end {
                return Err(Error::Config(format!(
                    "band {} holds no frequency bin at resolution {df} Hz",
                    b.name
                )));
            }
            Ok((start, end))
        })
        .collect()
}

/// One-sided periodogram scaled so the bins sum to the signal's mean square.
pub fn periodogram(x: &[f64]) -> Vec<f64> {
    let t = x.len();
    let t2 = (t * t) as f64;
    rdft(x)
        .iter()
        .enumerate()
        .map(|(k, c)| onesided_weight(k, t) * c.norm_sqr() / t2)
        .collect()
}

fn band_features(ds: &EEGDataset, bands: &[Band], kind: FeatureKind) -> Result<FeatureMatrix> {
    let (n, c, t) = (ds.len(), ds.channels(), ds.time_len());
    let bins = band_bins(t, ds.sample_rate(), bands)?;
    let mut out = Vec::with_capacity(n * c * bands.len());
    for row in ds.windows().data().chunks(t) {
        let p = periodogram(row);
        for &(s, e) in &bins {
            let energy: f64 = p[s..e].iter().sum();
            out.push(match kind {
                FeatureKind::Psd => (energy / (e - s) as f64 + FEATURE_EPS).ln(),
                FeatureKind::De => differential_entropy(energy),
            });
        }
    }
    let values = Tensor::new(&[n, c, bands.len()], out)?;
    values.validate_finite("band features")?;
    Ok(FeatureMatrix {
        values,
        band_names: bands.iter().map(|b| b.name.clone()).collect(),
        kind,
    })
}

/// `½·ln(2πe·σ²)` with the argument floored at [`FEATURE_EPS`].
pub fn differential_entropy(variance: f64) -> f64 {
    0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * variance).max(FEATURE_EPS).ln()
}

/// Log of the mean periodogram power inside each band.
pub fn psd_features(ds: &EEGDataset, bands: &[Band]) -> Result<FeatureMatrix> {
    band_features(ds, bands, FeatureKind::Psd)
}

/// Differential entropy of each band's energy (sum of its periodogram bins).
pub fn de_features(ds: &EEGDataset, bands: &[Band]) -> Result<FeatureMatrix> {
    band_features(ds, bands, FeatureKind::De)
}

pub fn features(ds: &EEGDataset, bands: &[Band], kind: FeatureKind) -> Result<FeatureMatrix> {
    band_features(ds, bands, kind)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    /// Width after the band-axis layer.
    pub band_hidden: usize,
    /// Width after the channel-axis layer.
    pub channel_hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub train_frac: f64,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            band_hidden: 32,
            channel_hidden: 64,
            epochs: 200,
            batch_size: 32,
            lr: 1e-3,
            weight_decay: 0.01,
            train_frac: 0.8,
            init_std: 0.1,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.band_hidden == 0 || self.channel_hidden == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("classifier widths, epochs and batch size must be positive".into()));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::Config(format!("train_frac {} outside (0, 1)", self.train_frac)));
        }
        if !(self.init_std > 0.0) {
            return Err(Error::Config("init_std must be positive".into()));
        }
        self.optimizer().validate()
    }

    fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierReport {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub train_size: usize,
    pub test_size: usize,
}

/// Band-axis layer + GELU, then channel-axis layer + GELU, then a linear
/// head over the flattened result.
pub struct Mlp2 {
    pub store: ParamStore,
    band: Linear,
    channel: Linear,
    head: Linear,
    channels: usize,
    bands: usize,
    classes: usize,
}

impl Mlp2 {
    pub fn new(channels: usize, bands: usize, classes: usize, cfg: &ClassifierConfig) -> Self {
        let mut store = ParamStore::new();
        let mut r = rng::derive(cfg.seed, 12);
        let mut pb = ParamBuilder {
            store: &mut store,
            rng: &mut r,
            init_std: cfg.init_std,
        };
        let band = Linear::new(&mut pb, "cls.band", bands, cfg.band_hidden, true);
        let channel = Linear::new(&mut pb, "cls.channel", channels, cfg.channel_hidden, true);
        let head = Linear::new(&mut pb, "cls.head", cfg.band_hidden * cfg.channel_hidden, classes, true);
        Mlp2 {
            store,
            band,
            channel,
            head,
            channels,
            bands,
            classes,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Logits (`n × classes`) for an `n × C × B` batch.
    pub fn logits(&self, cx: &mut Ctx, x: &Tensor) -> Result<Var> {
        let n = x.shape()[0];
        if x.shape() != [n, self.channels, self.bands] {
            return Err(Error::shape("mlp2", x.shape(), &[n, self.channels, self.bands]));
        }
        let (c, h1) = (self.channels, self.band.d_out);
        let xv = cx.tape.constant(x.clone().reshape(&[n * c, self.bands])?);
        let h = self.band.forward(cx, xv)?;
        let h = cx.tape.gelu(h);
        // (n·c) × h1  →  (h1·n) × c, row j·n + i holding sample i, unit j
        let ht = cx.tape.transpose(h)?;
        let ht = cx.tape.reshape(ht, &[h1 * n, c])?;
        let g = self.channel.forward(cx, ht)?;
        let g = cx.tape.gelu(g);
        let order: Vec<usize> = (0..n).flat_map(|i| (0..h1).map(move |j| j * n + i)).collect();
        let g = cx.tape.gather_rows(g, &order)?;
        let flat = cx.tape.reshape(g, &[n, h1 * self.channel.d_out])?;
        self.head.forward(cx, flat)
    }

    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let mut tape = Tape::new();
        let mut cx = Ctx::new(&mut tape, &self.store, Mode::Eval);
        let l = self.logits(&mut cx, x)?;
        let lt = tape.value(l);
        Ok(lt
            .data()
            .chunks(self.classes)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                    .0
            })
            .collect())
    }
}

fn take(x: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let per = x.len() / x.shape()[0];
    let mut data = Vec::with_capacity(idx.len() * per);
    for &i in idx {
        data.extend_from_slice(&x.data()[i * per..(i + 1) * per]);
    }
    let mut shape = x.shape().to_vec();
    shape[0] = idx.len();
    Tensor::new(&shape, data)
}

/// Standardize every (channel, band) column with statistics of `fit`.
fn zscore(fit: &Tensor, apply: &mut [&mut Tensor]) {
    let n = fit.shape()[0];
    let per = fit.len() / n;
    let mut mean = vec![0.0; per];
    let mut sq = vec![0.0; per];
    for row in fit.data().chunks(per) {
        for (j, v) in row.iter().enumerate() {
            mean[j] += v / n as f64;
        }
    }
    for row in fit.data().chunks(per) {
        for (j, v) in row.iter().enumerate() {
            sq[j] += (v - mean[j]) * (v - mean[j]) / n as f64;
        }
    }
    let sd: Vec<f64> = sq.iter().map(|v| if *v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
    for t in apply {
        for row in t.data_mut().chunks_mut(per) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - mean[j]) / sd[j];
            }
        }
    }
}

fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}

/// Seeded split, z-scoring on the training part, AdamW training, then
/// accuracy on both parts.
pub fn mlp2_train_eval(features: &FeatureMatrix, labels: &[u16], cfg: &ClassifierConfig) -> Result<ClassifierReport> {
    cfg.validate()?;
    let n = features.samples();
    if labels.len() != n {
        return Err(Error::shape("mlp2 labels", &[labels.len()], &[n]));
    }
    let mut distinct: Vec<u16> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::invalid("classification needs at least two distinct labels"));
    }
    if n < 2 {
        return Err(Error::invalid("classification needs at least two samples"));
    }
    let classes = *distinct.last().unwrap() as usize + 1;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::derive(cfg.seed, 11));
    let n_train = ((n as f64 * cfg.train_frac).round() as usize).clamp(1, n - 1);
    let (tr, te) = order.split_at(n_train);
    let mut x_train = take(&features.values, tr)?;
    let mut x_test = take(&features.values, te)?;
    let fit = x_train.clone();
    zscore(&fit, &mut [&mut x_train, &mut x_test]);
    let y_train: Vec<usize> = tr.iter().map(|&i| labels[i] as usize).collect();
    let y_test: Vec<usize> = te.iter().map(|&i| labels[i] as usize).collect();

    let mut model = Mlp2::new(features.channels(), features.bands(), classes, cfg);
    let mut opt = AdamW::new(&model.store, cfg.optimizer())?;
    let mut shuffle = rng::derive(cfg.seed, 13);
    let mut idx: Vec<usize> = (0..n_train).collect();
    for _ in 0..cfg.epochs {
        idx.shuffle(&mut shuffle);
        for batch in idx.chunks(cfg.batch_size) {
            let xb = take(&x_train, batch)?;
            let yb: Vec<usize> = batch.iter().map(|&i| y_train[i]).collect();
            let mut tape = Tape::new();
            let mut cx = Ctx::new(&mut tape, &model.store, Mode::Eval);
            let logits = model.logits(&mut cx, &xb)?;
            let loss = tape.cross_entropy(logits, &yb)?;
            tape.backward(loss)?;
            let mut grads = model.store.zero_grads();
            tape.accumulate_param_grads(&mut grads);
            opt.step(&mut model.store, &grads)?;
        }
    }
    model.store.validate_finite()?;
    Ok(ClassifierReport {
        train_accuracy: accuracy(&model.predict(&x_train)?, &y_train),
        test_accuracy: accuracy(&model.predict(&x_test)?, &y_test),
        train_size: n_train,
        test_size: n - n_train,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    /// Visible channels only.
    Lr,
    /// Reconstruction of every channel from the visible ones.
    Sr,
    /// The recorded full montage.
    Gt,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Lr => "LR",
            Arm::Sr => "SR",
            Arm::Gt => "GT",
        })
    }
}

/// Test accuracy per arm for every single band and for all bands together.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmTable {
    pub kind: FeatureKind,
    /// Column names: band names then `all`.
    pub columns: Vec<String>,
    pub rows: Vec<(Arm, Vec<f64>)>,
}

impl ArmTable {
    pub fn get(&self, arm: Arm, column: &str) -> Option<f64> {
        let j = self.columns.iter().position(|c| c == column)?;
        self.rows.iter().find(|(a, _)| *a == arm).map(|(_, v)| v[j])
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("features,arm,{}\n", self.columns.join(","));
        for (arm, vals) in &self.rows {
            let _ = write!(s, "{},{arm}", self.kind);
            for v in vals {
                let _ = write!(s, ",{v:.6}");
            }
            s.push('\n');
        }
        s
    }
}

/// The three input variants of `ds` for a reconstructor.
pub fn arm_datasets(model: &dyn Reconstructor, ds: &EEGDataset) -> Result<[(Arm, EEGDataset); 3]> {
    let spec = model.spec();
    if ds.channels() != spec.c_sr() {
        return Err(Error::shape("compare_arms", &[ds.channels()], &[spec.c_sr()]));
    }
    let lr = ds.select_channels(spec.visible())?;
    let sr = ds.map_windows(|_, w| model.reconstruct(&spec.low_res(w)?))?;
    Ok([(Arm::Lr, lr), (Arm::Sr, sr), (Arm::Gt, ds.clone())])
}

/// Accuracy of one arm: each band alone, then all bands.
pub fn arm_accuracies(ds: &EEGDataset, kind: FeatureKind, bands: &[Band], cfg: &ClassifierConfig) -> Result<Vec<f64>> {
    let labels = ds
        .labels()
        .ok_or_else(|| Error::invalid("dataset has no labels"))?;
    let f = features(ds, bands, kind)?;
    let mut acc = Vec::with_capacity(bands.len() + 1);
    for b in 0..bands.len() {
        acc.push(mlp2_train_eval(&f.band(b)?, labels, cfg)?.test_accuracy);
    }
    acc.push(mlp2_train_eval(&f, labels, cfg)?.test_accuracy);
    Ok(acc)
}

pub fn compare_arms(
    model: &dyn Reconstructor,
    ds: &EEGDataset,
    kind: FeatureKind,
    bands: &[Band],
    cfg: &ClassifierConfig,
) -> Result<ArmTable> {
    let mut rows = Vec::with_capacity(3);
    for (arm, d) in arm_datasets(model, ds)? {
        rows.push((arm, arm_accuracies(&d, kind, bands, cfg)?));
    }
    let mut columns: Vec<String> = bands.iter().map(|b| b.name.clone()).collect();
    columns.push("all".into());
    Ok(ArmTable { kind, columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montage::ElectrodeMontage;
    use std::f64::consts::PI;

    fn tone_dataset(freq: f64, amp: f64, phase: f64) -> EEGDataset {
        tones_dataset(&[freq], amp, phase)
    }

    fn tones_dataset(freqs: &[f64], amp: f64, phase: f64) -> EEGDataset {
        let m = ElectrodeMontage::builtin("toy_6").unwrap();
        let fs = 128.0;
        let t = 256;
        let data: Vec<f64> = (0..6)
            .flat_map(|_| {
                (0..t).map(move |i| {
                    freqs
                        .iter()
                        .map(|f| amp * (2.0 * PI * f * i as f64 / fs + phase).sin())
                        .sum::<f64>()
                })
            })
            .collect();
        EEGDataset::new(m, fs, Tensor::new(&[1, 6, t], data).unwrap(), None).unwrap()
    }

    #[test]
    fn tone_lands_in_its_band() {
        let f = psd_features(&tone_dataset(10.0, 1.0, 0.3), &standard_bands()).unwrap();
        let row = &f.values.data()[..5];
        let best = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(best, 2);
    }

    #[test]
    fn zero_signal_hits_the_guard() {
        let f = psd_features(&tone_dataset(10.0, 0.0, 0.0), &standard_bands()).unwrap();
        for v in f.values.data() {
            assert_eq!(*v, FEATURE_EPS.ln());
        }
    }

    #[test]
    fn periodogram_sums_to_mean_square() {
        let x: Vec<f64> = (0..37).map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.3).collect();
        let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let total: f64 = periodogram(&x).iter().sum();
        assert!((total - ms).abs() < 1e-12);
    }

    #[test]
    fn de_closed_forms() {
        let z = 1.0 / (2.0 * PI * std::f64::consts::E);
        assert!(differential_entropy(z).abs() < 1e-14);
        assert!((differential_entropy(1.0) - 1.418_938_533_204_672_7).abs() < 1e-12);
        let freqs = [2.0, 6.0, 10.0, 20.0, 40.0];
        let a = de_features(&tones_dataset(&freqs, 1.0, 0.0), &standard_bands()).unwrap();
        let b = de_features(&tones_dataset(&freqs, 2.0, 0.0), &standard_bands()).unwrap();
        for (x, y) in a.values.data().iter().zip(b.values.data()) {
            assert!((y - x - 2f64.ln()).abs() < 1e-6, "{x} {y}");
        }
    }

    #[test]
    fn bands_above_nyquist_rejected() {
        let m = ElectrodeMontage::builtin("toy_6").unwrap();
        let ds = EEGDataset::new(m, 64.0, Tensor::zeros(&[1, 6, 64]), None).unwrap();
        assert!(psd_features(&ds, &standard_bands()).is_err());
    }

    #[test]
    fn band_view_picks_column() {
        let f = FeatureMatrix {
            values: Tensor::new(&[1, 2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap(),
            band_names: vec!["a".into(), "b".into(), "c".into()],
            kind: FeatureKind::Psd,
        };
        assert_eq!(f.band(1).unwrap().values.data(), &[2., 5.]);
        assert!(f.band(3).is_err());
    }

    #[test]
    fn separable_features_are_learned() {
        // class k has mean 3k on channel k, noise elsewhere
        let mut r = rng::seeded(4);
        let (n, c, b) = (120, 3, 2);
        let labels: Vec<u16> = (0..n).map(|i| (i % 3) as u16).collect();
        let mut data = Vec::new();
        for &y in &labels {
            for ch in 0..c {
                for _ in 0..b {
                    let mean = if ch == y as usize { 3.0 } else { 0.0 };
                    data.push(mean + rng::normal(&mut r, 0.5));
                }
            }
        }
        let f = FeatureMatrix {
            values: Tensor::new(&[n, c, b], data).unwrap(),
            band_names: vec!["x".into(), "y".into()],
            kind: FeatureKind::Psd,
        };
        let cfg = ClassifierConfig {
            epochs: 60,
            ..Default::default()
        };
        let rep = mlp2_train_eval(&f, &labels, &cfg).unwrap();
        assert!(rep.test_accuracy >= 0.95, "{rep:?}");
    }

    #[test]
    fn single_class_rejected() {
        let f = FeatureMatrix {
            values: Tensor::zeros(&[4, 2, 1]),
            band_names: vec!["x".into()],
            kind: FeatureKind::De,
        };
        assert!(mlp2_train_eval(&f, &[1, 1, 1, 1], &ClassifierConfig::default()).is_err());
    }
}
