//! Mini-batch training with AdamW and per-epoch evaluation.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::data::EEGDataset;
use crate::error::{Error, Result};
use crate::layers::Ctx;
use crate::metrics::{MetricSummary, SampleMetrics};
use crate::model::{EstFormer, Reconstructor};
use crate::optim::{clip_grad_norm, AdamW, AdamWConfig};
use crate::params::ParamStore;
use crate::rng;
use crate::tensor::{Mode, Tape};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub seed: u64,
    pub eps: f64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 36,
            lr: 5e-5,
            beta1: 0.9,
            beta2: 0.95,
            weight_decay: 0.5,
            dropout: 0.5,
            epochs: 10,
            seed: 0,
            eps: 1e-8,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer().validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip_norm {c} must be positive")));
            }
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_total: f64,
    pub train_fmse: f64,
    pub train_mae: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    /// NaN when no test set is given.
    pub test_nmse: f64,
    pub test_snr: f64,
    pub test_pcc: f64,
    pub seconds: f64,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str =
        "epoch,train_total,train_fmse,train_mae,sigma1_sq,sigma2_sq,test_nmse,test_snr,test_pcc,seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:.3}",
            self.epoch,
            self.train_total,
            self.train_fmse,
            self.train_mae,
            self.sigma1_sq,
            self.sigma2_sq,
            self.test_nmse,
            self.test_snr,
            self.test_pcc,
            self.seconds
        )
    }
}

pub fn log_csv(log: &[EpochLog]) -> String {
    let mut s = String::from(EpochLog::CSV_HEADER);
    s.push('\n');
    for row in log {
        let _ = writeln!(s, "{}", row.csv_row());
    }
    s
}

pub struct TrainReport {
    pub log: Vec<EpochLog>,
    /// Parameters of the epoch with the lowest test NMSE (the last epoch
    /// without a test set).
    pub best: ParamStore,
    pub best_epoch: usize,
}

/// Mean losses over one pass of `batch` windows; accumulates gradients of
/// the batch-mean total loss into `grads`.
fn batch_step(
    model: &EstFormer,
    data: &EEGDataset,
    batch: &[usize],
    rng: &mut rng::Rng,
    grads: &mut [Vec<f64>],
) -> Result<[f64; 3]> {
    let inv = 1.0 / batch.len() as f64;
    let mut sums = [0.0; 3];
    for &i in batch {
        let mut tape = Tape::new();
        let mut cx = Ctx::new(&mut tape, &model.store, Mode::Train(&mut *rng));
        let (total, lb) = model.loss(&mut cx, &data.window(i))?;
        let scaled = tape.scale(total, inv);
        tape.backward(scaled)?;
        tape.accumulate_param_grads(grads);
        sums[0] += lb.total * inv;
        sums[1] += lb.fmse * inv;
        sums[2] += lb.mae * inv;
    }
    Ok(sums)
}

/// Runs one optimizer step per mini-batch of a seeded shuffle; returns the
/// batch-averaged losses weighted by batch size.
pub fn train_epoch(
    model: &mut EstFormer,
    data: &EEGDataset,
    cfg: &TrainConfig,
    opt: &mut AdamW,
    rng: &mut rng::Rng,
) -> Result<[f64; 3]> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let mut totals = [0.0; 3];
    for batch in order.chunks(cfg.batch_size) {
        let mut grads = model.store.zero_grads();
        let l = batch_step(model, data, batch, rng, &mut grads)?;
        if let Some(c) = cfg.clip_norm {
            clip_grad_norm(&mut grads, c);
        }
        opt.step(&mut model.store, &grads)?;
        for k in 0..3 {
            totals[k] += l[k] * batch.len() as f64 / data.len() as f64;
        }
    }
    Ok(totals)
}

fn check_compatible(model: &EstFormer, ds: &EEGDataset) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    if ds.channels() != model.spec.c_sr() || ds.time_len() != model.time_len {
        return Err(Error::shape(
            "dataset vs model",
            &[ds.channels(), ds.time_len()],
            &[model.spec.c_sr(), model.time_len],
        ));
    }
    Ok(())
}

/// Train in place. Dropout in every MLP is set to `cfg.dropout` first.
pub fn train(
    model: &mut EstFormer,
    train_set: &EEGDataset,
    test_set: Option<&EEGDataset>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    check_compatible(model, train_set)?;
    if let Some(t) = test_set {
        check_compatible(model, t)?;
    }
    model.set_dropout(cfg.dropout)?;
    let mut opt = AdamW::new(&model.store, cfg.optimizer())?;
    let mut r = rng::derive(cfg.seed, 7);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best = model.store.clone();
    let mut best_epoch = 0;
    let mut best_nmse = f64::INFINITY;
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let [total, fmse, mae] = train_epoch(model, train_set, cfg, &mut opt, &mut r)?;
        model.store.validate_finite()?;
        let (s1, s2) = model.log_variances();
        let (nmse, snr, pcc) = match test_set {
            Some(t) => {
                let m = evaluate(model, t)?;
                (m.nmse.mean, m.snr_db.mean, m.pcc.mean)
            }
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        log.push(EpochLog {
            epoch,
            train_total: total,
            train_fmse: fmse,
            train_mae: mae,
            sigma1_sq: s1.exp(),
            sigma2_sq: s2.exp(),
            test_nmse: nmse,
            test_snr: snr,
            test_pcc: pcc,
            seconds: start.elapsed().as_secs_f64(),
        });
        if test_set.is_none() || nmse < best_nmse {
            best_nmse = nmse;
            best = model.store.clone();
            best_epoch = epoch;
        }
    }
    Ok(TrainReport {
        log,
        best,
        best_epoch,
    })
}

/// Per-window metrics on the masked channels, then mean and std.
pub fn evaluate(model: &dyn Reconstructor, ds: &EEGDataset) -> Result<MetricSummary> {
    let spec = model.spec();
    if ds.channels() != spec.c_sr() {
        return Err(Error::shape("evaluate", &[ds.channels()], &[spec.c_sr()]));
    }
    let mut samples = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let w = ds.window(i);
        let (x_lr, gt) = spec.split(&w)?;
        let x_sr = model.reconstruct(&x_lr)?;
        let pred = x_sr.select_rows(spec.masked())?;
        samples.push(SampleMetrics::compute(&gt, &pred)?);
    }
    Ok(MetricSummary::from_samples(samples))
}
