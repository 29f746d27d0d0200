//! Plain-text `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional and falls
//! back to its default; unknown or repeated keys are errors. [`RunConfig::to_text`]
//! writes every key, so a saved copy fully pins a run.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::baselines::{SplineConfig, DEFAULT_NEIGHBORS};
use crate::data::{SyntheticConfig, BAND_NAMES};
use crate::downstream::{ClassifierConfig, FeatureKind};
use crate::error::{Error, Result};
use crate::mask::{mask_case, MaskSpec};
use crate::model::Hyperparams;
use crate::montage::ElectrodeMontage;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Built-in montage name or path to a montage file.
    pub montage: String,
    pub sample_rate: f64,
    pub window_seconds: f64,
    pub n_windows: usize,
    pub synth: SyntheticConfig,
    pub scale: usize,
    pub mask_case: usize,
    pub train_frac: f64,
    pub split_seed: u64,
    pub model_seed: u64,
    pub model: Hyperparams,
    pub train: TrainConfig,
    pub spline: SplineConfig,
    pub an_neighbors: usize,
    pub features: FeatureKind,
    pub classifier: ClassifierConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            montage: "standard_32".into(),
            sample_rate: 256.0,
            window_seconds: 1.0,
            n_windows: 500,
            synth: SyntheticConfig::default(),
            scale: 4,
            mask_case: 1,
            train_frac: 0.8,
            split_seed: 0,
            model_seed: 0,
            model: Hyperparams::default(),
            train: TrainConfig::default(),
            spline: SplineConfig::default(),
            an_neighbors: DEFAULT_NEIGHBORS,
            features: FeatureKind::De,
            classifier: ClassifierConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true/false, got {v:?}"))),
    }
}

fn parse_range(key: &str, v: &str) -> Result<(f64, f64)> {
    let (a, b) = v
        .split_once(',')
        .ok_or_else(|| Error::Config(format!("{key}: expected lo,hi")))?;
    Ok((parse(key, a.trim())?, parse(key, b.trim())?))
}

impl RunConfig {
    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let s = &self.synth;
        let m = &self.model;
        let t = &self.train;
        let c = &self.classifier;
        let mut v: Vec<(String, String)> = vec![
            ("montage".into(), self.montage.clone()),
            ("sample_rate".into(), self.sample_rate.to_string()),
            ("window_seconds".into(), self.window_seconds.to_string()),
            ("n_windows".into(), self.n_windows.to_string()),
            ("n_sources".into(), s.n_sources.to_string()),
        ];
        for (name, (lo, hi)) in BAND_NAMES.iter().zip(s.band_amp) {
            v.push((format!("amp_{name}"), format!("{lo},{hi}")));
        }
        let rest: [(&str, String); 44] = [
            ("noise_std", s.noise_std.to_string()),
            ("noise_ar", s.noise_ar.to_string()),
            ("n_classes", s.n_classes.to_string()),
            ("class_perturbation", s.class_perturbation.to_string()),
            ("jitter", s.jitter.to_string()),
            ("kappa", s.kappa.to_string()),
            ("data_seed", s.seed.to_string()),
            ("scale", self.scale.to_string()),
            ("mask_case", self.mask_case.to_string()),
            ("train_frac", self.train_frac.to_string()),
            ("split_seed", self.split_seed.to_string()),
            ("model_seed", self.model_seed.to_string()),
            ("alpha_s", m.alpha_s.to_string()),
            ("alpha_t", m.alpha_t.to_string()),
            ("mlp_ratio", m.mlp_ratio.to_string()),
            ("sim_depth", m.sim_depth.to_string()),
            ("trm_depth", m.trm_depth.to_string()),
            ("cab_outer_residual", m.cab_outer_residual.to_string()),
            ("pos_scale", m.pos_scale.to_string()),
            ("init_std", m.init_std.to_string()),
            ("dropout", t.dropout.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("lr", t.lr.to_string()),
            ("beta1", t.beta1.to_string()),
            ("beta2", t.beta2.to_string()),
            ("adam_eps", t.eps.to_string()),
            ("weight_decay", t.weight_decay.to_string()),
            ("epochs", t.epochs.to_string()),
            ("train_seed", t.seed.to_string()),
            ("clip_norm", t.clip_norm.map_or("none".into(), |x| x.to_string())),
            ("spline_order", self.spline.m.to_string()),
            ("spline_terms", self.spline.n_terms.to_string()),
            ("spline_lambda", self.spline.lambda.to_string()),
            ("an_neighbors", self.an_neighbors.to_string()),
            ("features", self.features.to_string()),
            ("cls_band_hidden", c.band_hidden.to_string()),
            ("cls_channel_hidden", c.channel_hidden.to_string()),
            ("cls_epochs", c.epochs.to_string()),
            ("cls_batch_size", c.batch_size.to_string()),
            ("cls_lr", c.lr.to_string()),
            ("cls_weight_decay", c.weight_decay.to_string()),
            ("cls_train_frac", c.train_frac.to_string()),
            ("cls_init_std", c.init_std.to_string()),
            ("cls_seed", c.seed.to_string()),
        ];
        v.extend(rest.into_iter().map(|(k, x)| (k.to_string(), x)));
        v
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let s = &mut self.synth;
        let m = &mut self.model;
        let t = &mut self.train;
        let c = &mut self.classifier;
        if let Some(band) = key.strip_prefix("amp_") {
            let b = BAND_NAMES
                .iter()
                .position(|n| *n == band)
                .ok_or_else(|| Error::Config(format!("unknown key {key:?}")))?;
            s.band_amp[b] = parse_range(key, v)?;
            return Ok(());
        }
        match key {
            "montage" => self.montage = v.to_string(),
            "sample_rate" => self.sample_rate = parse(key, v)?,
            "window_seconds" => self.window_seconds = parse(key, v)?,
            "n_windows" => self.n_windows = parse(key, v)?,
            "n_sources" => s.n_sources = parse(key, v)?,
            "noise_std" => s.noise_std = parse(key, v)?,
            "noise_ar" => s.noise_ar = parse(key, v)?,
            "n_classes" => s.n_classes = parse(key, v)?,
            "class_perturbation" => s.class_perturbation = parse(key, v)?,
            "jitter" => s.jitter = parse(key, v)?,
            "kappa" => s.kappa = parse(key, v)?,
            "data_seed" => s.seed = parse(key, v)?,
            "scale" => self.scale = parse(key, v)?,
            "mask_case" => self.mask_case = parse(key, v)?,
            "train_frac" => self.train_frac = parse(key, v)?,
            "split_seed" => self.split_seed = parse(key, v)?,
            "model_seed" => self.model_seed = parse(key, v)?,
            "alpha_s" => m.alpha_s = parse(key, v)?,
            "alpha_t" => m.alpha_t = parse(key, v)?,
            "mlp_ratio" => m.mlp_ratio = parse(key, v)?,
            "sim_depth" => m.sim_depth = parse(key, v)?,
            "trm_depth" => m.trm_depth = parse(key, v)?,
            "cab_outer_residual" => m.cab_outer_residual = parse_bool(key, v)?,
            "pos_scale" => m.pos_scale = parse(key, v)?,
            "init_std" => m.init_std = parse(key, v)?,
            "dropout" => {
                t.dropout = parse(key, v)?;
                m.dropout = t.dropout;
            }
            "batch_size" => t.batch_size = parse(key, v)?,
            "lr" => t.lr = parse(key, v)?,
            "beta1" => t.beta1 = parse(key, v)?,
            "beta2" => t.beta2 = parse(key, v)?,
            "adam_eps" => t.eps = parse(key, v)?,
            "weight_decay" => t.weight_decay = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "train_seed" => t.seed = parse(key, v)?,
            "clip_norm" => {
                t.clip_norm = if v == "none" { None } else { Some(parse(key, v)?) };
            }
            "spline_order" => self.spline.m = parse(key, v)?,
            "spline_terms" => self.spline.n_terms = parse(key, v)?,
            "spline_lambda" => self.spline.lambda = parse(key, v)?,
            "an_neighbors" => self.an_neighbors = parse(key, v)?,
            "features" => self.features = v.parse()?,
            "cls_band_hidden" => c.band_hidden = parse(key, v)?,
            "cls_channel_hidden" => c.channel_hidden = parse(key, v)?,
            "cls_epochs" => c.epochs = parse(key, v)?,
            "cls_batch_size" => c.batch_size = parse(key, v)?,
            "cls_lr" => c.lr = parse(key, v)?,
            "cls_weight_decay" => c.weight_decay = parse(key, v)?,
            "cls_train_frac" => c.train_frac = parse(key, v)?,
            "cls_init_std" => c.init_std = parse(key, v)?,
            "cls_seed" => c.seed = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("line {}: key {k:?} repeated", i + 1)));
            }
            cfg.set(k, v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.spline.validate()?;
        self.classifier.validate()?;
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::Config(format!("train_frac {} outside (0, 1)", self.train_frac)));
        }
        if self.an_neighbors == 0 {
            return Err(Error::Config("an_neighbors must be positive".into()));
        }
        if !(self.sample_rate > 0.0 && self.window_seconds > 0.0) || self.n_windows == 0 {
            return Err(Error::Config("sample_rate, window_seconds and n_windows must be positive".into()));
        }
        Ok(())
    }

    /// Built-in name first, then a file path.
    pub fn resolve_montage(&self) -> Result<ElectrodeMontage> {
        ElectrodeMontage::resolve(&self.montage)
    }

    pub fn mask_spec(&self, montage: &ElectrodeMontage) -> Result<MaskSpec> {
        mask_case(montage, self.scale, self.mask_case)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("lr", "0.00123").unwrap();
        cfg.set("amp_alpha", "0.25, 3").unwrap();
        cfg.set("clip_norm", "1.5").unwrap();
        cfg.set("features", "psd").unwrap();
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.synth.band_amp[2], (0.25, 3.0));
    }

    #[test]
    fn every_key_is_settable() {
        let cfg = RunConfig::default();
        let mut other = RunConfig::default();
        for (k, v) in cfg.entries() {
            other.set(&k, &v).unwrap();
        }
        assert_eq!(cfg, other);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse("colour = red"), Err(Error::Config(_))));
        assert!(RunConfig::parse("lr = 1\nlr = 2").is_err());
        assert!(RunConfig::parse("epochs = many").is_err());
        assert!(RunConfig::parse("just words").is_err());
        assert!(RunConfig::parse("train_frac = 1.5").is_err());
        let ok = RunConfig::parse("# comment\n\nepochs = 3  # trailing\n").unwrap();
        assert_eq!(ok.train.epochs, 3);
    }
}
