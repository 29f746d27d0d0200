//! Command-line front end.
//!
//! Failures print one line to stderr,
//! `error kind=<config|io|numeric> code=<n> message="..."`, and exit with
//! 2 (config), 3 (I/O or file format) or 4 (numeric).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use estformer::attention::{flops_report, FlopsReport};
use estformer::baselines::{NeighborAverage, SplineInterpolator};
use estformer::checkpoint::{load_checkpoint, save_checkpoint};
use estformer::config::RunConfig;
use estformer::data::{self, split, synth_generate, EEGDataset};
use estformer::downstream::{compare_arms, features, mlp2_train_eval, standard_bands, FeatureKind};
use estformer::error::ErrorCategory;
use estformer::mask::{mask_case, MaskSpec};
use estformer::metrics::{MetricSummary, SampleMetrics};
use estformer::model::{EstFormer, Reconstructor};
use estformer::plot::{overlay, training_curves};
use estformer::train::{log_csv, train};
use estformer::{Error, Result};

#[derive(Parser)]
#[command(name = "estformer", version, about = "EEG spatial super-resolution toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    /// Mean of the nearest visible electrodes.
    An,
    /// Spherical spline.
    Si,
}

#[derive(clap::Args)]
struct Source {
    /// Trained checkpoint.
    #[arg(long, conflicts_with = "baseline")]
    ckpt: Option<PathBuf>,
    /// Training-free interpolation instead of a checkpoint.
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    /// Mask case (1-4); defaults to the checkpoint's mask or the config.
    #[arg(long)]
    case: Option<usize>,
    /// Scale factor (2, 4 or 8).
    #[arg(long)]
    scale: Option<usize>,
    /// Run config (baseline settings, default mask).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes the best checkpoint, `<stem>.log.csv` and `<stem>.config`.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Held-out set; by default the data is split by `train_frac`.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-window NMSE, SNR and PCC on the masked channels, as CSV.
    Eval {
        #[command(flatten)]
        src: Source,
        /// Precomputed reconstruction to score instead of a model.
        #[arg(long, conflicts_with_all = ["ckpt", "baseline"])]
        sr: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the full-montage reconstruction of every window.
    Interpolate {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attention and convolution FLOPs as CSV.
    Flops {
        /// Spatial size (channels).
        #[arg(long)]
        ds: u64,
        /// Temporal size (samples).
        #[arg(long)]
        dt: u64,
        /// Also report a convolution: c_in,c_out,k_s,k_t.
        #[arg(long)]
        conv: Option<String>,
    },
    /// Band features per window and channel, as CSV.
    Features {
        #[arg(long)]
        data: PathBuf,
        /// psd or de; defaults to the config.
        #[arg(long)]
        kind: Option<FeatureKind>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and test the band-feature classifier, per band and on all bands.
    Classify {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        kind: Option<FeatureKind>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classifier accuracy on LR, SR and GT inputs.
    CompareArms {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        kind: Option<FeatureKind>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SVG line plots of a training log or of signal traces.
    Plot {
        /// Training log CSV.
        #[arg(long, conflicts_with = "overlay")]
        log: Option<PathBuf>,
        /// Log columns to draw.
        #[arg(long, default_value = "train_fmse,train_mae,test_nmse")]
        columns: String,
        /// Datasets to overlay (ground truth first).
        #[arg(long, num_args = 1..)]
        overlay: Vec<PathBuf>,
        /// Electrode name; defaults to the first channel.
        #[arg(long)]
        channel: Option<String>,
        #[arg(long, default_value_t = 0)]
        window: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_file(p),
        None => Ok(RunConfig::default()),
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            use std::io::Write;
            if let Err(e) = std::io::stdout().lock().write_all(text.as_bytes()) {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(e.into());
                }
            }
        }
    }
    Ok(())
}

fn reconstructor(src: &Source, ds: &EEGDataset) -> Result<Box<dyn Reconstructor>> {
    let cfg = load_config(src.config.as_deref())?;
    let montage = ds.montage();
    match (&src.ckpt, src.baseline) {
        (Some(path), None) => {
            let model = load_checkpoint(path, montage)?;
            if src.case.is_none() && src.scale.is_none() {
                return Ok(Box::new(model));
            }
            let spec = mask_case(
                montage,
                src.scale.unwrap_or(model.spec.scale()),
                src.case.unwrap_or(1),
            )?;
            Ok(Box::new(model.with_spec(spec)?))
        }
        (None, Some(b)) => {
            let spec = mask_case(
                montage,
                src.scale.unwrap_or(cfg.scale),
                src.case.unwrap_or(cfg.mask_case),
            )?;
            Ok(match b {
                Baseline::An => Box::new(NeighborAverage::new(&spec, cfg.an_neighbors)?),
                Baseline::Si => Box::new(SplineInterpolator::new(&spec, cfg.spline.clone())?),
            })
        }
        _ => Err(Error::Config("give exactly one of --ckpt or --baseline".into())),
    }
}

fn metrics_csv(method: &str, samples: Vec<SampleMetrics>) -> String {
    let mut s = String::from("method,window,nmse,snr_db,pcc\n");
    for (i, m) in samples.iter().enumerate() {
        let _ = writeln!(s, "{method},{i},{:e},{:e},{:e}", m.nmse, m.snr_db, m.pcc);
    }
    let sum = MetricSummary::from_samples(samples);
    let _ = writeln!(s, "{method},mean,{:e},{:e},{:e}", sum.nmse.mean, sum.snr_db.mean, sum.pcc.mean);
    let _ = writeln!(s, "{method},std,{:e},{:e},{:e}", sum.nmse.std, sum.snr_db.std, sum.pcc.std);
    s
}

fn score(spec: &MaskSpec, gt: &EEGDataset, sr: impl Fn(usize, &estformer::Tensor) -> Result<estformer::Tensor>) -> Result<Vec<SampleMetrics>> {
    (0..gt.len())
        .map(|i| {
            let w = gt.window(i);
            let (x_lr, truth) = spec.split(&w)?;
            let full = sr(i, &x_lr)?;
            SampleMetrics::compute(&truth, &full.select_rows(spec.masked())?)
        })
        .collect()
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::GenData { config, out } => {
            let cfg = load_config(config.as_deref())?;
            let montage = cfg.resolve_montage()?;
            let ds = synth_generate(&cfg.synth, &montage, cfg.sample_rate, cfg.window_seconds, cfg.n_windows)?;
            data::save(&ds, &out)?;
            cfg.save(sibling(&out, ".config"))?;
            eprintln!(
                "wrote {} windows of {} x {} to {}",
                ds.len(),
                ds.channels(),
                ds.time_len(),
                out.display()
            );
        }
        Cmd::Train { config, data: path, test, out } => {
            let cfg = load_config(config.as_deref())?;
            let ds = data::load(&path)?;
            let (train_set, test_set) = match test {
                Some(t) => (ds, data::load(t)?),
                None => split(&ds, cfg.train_frac, cfg.split_seed)?,
            };
            let spec = cfg.mask_spec(train_set.montage())?;
            let mut model = EstFormer::new(spec, train_set.time_len(), cfg.model.clone(), cfg.model_seed)?;
            let report = train(&mut model, &train_set, Some(&test_set), &cfg.train)?;
            save_checkpoint(&model, &report.best, &out)?;
            std::fs::write(sibling(&out, ".log.csv"), log_csv(&report.log))?;
            cfg.save(sibling(&out, ".config"))?;
            let best = &report.log[report.best_epoch - 1];
            println!(
                "best_epoch={} test_nmse={:e} test_snr={:e} test_pcc={:e}",
                report.best_epoch, best.test_nmse, best.test_snr, best.test_pcc
            );
        }
        Cmd::Eval { src, sr, data: path, out } => {
            let gt = data::load(&path)?;
            let text = match sr {
                Some(sr_path) => {
                    let sr = data::load(sr_path)?;
                    if sr.windows().shape() != gt.windows().shape() {
                        return Err(Error::Format("SR and ground-truth datasets differ in shape".into()));
                    }
                    let cfg = load_config(src.config.as_deref())?;
                    let spec = mask_case(
                        gt.montage(),
                        src.scale.unwrap_or(cfg.scale),
                        src.case.unwrap_or(cfg.mask_case),
                    )?;
                    metrics_csv("given", score(&spec, &gt, |i, _| Ok(sr.window(i)))?)
                }
                None => {
                    let r = reconstructor(&src, &gt)?;
                    let samples = score(r.spec(), &gt, |_, x| r.reconstruct(x))?;
                    metrics_csv(r.name(), samples)
                }
            };
            emit(&text, out.as_deref())?;
        }
        Cmd::Interpolate { src, data: path, out } => {
            let ds = data::load(&path)?;
            let r = reconstructor(&src, &ds)?;
            let spec = r.spec().clone();
            let sr = ds.map_windows(|_, w| r.reconstruct(&spec.low_res(w)?))?;
            data::save(&sr, &out)?;
        }
        Cmd::Flops { ds, dt, conv } => {
            let conv = match conv {
                Some(s) => {
                    let v: Vec<u64> = s
                        .split(',')
                        .map(|x| x.trim().parse().map_err(|_| Error::Config(format!("--conv: bad number {x:?}"))))
                        .collect::<Result<_>>()?;
                    match v[..] {
                        [a, b, c, d] => Some((a, b, c, d)),
                        _ => return Err(Error::Config("--conv expects c_in,c_out,k_s,k_t".into())),
                    }
                }
                None => None,
            };
            let rows = flops_report(ds, dt, conv)?;
            println!("{}", FlopsReport::CSV_HEADER);
            for r in rows {
                println!("{}", r.csv_row());
            }
        }
        Cmd::Features { data: path, kind, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let ds = data::load(&path)?;
            let f = features(&ds, &standard_bands(), kind.unwrap_or(cfg.features))?;
            emit(&f.to_csv(), out.as_deref())?;
        }
        Cmd::Classify { data: path, kind, config, out } => {
            let cfg = load_config(config.as_deref())?;
            let ds = data::load(&path)?;
            let labels = ds.labels().ok_or_else(|| Error::Config("dataset has no labels".into()))?;
            let kind = kind.unwrap_or(cfg.features);
            let f = features(&ds, &standard_bands(), kind)?;
            let mut s = String::from("features,band,train_accuracy,test_accuracy,train_size,test_size\n");
            let mut runs: Vec<(String, _)> = Vec::new();
            for b in 0..f.bands() {
                runs.push((f.band_names[b].clone(), mlp2_train_eval(&f.band(b)?, labels, &cfg.classifier)?));
            }
            runs.push(("all".into(), mlp2_train_eval(&f, labels, &cfg.classifier)?));
            for (band, r) in runs {
                let _ = writeln!(
                    s,
                    "{kind},{band},{:.6},{:.6},{},{}",
                    r.train_accuracy, r.test_accuracy, r.train_size, r.test_size
                );
            }
            emit(&s, out.as_deref())?;
        }
        Cmd::CompareArms { src, data: path, kind, out } => {
            let cfg = load_config(src.config.as_deref())?;
            let ds = data::load(&path)?;
            let r = reconstructor(&src, &ds)?;
            let table = compare_arms(r.as_ref(), &ds, kind.unwrap_or(cfg.features), &standard_bands(), &cfg.classifier)?;
            emit(&table.to_csv(), out.as_deref())?;
        }
        Cmd::Plot { log, columns, overlay: files, channel, window, out } => {
            let plot = match log {
                Some(p) => {
                    let cols: Vec<&str> = columns.split(',').map(str::trim).collect();
                    training_curves(&std::fs::read_to_string(p)?, &cols)?
                }
                None => {
                    if files.is_empty() {
                        return Err(Error::Config("give --log or --overlay".into()));
                    }
                    let sets = files.iter().map(data::load).collect::<Result<Vec<_>>>()?;
                    let channel = channel.unwrap_or_else(|| sets[0].montage().name(0).to_string());
                    let mut traces = Vec::new();
                    for (f, ds) in files.iter().zip(&sets) {
                        let ch = ds
                            .montage()
                            .index_of(&channel)
                            .ok_or_else(|| Error::Config(format!("{} has no channel {channel}", f.display())))?;
                        if window >= ds.len() {
                            return Err(Error::Config(format!("window {window} of {}", ds.len())));
                        }
                        let w = ds.window(window);
                        let label = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                        traces.push((label, w.row(ch).to_vec()));
                    }
                    let refs: Vec<(&str, &[f64])> = traces.iter().map(|(l, v)| (l.as_str(), v.as_slice())).collect();
                    overlay(&format!("{channel}, window {window}"), sets[0].sample_rate(), &refs)
                }
            };
            std::fs::write(&out, plot.to_svg()?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = match e.category() {
                ErrorCategory::Config => ("config", 2),
                ErrorCategory::Io => ("io", 3),
                ErrorCategory::Numeric => ("numeric", 4),
            };
            eprintln!("error kind={kind} code={code} message={:?}", e.to_string());
            ExitCode::from(code)
        }
    }
}
