//! Training curves and a ground-truth/reconstruction overlay as SVG.
//!
//! cargo run --release --example plot -- [out_dir]

use estformer::baselines::{SplineConfig, SplineInterpolator};
use estformer::data::{split, synth_generate, SyntheticConfig};
use estformer::mask::mask_case;
use estformer::model::{EstFormer, Hyperparams, Reconstructor};
use estformer::plot::{overlay, training_curves};
use estformer::train::{train, EpochLog, TrainConfig};
use estformer::ElectrodeMontage;

fn main() -> estformer::Result<()> {
    let dir = std::env::args().nth(1).map(Into::into).unwrap_or_else(std::env::temp_dir);
    let montage = ElectrodeMontage::builtin("standard_16")?;
    let ds = synth_generate(&SyntheticConfig::default(), &montage, 128.0, 1.0, 40)?;
    let (tr, te) = split(&ds, 0.75, 0)?;
    let spec = mask_case(&montage, 4, 1)?;
    let hp = Hyperparams {
        dropout: 0.0,
        ..Hyperparams::default()
    };
    let mut model = EstFormer::new(spec.clone(), ds.time_len(), hp, 0)?;
    let tc = TrainConfig {
        epochs: 6,
        dropout: 0.0,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &tr, Some(&te), &tc)?;
    let mut csv = format!("{}\n", EpochLog::CSV_HEADER);
    for row in &report.log {
        csv += &(row.csv_row() + "\n");
    }
    let curves = dir.join("curves.svg");
    std::fs::write(&curves, training_curves(&csv, &["train_fmse", "test_nmse"])?.to_svg()?)?;

    let gt = te.window(0);
    let lr = spec.low_res(&gt)?;
    let ours = model.reconstruct(&lr)?;
    let si = SplineInterpolator::new(&spec, SplineConfig::default())?.reconstruct(&lr)?;
    let ch = spec.masked()[0];
    let name = &montage.electrodes()[ch].name;
    let traces = [("ground truth", gt.row(ch)), ("model", ours.row(ch)), ("spline", si.row(ch))];
    let trace = dir.join("overlay.svg");
    std::fs::write(&trace, overlay(&format!("channel {name}"), ds.sample_rate(), &traces).to_svg()?)?;
    println!("wrote {} and {}", curves.display(), trace.display());
    Ok(())
}
