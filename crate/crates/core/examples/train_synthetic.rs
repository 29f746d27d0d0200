//! Train a small model on synthetic data and compare it with the spline and
//! neighbor-average baselines.
//!
//! cargo run --release --example train_synthetic -- [epochs] [lr] [batch] [seed]

use estformer::baselines::{NeighborAverage, SplineConfig, SplineInterpolator, DEFAULT_NEIGHBORS};
use estformer::data::{split, synth_generate, SyntheticConfig};
use estformer::mask::mask_case;
use estformer::model::{EstFormer, Hyperparams};
use estformer::train::{evaluate, train, EpochLog, TrainConfig};
use estformer::ElectrodeMontage;

fn main() -> estformer::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let epochs: usize = arg(0, "5").parse().expect("epochs");
    let lr: f64 = arg(1, "1e-3").parse().expect("lr");
    let batch: usize = arg(2, "8").parse().expect("batch");
    let seed: u64 = arg(3, "0").parse().expect("seed");

    let montage = ElectrodeMontage::builtin("standard_32")?;
    let cfg = SyntheticConfig {
        seed,
        ..Default::default()
    };
    let ds = synth_generate(&cfg, &montage, 256.0, 1.0, 500)?;
    let (train_set, test_set) = split(&ds, 0.8, seed)?;
    let spec = mask_case(&montage, 4, 1)?;

    let an = evaluate(&NeighborAverage::new(&spec, DEFAULT_NEIGHBORS)?, &test_set)?;
    let si = evaluate(&SplineInterpolator::new(&spec, SplineConfig::default())?, &test_set)?;
    println!("AN  nmse {:.4} pcc {:.4}", an.nmse.mean, an.pcc.mean);
    println!("SI  nmse {:.4} pcc {:.4}", si.nmse.mean, si.pcc.mean);

    let hp = Hyperparams {
        dropout: 0.0,
        ..Hyperparams::default()
    };
    let mut model = EstFormer::new(spec, ds.time_len(), hp, seed)?;
    println!("parameters: {}", model.num_scalars());
    let tc = TrainConfig {
        epochs,
        lr,
        batch_size: batch,
        dropout: 0.0,
        weight_decay: 0.0,
        seed,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &train_set, Some(&test_set), &tc)?;
    println!("{}", EpochLog::CSV_HEADER);
    for row in &report.log {
        println!("{}", row.csv_row());
    }
    Ok(())
}
