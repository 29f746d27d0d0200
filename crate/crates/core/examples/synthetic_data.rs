//! Generate labelled synthetic EEG, write it to a container file and read it back.
//!
//! cargo run --release --example synthetic_data -- [out.eeg]

use estformer::data::{load, save, synth_generate, SyntheticConfig};
use estformer::ElectrodeMontage;

fn main() -> estformer::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("synthetic.eeg").to_string_lossy().into_owned());
    let montage = ElectrodeMontage::builtin("standard_32")?;
    let cfg = SyntheticConfig {
        n_classes: 3,
        seed: 7,
        ..Default::default()
    };
    let ds = synth_generate(&cfg, &montage, 256.0, 2.0, 60)?;
    save(&ds, &path)?;
    let back = load(&path)?;
    println!(
        "{path}: {} windows, {} channels, {} samples at {} Hz, {} classes",
        back.len(),
        back.channels(),
        back.time_len(),
        back.sample_rate(),
        back.num_classes()
    );
    assert_eq!(back.windows(), ds.windows());
    let w = back.window(0);
    for (i, e) in back.montage().electrodes().iter().take(4).enumerate() {
        let row = w.row(i);
        let rms = (row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64).sqrt();
        println!("  window 0 {:<4} rms {rms:.3}", e.name);
    }
    Ok(())
}
