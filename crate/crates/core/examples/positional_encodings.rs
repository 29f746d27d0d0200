//! Sinusoidal encodings of time steps and of electrode coordinates.

use estformer::positional::{normalize_coords, pe_1d, pe_3d};
use estformer::ElectrodeMontage;

fn main() -> estformer::Result<()> {
    let time = pe_1d(8, 6)?;
    println!("time encoding, 8 steps x 6 dims");
    for t in 0..8 {
        let row: Vec<String> = time.values.row(t).iter().map(|v| format!("{v:+.3}")).collect();
        println!("  t={t} {}", row.join(" "));
    }

    let montage = ElectrodeMontage::builtin("toy_6")?;
    let coords = normalize_coords(&montage)?;
    let space = pe_3d(&montage, 12, 100.0)?;
    println!("electrode encoding, {} electrodes x 12 dims", montage.len());
    for (i, e) in montage.electrodes().iter().enumerate() {
        let c = coords[i];
        let head: Vec<String> = space.values.row(i)[..4].iter().map(|v| format!("{v:+.3}")).collect();
        println!("  {:<4} ({:+.2}, {:+.2}, {:+.2}) -> {} ...", e.name, c[0], c[1], c[2], head.join(" "));
    }
    Ok(())
}
