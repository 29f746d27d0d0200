//! Neighbor averaging and spherical spline interpolation on every bundled
//! mask case of one montage.

use estformer::baselines::{NeighborAverage, SplineConfig, SplineInterpolator, DEFAULT_NEIGHBORS};
use estformer::data::{synth_generate, SyntheticConfig};
use estformer::mask::{mask_cases, SCALES};
use estformer::train::evaluate;
use estformer::ElectrodeMontage;

fn main() -> estformer::Result<()> {
    let montage = ElectrodeMontage::builtin("standard_64")?;
    let ds = synth_generate(&SyntheticConfig::default(), &montage, 256.0, 1.0, 40)?;
    println!("scale case visible   AN nmse   SI nmse   SI cond");
    for scale in SCALES {
        for (i, spec) in mask_cases(&montage, scale)?.iter().enumerate() {
            let an = evaluate(&NeighborAverage::new(spec, DEFAULT_NEIGHBORS)?, &ds)?;
            let si = SplineInterpolator::new(spec, SplineConfig::default())?;
            let cond = si.condition();
            let si = evaluate(&si, &ds)?;
            println!(
                "{scale:>5} {:>4} {:>7} {:>9.4} {:>9.4} {cond:>9.1e}",
                i + 1,
                spec.c_lr(),
                an.nmse.mean,
                si.nmse.mean
            );
        }
    }
    Ok(())
}
