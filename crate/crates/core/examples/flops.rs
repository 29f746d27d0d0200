//! Cost of space-wise and time-wise attention next to a 2-D convolution.
//!
//! cargo run --release --example flops -- [channels] [samples]

use estformer::attention::{flops_conv2d, flops_ssa, flops_tsa};

fn main() -> estformer::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("integer")).collect();
    let ds = args.first().copied().unwrap_or(64);
    let dt = args.get(1).copied().unwrap_or(1600);
    println!("space-wise attention  {:>14}", flops_ssa(ds, dt)?);
    println!("time-wise attention   {:>14}", flops_tsa(ds, dt)?);
    println!("conv 128->128, 33x1   {:>14}", flops_conv2d(128, 128, 33, 1, ds, dt)?);
    Ok(())
}
