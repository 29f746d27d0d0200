//! Save a model, reload it against the montage and confirm identical output.

use estformer::checkpoint::{load_checkpoint, read_hyper, save_checkpoint};
use estformer::mask::mask_case;
use estformer::model::{EstFormer, Hyperparams};
use estformer::{ElectrodeMontage, Tensor};

fn main() -> estformer::Result<()> {
    let montage = ElectrodeMontage::builtin("standard_32")?;
    let spec = mask_case(&montage, 4, 2)?;
    let model = EstFormer::new(spec.clone(), 64, Hyperparams::default(), 9)?;
    let path = std::env::temp_dir().join("example.ckpt");
    save_checkpoint(&model, &model.store, &path)?;

    for (key, value) in read_hyper(&std::fs::read(&path)?)? {
        println!("{key:>20} = {value:?}");
    }
    let back = load_checkpoint(&path, &montage)?;
    let x = Tensor::new(&[spec.c_lr(), 64], (0..spec.c_lr() * 64).map(|i| (i as f64 * 0.1).sin()).collect())?;
    let diff = model.reconstruct(&x)?.max_abs_diff(&back.reconstruct(&x)?);
    println!("reloaded {} parameters, max output difference {diff}", back.num_scalars());
    Ok(())
}
