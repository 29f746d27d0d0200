//! Finite-difference check of a hand-built expression and of one model loss.

use estformer::layers::Ctx;
use estformer::mask::mask_case;
use estformer::model::{EstFormer, Hyperparams};
use estformer::tensor::{grad_check, param_grad_check, Mode};
use estformer::{ElectrodeMontage, Tensor};

fn main() -> estformer::Result<()> {
    let x = Tensor::new(&[3, 4], (0..12).map(|i| (i as f64 * 0.37).sin()).collect())?;
    let err = grad_check(
        |t, v| {
            let s = t.softmax_rows(v);
            let g = t.gelu(s);
            let w = t.constant(Tensor::full(&[4, 2], 0.5));
            let y = t.matmul(g, w)?;
            Ok(t.sum_sq(y))
        },
        &x,
        1e-5,
    )?;
    println!("softmax -> gelu -> matmul: max rel error {err:.2e}");

    let montage = ElectrodeMontage::builtin("toy_6")?;
    let hp = Hyperparams {
        dropout: 0.0,
        init_std: 0.2,
        ..Hyperparams::default()
    };
    let model = EstFormer::new(mask_case(&montage, 2, 1)?, 16, hp, 3)?;
    let window = Tensor::new(&[6, 16], (0..96).map(|i| (i as f64 * 0.21).cos()).collect())?;
    let err = param_grad_check(
        |t, s| {
            let mut cx = Ctx::new(t, s, Mode::Eval);
            Ok(model.loss(&mut cx, &window)?.0)
        },
        &model.store,
        1e-5,
    )?;
    println!("training loss, {} parameters: max rel error {err:.2e}", model.num_scalars());
    Ok(())
}
