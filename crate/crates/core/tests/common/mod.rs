#![allow(dead_code)]

use estformer::attention::{msa_forward, MsaParams};
use estformer::blocks::{block_forward, cab_forward, BlockParams, CabParams};
use estformer::layers::Ctx;
use estformer::loss::{auto_weighted_var, fmse_var, mae_var};
use estformer::mask::mask_case;
use estformer::model::{EstFormer, Hyperparams};
use estformer::params::{ParamBuilder, ParamStore};
use estformer::rng;
use estformer::tensor::{grad_check, param_grad_check, Mode, Tape, Var};
use estformer::{ElectrodeMontage, Result, Tensor};

pub const STEP: f64 = 1e-5;

pub fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut r = rng::seeded(seed);
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng::normal(&mut r, 1.0)).collect()).unwrap()
}

/// Random values with magnitude at least 0.2 (keeps |x| away from its kink).
pub fn random_away_from_zero(shape: &[usize], seed: u64) -> Tensor {
    random(shape, seed).map(|v| if v.abs() < 0.2 { v.signum() * 0.2 + v } else { v })
}

/// `Σ w ⊙ v` with fixed random `w`: a scalar that depends on every entry.
pub fn project(t: &mut Tape, v: Var) -> Result<Var> {
    let w = t.constant(random(t.shape(v), 777));
    let p = t.mul(v, w)?;
    Ok(t.sum(p))
}

fn check(name: &'static str, x: &Tensor, f: impl Fn(&mut Tape, Var) -> Result<Var>) -> (&'static str, f64) {
    (name, grad_check(|t, v| { let y = f(t, v)?; project(t, y) }, x, STEP).unwrap())
}

fn check_scalar(name: &'static str, x: &Tensor, f: impl Fn(&mut Tape, Var) -> Result<Var>) -> (&'static str, f64) {
    (name, grad_check(f, x, STEP).unwrap())
}

/// Relative gradient error of every primitive, each with respect to every
/// differentiable operand.
pub fn primitive_suite() -> Vec<(&'static str, f64)> {
    let a = random(&[3, 4], 1);
    let b = random(&[4, 5], 2);
    let c = random(&[3, 4], 3);
    let bias = random(&[4], 4);
    let ln_x = random(&[4, 6], 5);
    let ln_g = random(&[6], 6);
    let ln_b = random(&[6], 7);
    let sig = random(&[3, 10], 8);
    let mut out = vec![
        check("matmul (lhs)", &a, |t, v| {
            let k = t.constant(b.clone());
            t.matmul(v, k)
        }),
        check("matmul (rhs)", &b, |t, v| {
            let k = t.constant(a.clone());
            t.matmul(k, v)
        }),
        check("add", &a, |t, v| {
            let k = t.constant(c.clone());
            t.add(v, k)
        }),
        check("sub (lhs)", &a, |t, v| {
            let k = t.constant(c.clone());
            t.sub(v, k)
        }),
        check("sub (rhs)", &a, |t, v| {
            let k = t.constant(c.clone());
            t.sub(k, v)
        }),
        check("mul", &a, |t, v| {
            let k = t.constant(c.clone());
            t.mul(v, k)
        }),
        check("mul (self)", &a, |t, v| t.mul(v, v)),
        check("scale", &a, |t, v| Ok(t.scale(v, -1.7))),
        check("add_bias (input)", &a, |t, v| {
            let k = t.constant(bias.clone());
            t.add_bias(v, k)
        }),
        check("add_bias (bias)", &bias, |t, v| {
            let k = t.constant(a.clone());
            t.add_bias(k, v)
        }),
        check("transpose", &a, |t, v| t.transpose(v)),
        check("reshape", &a, |t, v| t.reshape(v, &[2, 6])),
        check("softmax_rows", &a, |t, v| Ok(t.softmax_rows(v))),
        check("layer_norm (input)", &ln_x, |t, v| {
            let g = t.constant(ln_g.clone());
            let bb = t.constant(ln_b.clone());
            t.layer_norm(v, g, bb, 1e-5)
        }),
        check("layer_norm (gain)", &ln_g, |t, v| {
            let x = t.constant(ln_x.clone());
            let bb = t.constant(ln_b.clone());
            t.layer_norm(x, v, bb, 1e-5)
        }),
        check("layer_norm (bias)", &ln_b, |t, v| {
            let x = t.constant(ln_x.clone());
            let g = t.constant(ln_g.clone());
            t.layer_norm(x, g, v, 1e-5)
        }),
        check("gelu", &a, |t, v| Ok(t.gelu(v))),
        check("exp", &a, |t, v| Ok(t.exp(v))),
        check("concat (rows, first)", &a, |t, v| {
            let k = t.constant(c.clone());
            t.concat(v, k, 0)
        }),
        check("concat (rows, second)", &a, |t, v| {
            let k = t.constant(c.clone());
            t.concat(k, v, 0)
        }),
        check("concat (columns)", &a, |t, v| {
            let k = t.constant(random(&[3, 2], 9));
            t.concat(v, k, 1)
        }),
        check("slice (rows)", &a, |t, v| t.slice(v, 0, 1, 2)),
        check("slice (columns)", &a, |t, v| t.slice(v, 1, 1, 2)),
        check("gather_rows (repeats)", &a, |t, v| t.gather_rows(v, &[2, 0, 2, 1])),
        check("dropout", &a, |t, v| {
            let mut r = rng::seeded(3);
            let mut mode = Mode::Train(&mut r);
            t.dropout(v, 0.5, &mut mode)
        }),
        check("rdft_rows", &sig, |t, v| t.rdft_rows(v)),
        check("rdft_rows (odd length)", &random(&[2, 7], 10), |t, v| t.rdft_rows(v)),
        check_scalar("sum", &a, |t, v| Ok(t.sum(v))),
        check_scalar("mean", &a, |t, v| Ok(t.mean(v))),
        check_scalar("sum_abs", &random_away_from_zero(&[3, 4], 11), |t, v| Ok(t.sum_abs(v))),
        check_scalar("sum_sq", &a, |t, v| Ok(t.sum_sq(v))),
        check_scalar("weighted_sum_sq_cols", &a, |t, v| t.weighted_sum_sq_cols(v, &[1.0, 2.0, 0.5, 3.0])),
        check_scalar("cross_entropy", &a, |t, v| t.cross_entropy(v, &[3, 0, 2])),
    ];
    out.extend(loss_suite());
    out
}

fn loss_suite() -> Vec<(&'static str, f64)> {
    let gt = random(&[3, 12], 20);
    let sr = random(&[3, 12], 21);
    let s = Tensor::new(&[1, 2], vec![0.3, -0.4]).unwrap();
    vec![
        check_scalar("fmse", &sr, |t, v| {
            let g = t.constant(gt.clone());
            fmse_var(t, g, v)
        }),
        check_scalar("mae", &sr, |t, v| {
            let g = t.constant(gt.clone());
            mae_var(t, g, v)
        }),
        check_scalar("auto-weighted total", &s, |t, v| {
            let f = t.constant(Tensor::scalar(2.5));
            let m = t.constant(Tensor::scalar(0.7));
            let s1 = t.slice(v, 1, 0, 1)?;
            let s2 = t.slice(v, 1, 1, 1)?;
            let s1 = t.reshape(s1, &[1])?;
            let s2 = t.reshape(s2, &[1])?;
            auto_weighted_var(t, f, m, s1, s2)
        }),
    ]
}

fn builder<'a>(store: &'a mut ParamStore, r: &'a mut rng::Rng) -> ParamBuilder<'a> {
    ParamBuilder {
        store,
        rng: r,
        init_std: 0.4,
    }
}

/// Attention, block and CAB gradients with respect to inputs and parameters.
pub fn module_suite() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let z = random(&[5, 6], 30);

    let mut store = ParamStore::new();
    let mut r = rng::seeded(31);
    let msa = MsaParams::new(&mut builder(&mut store, &mut r), "a", 6, 3).unwrap();
    let f = |t: &mut Tape, s: &ParamStore, x: Var| -> Result<Var> {
        let mut cx = Ctx::new(t, s, Mode::Eval);
        let y = msa_forward(&mut cx, &msa, x)?;
        project(t, y)
    };
    out.push(("msa (input)", grad_check(|t, v| f(t, &store, v), &z, STEP).unwrap()));
    out.push((
        "msa (params)",
        param_grad_check(
            |t, s| {
                let x = t.constant(z.clone());
                f(t, s, x)
            },
            &store,
            STEP,
        )
        .unwrap(),
    ));

    let mut store = ParamStore::new();
    let mut r = rng::seeded(32);
    let block = BlockParams::new(&mut builder(&mut store, &mut r), "b", 6, 1, 2, 0.0).unwrap();
    let f = |t: &mut Tape, s: &ParamStore, x: Var| -> Result<Var> {
        let mut cx = Ctx::new(t, s, Mode::Eval);
        let y = block_forward(&mut cx, &block, x)?;
        project(t, y)
    };
    out.push(("block (input)", grad_check(|t, v| f(t, &store, v), &z, STEP).unwrap()));
    out.push((
        "block (params)",
        param_grad_check(
            |t, s| {
                let x = t.constant(z.clone());
                f(t, s, x)
            },
            &store,
            STEP,
        )
        .unwrap(),
    ));

    let mut store = ParamStore::new();
    let mut r = rng::seeded(33);
    let cab = CabParams::new(&mut builder(&mut store, &mut r), "c", 5, 6, 2, 0.0, true).unwrap();
    let f = |t: &mut Tape, s: &ParamStore, x: Var| -> Result<Var> {
        let mut cx = Ctx::new(t, s, Mode::Eval);
        let y = cab_forward(&mut cx, &cab, x)?;
        project(t, y)
    };
    out.push(("cab (input)", grad_check(|t, v| f(t, &store, v), &z, STEP).unwrap()));
    out.push((
        "cab (params)",
        param_grad_check(
            |t, s| {
                let x = t.constant(z.clone());
                f(t, s, x)
            },
            &store,
            STEP,
        )
        .unwrap(),
    ));
    out
}

/// Full training loss of a toy model (6 channels, T = 16, scale 2) with
/// respect to every parameter.
pub fn model_loss_error() -> f64 {
    let m = ElectrodeMontage::builtin("toy_6").unwrap();
    let spec = mask_case(&m, 2, 1).unwrap();
    let hp = Hyperparams {
        dropout: 0.0,
        init_std: 0.2,
        ..Hyperparams::default()
    };
    let mut model = EstFormer::new(spec, 16, hp, 5).unwrap();
    // nonzero log-variances so both loss weights differ from one
    let (s1, s2) = model.log_vars;
    model.store.value_mut(s1).data_mut()[0] = 0.3;
    model.store.value_mut(s2).data_mut()[0] = -0.2;
    let window = random(&[6, 16], 40);
    param_grad_check(
        |t, s| {
            let mut cx = Ctx::new(t, s, Mode::Eval);
            Ok(model.loss(&mut cx, &window)?.0)
        },
        &model.store,
        STEP,
    )
    .unwrap()
}
