//! Multi-head self-attention in two orientations, plus the analytical FLOPs
//! counts used to compare them with a 2D convolution.
//!
//! Space-wise attention treats each channel row as a token; time-wise
//! attention transposes first so each time sample is a token.

use std::fmt;

use crate::error::{Error, Result};
use crate::layers::{Ctx, Linear};
use crate::params::ParamBuilder;
use crate::tensor::Var;

/// Heads used for space-wise attention.
pub const SSA_HEADS: usize = 3;
/// Heads used for time-wise attention.
pub const TSA_HEADS: usize = 1;

/// Square, bias-free projections for queries, keys, values and output.
#[derive(Debug, Clone, Copy)]
pub struct MsaParams {
    pub num_heads: usize,
    pub d_feature: usize,
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
}

impl MsaParams {
    pub fn new(pb: &mut ParamBuilder, name: &str, d_feature: usize, num_heads: usize) -> Result<Self> {
        if num_heads == 0 || d_feature == 0 || d_feature % num_heads != 0 {
            return Err(Error::invalid(format!(
                "attention width {d_feature} not divisible into {num_heads} heads"
            )));
        }
        let mut proj = |p: &str| Linear::new(pb, &format!("{name}.{p}"), d_feature, d_feature, false);
        Ok(MsaParams {
            num_heads,
            d_feature,
            wq: proj("wq"),
            wk: proj("wk"),
            wv: proj("wv"),
            wo: proj("wo"),
        })
    }

    pub fn head_width(&self) -> usize {
        self.d_feature / self.num_heads
    }

    pub fn num_scalars(d_feature: usize) -> usize {
        4 * d_feature * d_feature
    }
}

/// Scaled dot-product attention over the rows of `z` (`n_tokens × d_feature`).
pub fn msa_forward(cx: &mut Ctx, p: &MsaParams, z: Var) -> Result<Var> {
    let shape = cx.tape.shape(z).to_vec();
    if shape.len() != 2 || shape[1] != p.d_feature {
        return Err(Error::shape("msa_forward", &shape, &[shape[0], p.d_feature]));
    }
    let q = p.wq.forward(cx, z)?;
    let k = p.wk.forward(cx, z)?;
    let v = p.wv.forward(cx, z)?;
    let hw = p.head_width();
    let scale = 1.0 / (hw as f64).sqrt();
    let mut heads: Option<Var> = None;
    for h in 0..p.num_heads {
        let (qh, kh, vh) = if p.num_heads == 1 {
            (q, k, v)
        } else {
            (
                cx.tape.slice(q, 1, h * hw, hw)?,
                cx.tape.slice(k, 1, h * hw, hw)?,
                cx.tape.slice(v, 1, h * hw, hw)?,
            )
        };
        let kt = cx.tape.transpose(kh)?;
        let scores = cx.tape.matmul(qh, kt)?;
        let scores = cx.tape.scale(scores, scale);
        let attn = cx.tape.softmax_rows(scores);
        let out = cx.tape.matmul(attn, vh)?;
        heads = Some(match heads {
            None => out,
            Some(acc) => cx.tape.concat(acc, out, 1)?,
        });
    }
    p.wo.forward(cx, heads.expect("at least one head"))
}

/// Space-wise attention: channel rows of a `d_s × d_t` input are tokens.
pub fn ssa(cx: &mut Ctx, p: &MsaParams, z: Var) -> Result<Var> {
    msa_forward(cx, p, z)
}

/// Time-wise attention: transpose, attend over time tokens, transpose back.
pub fn tsa(cx: &mut Ctx, p: &MsaParams, z: Var) -> Result<Var> {
    let zt = cx.tape.transpose(z)?;
    let y = msa_forward(cx, p, zt)?;
    cx.tape.transpose(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlopsKind {
    Ssa,
    Tsa,
    Conv2d,
}

impl fmt::Display for FlopsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlopsKind::Ssa => "SSA",
            FlopsKind::Tsa => "TSA",
            FlopsKind::Conv2d => "Conv2D",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlopsReport {
    pub kind: FlopsKind,
    pub d_s: u64,
    pub d_t: u64,
    /// `(c_in, c_out, k_s, k_t)` for convolutions.
    pub conv: Option<(u64, u64, u64, u64)>,
    pub flops: u64,
}

impl FlopsReport {
    pub const CSV_HEADER: &'static str = "op,d_s,d_t,c_in,c_out,k_s,k_t,flops";

    pub fn csv_row(&self) -> String {
        let (ci, co, ks, kt) = match self.conv {
            Some((a, b, c, d)) => (a.to_string(), b.to_string(), c.to_string(), d.to_string()),
            None => Default::default(),
        };
        format!("{},{},{},{ci},{co},{ks},{kt},{}", self.kind, self.d_s, self.d_t, self.flops)
    }
}

fn positive(args: &[(&str, u64)]) -> Result<()> {
    for (name, v) in args {
        if *v == 0 {
            return Err(Error::invalid(format!("{name} must be positive")));
        }
    }
    Ok(())
}

fn checked(parts: &[u64]) -> Result<u64> {
    parts
        .iter()
        .try_fold(1u64, |acc, &v| acc.checked_mul(v))
        .ok_or_else(|| Error::invalid("FLOPs count overflows u64"))
}

/// `4·d_s·d_t² + 2·d_s²·d_t`.
pub fn flops_ssa(d_s: u64, d_t: u64) -> Result<u64> {
    positive(&[("d_s", d_s), ("d_t", d_t)])?;
    checked(&[4, d_s, d_t, d_t])?
        .checked_add(checked(&[2, d_s, d_s, d_t])?)
        .ok_or_else(|| Error::invalid("FLOPs count overflows u64"))
}

/// `4·d_t·d_s² + 2·d_t²·d_s`.
pub fn flops_tsa(d_s: u64, d_t: u64) -> Result<u64> {
    flops_ssa(d_t, d_s)
}

/// `c_in·c_out·k_s·k_t·d_s·d_t`.
pub fn flops_conv2d(c_in: u64, c_out: u64, k_s: u64, k_t: u64, d_s: u64, d_t: u64) -> Result<u64> {
    positive(&[
        ("c_in", c_in),
        ("c_out", c_out),
        ("k_s", k_s),
        ("k_t", k_t),
        ("d_s", d_s),
        ("d_t", d_t),
    ])?;
    checked(&[c_in, c_out, k_s, k_t, d_s, d_t])
}

/// SSA, TSA and (when `conv` is given) Conv2D reports for one input size.
pub fn flops_report(d_s: u64, d_t: u64, conv: Option<(u64, u64, u64, u64)>) -> Result<Vec<FlopsReport>> {
    let mut out = vec![
        FlopsReport {
            kind: FlopsKind::Ssa,
            d_s,
            d_t,
            conv: None,
            flops: flops_ssa(d_s, d_t)?,
        },
        FlopsReport {
            kind: FlopsKind::Tsa,
            d_s,
            d_t,
            conv: None,
            flops: flops_tsa(d_s, d_t)?,
        },
    ];
    if let Some((ci, co, ks, kt)) = conv {
        out.push(FlopsReport {
            kind: FlopsKind::Conv2d,
            d_s,
            d_t,
            conv,
            flops: flops_conv2d(ci, co, ks, kt, d_s, d_t)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamStore;
    use crate::rng;
    use crate::tensor::{Mode, Tape, Tensor};

    fn params(d: usize, heads: usize) -> (ParamStore, MsaParams) {
        let mut store = ParamStore::new();
        let mut r = rng::seeded(11);
        let mut pb = ParamBuilder {
            store: &mut store,
            rng: &mut r,
            init_std: 0.5,
        };
        let p = MsaParams::new(&mut pb, "a", d, heads).unwrap();
        (store, p)
    }

    #[test]
    fn single_token_is_projection_only() {
        let (store, p) = params(6, 3);
        let z = Tensor::new(&[1, 6], vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6]).unwrap();
        let mut tape = Tape::new();
        let mut cx = Ctx::new(&mut tape, &store, Mode::Eval);
        let zv = cx.tape.constant(z.clone());
        let y = msa_forward(&mut cx, &p, zv).unwrap();
        // z·Wv·Wo
        let wv = store.value(p.wv.w);
        let wo = store.value(p.wo.w);
        let mut zv_ = [0.0; 6];
        for j in 0..6 {
            zv_[j] = (0..6).map(|i| z.data()[i] * wv.at2(i, j)).sum();
        }
        for j in 0..6 {
            let e: f64 = (0..6).map(|i| zv_[i] * wo.at2(i, j)).sum();
            assert!((tape.value(y).data()[j] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_widths() {
        let mut store = ParamStore::new();
        let mut r = rng::seeded(0);
        let mut pb = ParamBuilder {
            store: &mut store,
            rng: &mut r,
            init_std: 0.02,
        };
        assert!(MsaParams::new(&mut pb, "a", 7, 3).is_err());
        let (store, p) = params(6, 3);
        let mut tape = Tape::new();
        let mut cx = Ctx::new(&mut tape, &store, Mode::Eval);
        let z = cx.tape.constant(Tensor::zeros(&[2, 5]));
        assert!(msa_forward(&mut cx, &p, z).is_err());
    }

    #[test]
    fn flops_values() {
        assert_eq!(flops_ssa(64, 1600).unwrap(), 668_467_200);
        assert_eq!(flops_tsa(64, 1600).unwrap(), 353_894_400);
        assert_eq!(flops_conv2d(128, 128, 33, 1, 64, 1600).unwrap(), 55_364_812_800);
        assert!(flops_ssa(0, 3).is_err());
        let rows = flops_report(64, 1600, Some((128, 128, 33, 1))).unwrap();
        assert_eq!(rows[2].csv_row(), "Conv2D,64,1600,128,128,33,1,55364812800");
        assert_eq!(rows[0].csv_row(), "SSA,64,1600,,,,,668467200");
    }
}
