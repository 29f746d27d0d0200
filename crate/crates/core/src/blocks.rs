//! Pre-norm transformer blocks over channel tokens (SSAB) or time tokens
//! (TSAB), and the cross-attention block (CAB) chaining the two.

use crate::attention::{msa_forward, MsaParams, SSA_HEADS, TSA_HEADS};
use crate::error::{Error, Result};
use crate::layers::{Ctx, LayerNorm, Linear};
use crate::params::ParamBuilder;
use crate::tensor::Var;

/// `linear → GELU → dropout → linear`, hidden width `ratio · d`.
#[derive(Debug, Clone, Copy)]
pub struct MlpParams {
    pub fc1: Linear,
    pub fc2: Linear,
    pub dropout: f64,
}

impl MlpParams {
    pub fn new(pb: &mut ParamBuilder, name: &str, d: usize, ratio: usize, dropout: f64) -> Result<Self> {
        if ratio == 0 {
            return Err(Error::invalid("MLP ratio must be positive"));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::invalid(format!("dropout {dropout} outside [0, 1)")));
        }
        Ok(MlpParams {
            fc1: Linear::new(pb, &format!("{name}.fc1"), d, ratio * d, true),
            fc2: Linear::new(pb, &format!("{name}.fc2"), ratio * d, d, true),
            dropout,
        })
    }

    pub fn hidden(&self) -> usize {
        self.fc1.d_out
    }

    pub fn num_scalars(d: usize, ratio: usize) -> usize {
        Linear::num_scalars(d, ratio * d, true) + Linear::num_scalars(ratio * d, d, true)
    }
}

pub fn mlp_forward(cx: &mut Ctx, p: &MlpParams, z: Var) -> Result<Var> {
    let h = p.fc1.forward(cx, z)?;
    let h = cx.tape.gelu(h);
    let h = cx.tape.dropout(h, p.dropout, &mut cx.mode)?;
    p.fc2.forward(cx, h)
}

/// `y = z + MSA(LN z)`, then `y + MLP(LN y)`, with tokens as rows.
#[derive(Debug, Clone, Copy)]
pub struct BlockParams {
    pub ln1: LayerNorm,
    pub msa: MsaParams,
    pub ln2: LayerNorm,
    pub mlp: MlpParams,
}

pub type SsabParams = BlockParams;
pub type TsabParams = BlockParams;

impl BlockParams {
    pub fn new(
        pb: &mut ParamBuilder,
        name: &str,
        d: usize,
        heads: usize,
        ratio: usize,
        dropout: f64,
    ) -> Result<Self> {
        Ok(BlockParams {
            ln1: LayerNorm::new(pb, &format!("{name}.ln1"), d),
            msa: MsaParams::new(pb, &format!("{name}.attn"), d, heads)?,
            ln2: LayerNorm::new(pb, &format!("{name}.ln2"), d),
            mlp: MlpParams::new(pb, &format!("{name}.mlp"), d, ratio, dropout)?,
        })
    }

    /// Block whose tokens are channels: features span the time axis.
    pub fn ssab(pb: &mut ParamBuilder, name: &str, d_t: usize, ratio: usize, dropout: f64) -> Result<Self> {
        Self::new(pb, name, d_t, SSA_HEADS, ratio, dropout)
    }

    /// Block whose tokens are time samples: features span the channel axis.
    pub fn tsab(pb: &mut ParamBuilder, name: &str, d_s: usize, ratio: usize, dropout: f64) -> Result<Self> {
        Self::new(pb, name, d_s, TSA_HEADS, ratio, dropout)
    }

    pub fn width(&self) -> usize {
        self.msa.d_feature
    }

    pub fn num_scalars(d: usize, ratio: usize) -> usize {
        4 * d + MsaParams::num_scalars(d) + MlpParams::num_scalars(d, ratio)
    }
}

/// Pre-norm residual block over the rows of `z`.
pub fn block_forward(cx: &mut Ctx, p: &BlockParams, z: Var) -> Result<Var> {
    let h = p.ln1.forward(cx, z)?;
    let h = msa_forward(cx, &p.msa, h)?;
    let y = cx.tape.add(z, h)?;
    let h = p.ln2.forward(cx, y)?;
    let h = mlp_forward(cx, &p.mlp, h)?;
    cx.tape.add(y, h)
}

/// Space-wise block on `d_s × d_t`.
pub fn ssab_forward(cx: &mut Ctx, p: &SsabParams, z: Var) -> Result<Var> {
    block_forward(cx, p, z)
}

/// Time-wise block on `d_s × d_t`; runs the block on the transpose and
/// returns in the input orientation.
pub fn tsab_forward(cx: &mut Ctx, p: &TsabParams, z: Var) -> Result<Var> {
    let zt = cx.tape.transpose(z)?;
    let y = block_forward(cx, p, zt)?;
    cx.tape.transpose(y)
}

/// TSAB then SSAB, plus an optional skip from the CAB input.
#[derive(Debug, Clone, Copy)]
pub struct CabParams {
    pub tsab: TsabParams,
    pub ssab: SsabParams,
    pub outer_residual: bool,
}

impl CabParams {
    /// For inputs of `d_s` channel tokens by `d_t` features.
    pub fn new(
        pb: &mut ParamBuilder,
        name: &str,
        d_s: usize,
        d_t: usize,
        ratio: usize,
        dropout: f64,
        outer_residual: bool,
    ) -> Result<Self> {
        Ok(CabParams {
            tsab: BlockParams::tsab(pb, &format!("{name}.tsab"), d_s, ratio, dropout)?,
            ssab: BlockParams::ssab(pb, &format!("{name}.ssab"), d_t, ratio, dropout)?,
            outer_residual,
        })
    }

    pub fn num_scalars(d_s: usize, d_t: usize, ratio: usize) -> usize {
        BlockParams::num_scalars(d_s, ratio) + BlockParams::num_scalars(d_t, ratio)
    }
}

pub fn cab_forward(cx: &mut Ctx, p: &CabParams, z: Var) -> Result<Var> {
    let shape = cx.tape.shape(z);
    if shape.len() != 2 || shape[0] != p.tsab.width() || shape[1] != p.ssab.width() {
        return Err(Error::shape(
            "cab_forward",
            &shape.to_vec(),
            &[p.tsab.width(), p.ssab.width()],
        ));
    }
    let t = tsab_forward(cx, &p.tsab, z)?;
    let s = ssab_forward(cx, &p.ssab, t)?;
    if p.outer_residual {
        cx.tape.add(s, z)
    } else {
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamStore;
    use crate::rng;
    use crate::tensor::{Mode, Tape, Tensor};

    fn zero_all(store: &mut ParamStore) {
        // layer-norm gains stay at 1; everything else zero
        for p in store.iter_mut() {
            if !p.name.ends_with(".gain") {
                p.value = Tensor::zeros(p.value.shape());
            }
        }
    }

    #[test]
    fn zero_weights_make_identity_and_cab_doubles() {
        let mut store = ParamStore::new();
        let mut r = rng::seeded(1);
        let mut pb = ParamBuilder {
            store: &mut store,
            rng: &mut r,
            init_std: 0.02,
        };
        let cab = CabParams::new(&mut pb, "c", 4, 6, 2, 0.0, true).unwrap();
        zero_all(&mut store);
        let z: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).sin()).collect();
        let zt = Tensor::new(&[4, 6], z).unwrap();
        let mut tape = Tape::new();
        let mut cx = Ctx::new(&mut tape, &store, Mode::Eval);
        let zv = cx.tape.constant(zt.clone());
        let s = ssab_forward(&mut cx, &cab.ssab, zv).unwrap();
        let t = tsab_forward(&mut cx, &cab.tsab, zv).unwrap();
        let c = cab_forward(&mut cx, &cab, zv).unwrap();
        assert_eq!(tape.value(s), &zt);
        assert_eq!(tape.value(t), &zt);
        assert_eq!(tape.value(c), &zt.map(|v| 2.0 * v));
    }

    #[test]
    fn mlp_hidden_width_and_zero_output() {
        let mut store = ParamStore::new();
        let mut r = rng::seeded(1);
        let mut pb = ParamBuilder {
            store: &mut store,
            rng: &mut r,
            init_std: 0.02,
        };
        let mlp = MlpParams::new(&mut pb, "m", 5, 4, 0.5).unwrap();
        assert_eq!(mlp.hidden(), 20);
        assert_eq!(store.num_scalars(), MlpParams::num_scalars(5, 4));
        zero_all(&mut store);
        let mut tape = Tape::new();
        let mut cx = Ctx::new(&mut tape, &store, Mode::Eval);
        let z = cx.tape.constant(Tensor::full(&[3, 5], 1.5));
        let y = mlp_forward(&mut cx, &mlp, z).unwrap();
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cab_rejects_wrong_shape() {
        let mut store = ParamStore::new();
        let mut r = rng::seeded(1);
        let mut pb = ParamBuilder {
            store: &mut store,
            rng: &mut r,
            init_std: 0.02,
        };
        let cab = CabParams::new(&mut pb, "c", 4, 6, 2, 0.0, true).unwrap();
        let mut tape = Tape::new();
        let mut cx = Ctx::new(&mut tape, &store, Mode::Eval);
        let z = cx.tape.constant(Tensor::zeros(&[6, 4]));
        assert!(cab_forward(&mut cx, &cab, z).is_err());
    }
}
