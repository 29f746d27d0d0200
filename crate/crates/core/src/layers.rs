//! Forward context plus the two parameterized primitives every block reuses.

use crate::error::Result;
use crate::params::{ParamBuilder, ParamId, ParamStore};
use crate::tensor::{Mode, Tape, Var};

/// Layer-norm epsilon used by all blocks.
pub const LN_EPS: f64 = 1e-5;

/// Everything a forward pass needs: the tape being recorded, the parameter
/// values, and the train/eval mode.
pub struct Ctx<'a, 'r> {
    pub tape: &'a mut Tape,
    pub store: &'a ParamStore,
    pub mode: Mode<'r>,
}

impl<'a, 'r> Ctx<'a, 'r> {
    pub fn new(tape: &'a mut Tape, store: &'a ParamStore, mode: Mode<'r>) -> Self {
        Ctx { tape, store, mode }
    }

    pub fn p(&mut self, id: ParamId) -> Var {
        self.tape.param(self.store, id)
    }
}

/// `x·W + b`; `W` is `in × out`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new(pb: &mut ParamBuilder, name: &str, d_in: usize, d_out: usize, bias: bool) -> Self {
        let w = pb.weight(&format!("{name}.w"), &[d_in, d_out]);
        let b = bias.then(|| pb.zeros(&format!("{name}.b"), &[d_out]));
        Linear { w, b, d_in, d_out }
    }

    pub fn num_scalars(d_in: usize, d_out: usize, bias: bool) -> usize {
        d_in * d_out + if bias { d_out } else { 0 }
    }

    pub fn forward(&self, cx: &mut Ctx, x: Var) -> Result<Var> {
        let w = cx.p(self.w);
        let y = cx.tape.matmul(x, w)?;
        match self.b {
            Some(b) => {
                let b = cx.p(b);
                cx.tape.add_bias(y, b)
            }
            None => Ok(y),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub bias: ParamId,
}

impl LayerNorm {
    pub fn new(pb: &mut ParamBuilder, name: &str, d: usize) -> Self {
        LayerNorm {
            gain: pb.ones(&format!("{name}.gain"), &[d]),
            bias: pb.zeros(&format!("{name}.bias"), &[d]),
        }
    }

    pub fn forward(&self, cx: &mut Ctx, x: Var) -> Result<Var> {
        let (g, b) = (cx.p(self.gain), cx.p(self.bias));
        cx.tape.layer_norm(x, g, b, LN_EPS)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tensor::Tensor;

    #[test]
    fn linear_identity_and_zero_input() {
        let mut store = ParamStore::new();
        let mut r = rng::seeded(0);
        let mut pb = ParamBuilder {
            store: &mut store,
            rng: &mut r,
            init_std: 0.02,
        };
        let lin = Linear::new(&mut pb, "l", 3, 3, true);
        *store.value_mut(lin.w) = Tensor::eye(3);
        *store.value_mut(lin.b.unwrap()) = Tensor::new(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let mut tape = Tape::new();
        let mut cx = Ctx::new(&mut tape, &store, Mode::Eval);
        let x = cx.tape.constant(Tensor::zeros(&[2, 3]));
        let y = lin.forward(&mut cx, x).unwrap();
        assert_eq!(tape.value(y).row(1), &[1.0, 2.0, 3.0]);
    }
}
