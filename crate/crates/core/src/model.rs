//! The full super-resolution network: a spatial interpolation module (SIM)
//! that fills masked channels through a mask-token encoder–decoder over
//! channel tokens, then a temporal reconstruction module (TRM) that refines
//! every channel with attention over time tokens.
//!
//! Visible channels of the final output are copied from the input.

use crate::blocks::{block_forward, cab_forward, BlockParams, CabParams};
use crate::error::{Error, Result};
use crate::layers::{Ctx, Linear};
use crate::loss::{auto_weighted_var, fmse_var, mae_var, LossBreakdown};
use crate::mask::MaskSpec;
use crate::params::{ParamBuilder, ParamId, ParamStore};
use crate::positional::{pe_1d, pe_3d, DEFAULT_POS_SCALE};
use crate::rng::{self, Rng};
use crate::tensor::{Mode, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// SIM token width as a fraction of the window length.
    pub alpha_s: f64,
    /// TRM token width as a fraction of the channel count.
    pub alpha_t: f64,
    pub mlp_ratio: usize,
    /// CABs in each of the SIM encoder and decoder.
    pub sim_depth: usize,
    /// TSABs in each of the two TRM stages.
    pub trm_depth: usize,
    pub dropout: f64,
    pub cab_outer_residual: bool,
    pub pos_scale: f64,
    pub init_std: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            alpha_s: 0.6,
            alpha_t: 0.75,
            mlp_ratio: 4,
            sim_depth: 1,
            trm_depth: 1,
            dropout: 0.5,
            cab_outer_residual: true,
            pos_scale: DEFAULT_POS_SCALE,
            init_std: 0.02,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.alpha_s > 0.0 && self.alpha_s.is_finite()) {
            return bad(format!("alpha_s must be positive, got {}", self.alpha_s));
        }
        if !(self.alpha_t > 0.0 && self.alpha_t.is_finite()) {
            return bad(format!("alpha_t must be positive, got {}", self.alpha_t));
        }
        if self.mlp_ratio == 0 || self.sim_depth == 0 || self.trm_depth == 0 {
            return bad("mlp_ratio, sim_depth and trm_depth must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.pos_scale > 0.0 && self.pos_scale.is_finite()) {
            return bad(format!("pos_scale must be positive, got {}", self.pos_scale));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return bad(format!("init_std must be nonnegative, got {}", self.init_std));
        }
        Ok(())
    }

    /// `round(alpha_s · T)` rounded up to a multiple of 6.
    pub fn sim_width(&self, time_len: usize) -> usize {
        round_up((self.alpha_s * time_len as f64).round() as usize, 6)
    }

    /// `round(alpha_t · C)` rounded up to even.
    pub fn trm_width(&self, channels: usize) -> usize {
        round_up((self.alpha_t * channels as f64).round() as usize, 2)
    }
}

fn round_up(v: usize, m: usize) -> usize {
    v.max(1).div_ceil(m) * m
}

#[derive(Debug, Clone)]
pub struct SimParams {
    pub channel_embed: Linear,
    pub mask_token: ParamId,
    pub encoder: Vec<CabParams>,
    pub decoder: Vec<CabParams>,
    pub out_proj: Linear,
    /// `C_SR × D_SIM` spatial encoding.
    pub pe3d: Tensor,
}

#[derive(Debug, Clone)]
pub struct TrmParams {
    pub time_embed: Linear,
    pub stage1: Vec<BlockParams>,
    pub stage2: Vec<BlockParams>,
    pub out_proj: Linear,
    /// `T × D_TRM` temporal encoding.
    pub pe1d: Tensor,
}

/// Trained or freshly initialized model bound to one mask spec and window
/// length.
#[derive(Debug, Clone)]
pub struct EstFormer {
    pub spec: MaskSpec,
    pub time_len: usize,
    pub hp: Hyperparams,
    pub store: ParamStore,
    pub sim: SimParams,
    pub trm: TrmParams,
    /// Log-variances of the two loss terms.
    pub log_vars: (ParamId, ParamId),
}

/// Result of one forward pass on one window.
pub struct Forward {
    /// Masked-channel rows of the TRM output (what the loss sees).
    pub masked_pred: Var,
    /// Full `C_SR × T` reconstruction with visible rows copied from the input.
    pub x_sr: Tensor,
}

impl EstFormer {
    pub fn new(spec: MaskSpec, time_len: usize, hp: Hyperparams, seed: u64) -> Result<Self> {
        let mut r = rng::seeded(seed);
        Self::init(spec, time_len, hp, &mut r)
    }

    pub fn init(spec: MaskSpec, time_len: usize, hp: Hyperparams, rng: &mut Rng) -> Result<Self> {
        hp.validate()?;
        if time_len < 2 {
            return Err(Error::Config(format!("window length {time_len} too short")));
        }
        if spec.c_mask() == 0 {
            return Err(Error::Config("mask spec has no masked channels".into()));
        }
        let (c_sr, c_lr, t) = (spec.c_sr(), spec.c_lr(), time_len);
        let d_sim = hp.sim_width(t);
        let d_trm = hp.trm_width(c_sr);
        let (r, p, res) = (hp.mlp_ratio, hp.dropout, hp.cab_outer_residual);
        let mut store = ParamStore::new();
        let mut pb = ParamBuilder {
            store: &mut store,
            rng,
            init_std: hp.init_std,
        };
        let channel_embed = Linear::new(&mut pb, "sim.embed", t, d_sim, true);
        let mask_token = pb.normal("sim.mask_token", &[1, d_sim]);
        let encoder = (0..hp.sim_depth)
            .map(|i| CabParams::new(&mut pb, &format!("sim.enc{i}"), c_lr, d_sim, r, p, res))
            .collect::<Result<Vec<_>>>()?;
        let decoder = (0..hp.sim_depth)
            .map(|i| CabParams::new(&mut pb, &format!("sim.dec{i}"), c_sr, d_sim, r, p, res))
            .collect::<Result<Vec<_>>>()?;
        let sim_out = Linear::new(&mut pb, "sim.out", d_sim, t, true);
        let time_embed = Linear::new(&mut pb, "trm.embed", c_sr, d_trm, true);
        let mut stage = |name: &str| {
            (0..hp.trm_depth)
                .map(|i| BlockParams::tsab(&mut pb, &format!("trm.{name}.{i}"), d_trm, r, p))
                .collect::<Result<Vec<_>>>()
        };
        let stage1 = stage("s1")?;
        let stage2 = stage("s2")?;
        let trm_out = Linear::new(&mut pb, "trm.out", d_trm, c_sr, true);
        let log_vars = (pb.free_scalar("loss.s1", 0.0), pb.free_scalar("loss.s2", 0.0));

        let pe3d = pe_3d(spec.montage(), d_sim, hp.pos_scale)?.values;
        let pe1d = pe_1d(t, d_trm)?.values;
        Ok(EstFormer {
            spec,
            time_len,
            hp,
            store,
            sim: SimParams {
                channel_embed,
                mask_token,
                encoder,
                decoder,
                out_proj: sim_out,
                pe3d,
            },
            trm: TrmParams {
                time_embed,
                stage1,
                stage2,
                out_proj: trm_out,
                pe1d,
            },
            log_vars,
        })
    }

    /// The same parameters applied to another mask over the same montage
    /// with the same visible count.
    pub fn with_spec(&self, spec: MaskSpec) -> Result<EstFormer> {
        if spec.montage() != self.spec.montage() || spec.c_lr() != self.spec.c_lr() {
            return Err(Error::Config(format!(
                "model trained for {} of {} channels cannot serve {} of {}",
                self.spec.c_lr(),
                self.spec.c_sr(),
                spec.c_lr(),
                spec.c_sr()
            )));
        }
        let mut m = EstFormer::new(spec, self.time_len, self.hp.clone(), 0)?;
        m.store.copy_values_from(&self.store)?;
        Ok(m)
    }

    pub fn sim_width(&self) -> usize {
        self.sim.pe3d.shape()[1]
    }

    pub fn trm_width(&self) -> usize {
        self.trm.pe1d.shape()[1]
    }

    pub fn num_scalars(&self) -> usize {
        self.store.num_scalars()
    }

    /// Current `(s₁, s₂)` loss log-variances.
    pub fn log_variances(&self) -> (f64, f64) {
        (
            self.store.value(self.log_vars.0).data()[0],
            self.store.value(self.log_vars.1).data()[0],
        )
    }

    /// Dropout rate of every MLP hidden layer.
    pub fn set_dropout(&mut self, rate: f64) -> Result<()> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout {rate} outside [0, 1)")));
        }
        self.hp.dropout = rate;
        let cabs = self.sim.encoder.iter_mut().chain(self.sim.decoder.iter_mut());
        for c in cabs {
            c.tsab.mlp.dropout = rate;
            c.ssab.mlp.dropout = rate;
        }
        for b in self.trm.stage1.iter_mut().chain(self.trm.stage2.iter_mut()) {
            b.mlp.dropout = rate;
        }
        Ok(())
    }

    fn check_input(&self, x_lr: &Tensor) -> Result<()> {
        let want = [self.spec.c_lr(), self.time_len];
        if x_lr.shape() != want {
            return Err(Error::shape("estformer input", x_lr.shape(), &want));
        }
        Ok(())
    }

    /// Forward pass on a `C_LR × T` window whose rows follow the visible
    /// index order.
    pub fn forward(&self, cx: &mut Ctx, x_lr: &Tensor) -> Result<Forward> {
        self.check_input(x_lr)?;
        let xv = cx.tape.constant(x_lr.clone());
        let x_mask = sim_forward(cx, self, xv)?;
        let merged = cx.tape.concat(xv, x_mask, 0)?;
        let x_temp = cx.tape.gather_rows(merged, &self.spec.merge_order())?;
        let y = trm_forward(cx, self, x_temp)?;
        let masked_pred = cx.tape.gather_rows(y, self.spec.masked())?;
        let mut x_sr = cx.tape.value(y).clone();
        for (j, &i) in self.spec.visible().iter().enumerate() {
            x_sr.row_mut(i).copy_from_slice(x_lr.row(j));
        }
        Ok(Forward { masked_pred, x_sr })
    }

    /// Evaluation-mode reconstruction of all `C_SR` channels.
    pub fn reconstruct(&self, x_lr: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let mut cx = Ctx::new(&mut tape, &self.store, Mode::Eval);
        Ok(self.forward(&mut cx, x_lr)?.x_sr)
    }

    /// Records forward and loss for one full `C_SR × T` window; returns the
    /// total-loss node and its breakdown.
    pub fn loss(&self, cx: &mut Ctx, full: &Tensor) -> Result<(Var, LossBreakdown)> {
        let (x_lr, gt) = self.spec.split(full)?;
        let f = self.forward(cx, &x_lr)?;
        let gt = cx.tape.constant(gt);
        let fm = fmse_var(cx.tape, gt, f.masked_pred)?;
        let ma = mae_var(cx.tape, gt, f.masked_pred)?;
        let s1 = cx.p(self.log_vars.0);
        let s2 = cx.p(self.log_vars.1);
        let total = auto_weighted_var(cx.tape, fm, ma, s1, s2)?;
        let (s1v, s2v) = (cx.tape.scalar(s1), cx.tape.scalar(s2));
        Ok((
            total,
            LossBreakdown {
                fmse: cx.tape.scalar(fm),
                mae: cx.tape.scalar(ma),
                total: cx.tape.scalar(total),
                sigma1_sq: s1v.exp(),
                sigma2_sq: s2v.exp(),
            },
        ))
    }
}

/// Spatial interpolation: `C_LR × T` visible rows to `C_Mask × T` masked
/// rows.
pub fn sim_forward(cx: &mut Ctx, m: &EstFormer, x_lr: Var) -> Result<Var> {
    let spec = &m.spec;
    let p = &m.sim;
    let e = p.channel_embed.forward(cx, x_lr)?;
    let pe_vis = cx.tape.constant(p.pe3d.select_rows(spec.visible())?);
    let e = cx.tape.add(e, pe_vis)?;
    let z = stage(cx, e, |cx, h| cab_stack(cx, &p.encoder, h))?;

    let token = cx.p(p.mask_token);
    let tokens = cx.tape.gather_rows(token, &vec![0; spec.c_mask()])?;
    let joined = cx.tape.concat(z, tokens, 0)?;
    let full = cx.tape.gather_rows(joined, &spec.merge_order())?;
    let pe = cx.tape.constant(p.pe3d.clone());
    let full = cx.tape.add(full, pe)?;
    let d = stage(cx, full, |cx, h| cab_stack(cx, &p.decoder, h))?;
    let masked = cx.tape.gather_rows(d, spec.masked())?;
    p.out_proj.forward(cx, masked)
}

/// Temporal reconstruction of a full `C_SR × T` window.
pub fn trm_forward(cx: &mut Ctx, m: &EstFormer, x_temp: Var) -> Result<Var> {
    let p = &m.trm;
    // rows become time tokens
    let xt = cx.tape.transpose(x_temp)?;
    let e = p.time_embed.forward(cx, xt)?;
    let pe = cx.tape.constant(p.pe1d.clone());
    let e = cx.tape.add(e, pe)?;
    let h = stage(cx, e, |cx, h| block_stack(cx, &p.stage1, h))?;
    let h = cx.tape.add(h, pe)?;
    let h = stage(cx, h, |cx, h| block_stack(cx, &p.stage2, h))?;
    let y = p.out_proj.forward(cx, h)?;
    cx.tape.transpose(y)
}

/// `blocks(z) + z`.
fn stage(cx: &mut Ctx, z: Var, blocks: impl FnOnce(&mut Ctx, Var) -> Result<Var>) -> Result<Var> {
    let h = blocks(cx, z)?;
    cx.tape.add(h, z)
}

fn cab_stack(cx: &mut Ctx, cabs: &[CabParams], mut h: Var) -> Result<Var> {
    for c in cabs {
        h = cab_forward(cx, c, h)?;
    }
    Ok(h)
}

fn block_stack(cx: &mut Ctx, blocks: &[BlockParams], mut h: Var) -> Result<Var> {
    for b in blocks {
        h = block_forward(cx, b, h)?;
    }
    Ok(h)
}

/// Learnable scalar count implied by the architecture.
pub fn expected_param_count(c_sr: usize, c_lr: usize, time_len: usize, hp: &Hyperparams) -> usize {
    let (t, r) = (time_len, hp.mlp_ratio);
    let d_sim = hp.sim_width(t);
    let d_trm = hp.trm_width(c_sr);
    let sim = Linear::num_scalars(t, d_sim, true)
        + d_sim
        + hp.sim_depth * (CabParams::num_scalars(c_lr, d_sim, r) + CabParams::num_scalars(c_sr, d_sim, r))
        + Linear::num_scalars(d_sim, t, true);
    let trm = Linear::num_scalars(c_sr, d_trm, true)
        + 2 * hp.trm_depth * BlockParams::num_scalars(d_trm, r)
        + Linear::num_scalars(d_trm, c_sr, true);
    sim + trm + 2
}

/// Anything that turns visible channels into a full reconstruction.
pub trait Reconstructor {
    fn name(&self) -> &str;
    fn spec(&self) -> &MaskSpec;
    /// `C_LR × T` in, `C_SR × T` out with visible rows passed through.
    fn reconstruct(&self, x_lr: &Tensor) -> Result<Tensor>;
}

impl Reconstructor for EstFormer {
    fn name(&self) -> &str {
        "estformer"
    }

    fn spec(&self) -> &MaskSpec {
        &self.spec
    }

    fn reconstruct(&self, x_lr: &Tensor) -> Result<Tensor> {
        EstFormer::reconstruct(self, x_lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::mask_case;
    use crate::montage::ElectrodeMontage;

    fn toy() -> EstFormer {
        let m = ElectrodeMontage::builtin("toy_6").unwrap();
        let spec = mask_case(&m, 2, 1).unwrap();
        let hp = Hyperparams {
            alpha_s: 0.5,
            alpha_t: 1.0,
            mlp_ratio: 2,
            dropout: 0.0,
            ..Hyperparams::default()
        };
        EstFormer::new(spec, 16, hp, 3).unwrap()
    }

    #[test]
    fn widths_follow_rounding_rules() {
        let hp = Hyperparams::default();
        assert_eq!(hp.sim_width(1600), 960);
        assert_eq!(hp.trm_width(64), 48);
        assert_eq!(hp.sim_width(256), 156);
        assert_eq!(hp.trm_width(62), 48);
        assert_eq!(hp.trm_width(6), 6);
    }

    #[test]
    fn param_count_matches_formula() {
        let m = toy();
        assert_eq!(m.num_scalars(), expected_param_count(6, 3, 16, &m.hp));
    }

    #[test]
    fn output_shape_and_passthrough() {
        let m = toy();
        let x = Tensor::new(&[3, 16], (0..48).map(|v| (v as f64 * 0.3).sin()).collect()).unwrap();
        let y = m.reconstruct(&x).unwrap();
        assert_eq!(y.shape(), &[6, 16]);
        for (j, &i) in m.spec.visible().iter().enumerate() {
            assert_eq!(y.row(i), x.row(j));
        }
        assert_eq!(y, m.reconstruct(&x).unwrap());
    }

    #[test]
    fn same_seed_same_params() {
        let (a, b) = (toy(), toy());
        for (p, q) in a.store.iter().zip(b.store.iter()) {
            assert_eq!(p.value, q.value);
        }
    }

    #[test]
    fn rejects_bad_input_shape() {
        let m = toy();
        assert!(m.reconstruct(&Tensor::zeros(&[4, 16])).is_err());
        assert!(Hyperparams {
            dropout: 1.0,
            ..Hyperparams::default()
        }
        .validate()
        .is_err());
    }
}
