//! Model checkpoints, all little-endian:
//!
//! ```text
//! "ESTF"  u32 version
//! u32 n_hyper, then n_hyper × { u32 name_len, name, u8 kind, value }
//!     kind 0: f64, kind 1: u32
//! u32 n_tensors, then n_tensors × { u32 name_len, name, u32 rank,
//!     rank × u32 dims, f64 values }
//! ```
//!
//! Tensors appear in declaration order. The montage is not stored; loading
//! takes it from the caller (normally the dataset) and checks the channel
//! count.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mask::MaskSpec;
use crate::model::{EstFormer, Hyperparams};
use crate::montage::ElectrodeMontage;
use crate::params::ParamStore;
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"ESTF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HyperValue {
    F64(f64),
    U32(u32),
}

fn hyper_entries(model: &EstFormer) -> Vec<(String, HyperValue)> {
    use HyperValue::{F64, U32};
    let hp = &model.hp;
    let spec = &model.spec;
    let mut v = vec![
        ("alpha_s".to_string(), F64(hp.alpha_s)),
        ("alpha_t".into(), F64(hp.alpha_t)),
        ("mlp_ratio".into(), U32(hp.mlp_ratio as u32)),
        ("sim_depth".into(), U32(hp.sim_depth as u32)),
        ("trm_depth".into(), U32(hp.trm_depth as u32)),
        ("dropout".into(), F64(hp.dropout)),
        ("cab_outer_residual".into(), U32(hp.cab_outer_residual as u32)),
        ("pos_scale".into(), F64(hp.pos_scale)),
        ("init_std".into(), F64(hp.init_std)),
        ("c_sr".into(), U32(spec.c_sr() as u32)),
        ("c_lr".into(), U32(spec.c_lr() as u32)),
        ("time_len".into(), U32(model.time_len as u32)),
        ("scale".into(), U32(spec.scale() as u32)),
    ];
    for (i, &idx) in spec.visible().iter().enumerate() {
        v.push((format!("visible.{i}"), U32(idx as u32)));
    }
    v
}

fn put_name(buf: &mut Vec<u8>, name: &str) {
    buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
}

/// Serialize `model`'s structure with the parameter values from `params`
/// (which must share its layout).
pub fn write_checkpoint(model: &EstFormer, params: &ParamStore, w: &mut impl Write) -> Result<()> {
    let mut check = model.store.clone();
    check.copy_values_from(params)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    let hyper = hyper_entries(model);
    buf.extend_from_slice(&(hyper.len() as u32).to_le_bytes());
    for (name, value) in &hyper {
        put_name(&mut buf, name);
        match value {
            HyperValue::F64(v) => {
                buf.push(0);
                buf.extend_from_slice(&v.to_le_bytes());
            }
            HyperValue::U32(v) => {
                buf.push(1);
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params.iter() {
        put_name(&mut buf, &p.name);
        buf.extend_from_slice(&(p.value.rank() as u32).to_le_bytes());
        for &d in p.value.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.value.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn save_checkpoint(model: &EstFormer, params: &ParamStore, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(model, params, &mut f)?;
    f.flush()?;
    Ok(())
}

struct Reader<'a> {
    b: &'a [u8],
}

impl Reader<'_> {
    fn bytes(&mut self, n: usize, context: &'static str) -> Result<&[u8]> {
        if self.b.len() < n {
            return Err(Error::Truncated { context });
        }
        let (h, t) = self.b.split_at(n);
        self.b = t;
        Ok(h)
    }

    fn u32(&mut self, context: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4, context)?.try_into().unwrap()))
    }

    fn f64(&mut self, context: &'static str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8, context)?.try_into().unwrap()))
    }

    fn name(&mut self, context: &'static str) -> Result<String> {
        let n = self.u32(context)? as usize;
        String::from_utf8(self.bytes(n, context)?.to_vec())
            .map_err(|_| Error::Format(format!("{context}: name is not UTF-8")))
    }
}

/// Hyperparameter block of a checkpoint, in file order.
pub fn read_hyper(bytes: &[u8]) -> Result<Vec<(String, HyperValue)>> {
    let mut r = Reader { b: bytes };
    read_header(&mut r)
}

fn read_header(r: &mut Reader) -> Result<Vec<(String, HyperValue)>> {
    let magic: [u8; 4] = r.bytes(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: VERSION,
        });
    }
    let n = r.u32("hyperparameters")?;
    let mut out = Vec::new();
    for _ in 0..n {
        let name = r.name("hyperparameters")?;
        let value = match r.bytes(1, "hyperparameters")?[0] {
            0 => HyperValue::F64(r.f64("hyperparameters")?),
            1 => HyperValue::U32(r.u32("hyperparameters")?),
            k => return Err(Error::Format(format!("hyperparameter {name}: unknown kind {k}"))),
        };
        out.push((name, value));
    }
    Ok(out)
}

fn lookup(h: &[(String, HyperValue)], name: &str) -> Result<HyperValue> {
    h.iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::Format(format!("checkpoint lacks hyperparameter {name}")))
}

fn get_f64(h: &[(String, HyperValue)], name: &str) -> Result<f64> {
    match lookup(h, name)? {
        HyperValue::F64(v) => Ok(v),
        HyperValue::U32(_) => Err(Error::Format(format!("hyperparameter {name} should be f64"))),
    }
}

fn get_u32(h: &[(String, HyperValue)], name: &str) -> Result<usize> {
    match lookup(h, name)? {
        HyperValue::U32(v) => Ok(v as usize),
        HyperValue::F64(_) => Err(Error::Format(format!("hyperparameter {name} should be u32"))),
    }
}

/// Rebuild a model for `montage` from checkpoint bytes.
pub fn read_checkpoint(bytes: &[u8], montage: &ElectrodeMontage) -> Result<EstFormer> {
    let mut r = Reader { b: bytes };
    let h = read_header(&mut r)?;
    let hp = Hyperparams {
        alpha_s: get_f64(&h, "alpha_s")?,
        alpha_t: get_f64(&h, "alpha_t")?,
        mlp_ratio: get_u32(&h, "mlp_ratio")?,
        sim_depth: get_u32(&h, "sim_depth")?,
        trm_depth: get_u32(&h, "trm_depth")?,
        dropout: get_f64(&h, "dropout")?,
        cab_outer_residual: get_u32(&h, "cab_outer_residual")? != 0,
        pos_scale: get_f64(&h, "pos_scale")?,
        init_std: get_f64(&h, "init_std")?,
    };
    let c_sr = get_u32(&h, "c_sr")?;
    if c_sr != montage.len() {
        return Err(Error::Format(format!(
            "checkpoint expects {c_sr} channels, montage has {}",
            montage.len()
        )));
    }
    let c_lr = get_u32(&h, "c_lr")?;
    let visible = (0..c_lr)
        .map(|i| get_u32(&h, &format!("visible.{i}")))
        .collect::<Result<Vec<_>>>()?;
    let spec = MaskSpec::new(montage.clone(), visible, get_u32(&h, "scale")?)?;
    let mut model = EstFormer::new(spec, get_u32(&h, "time_len")?, hp, 0)?;

    let n = r.u32("tensors")? as usize;
    let mut store = ParamStore::new();
    for _ in 0..n {
        let name = r.name("tensors")?;
        let rank = r.u32("tensors")? as usize;
        if !(1..=3).contains(&rank) {
            return Err(Error::Format(format!("tensor {name}: rank {rank}")));
        }
        let dims = (0..rank)
            .map(|_| r.u32("tensors").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count: usize = dims.iter().product();
        if r.b.len() / 8 < count {
            return Err(Error::Truncated { context: "tensors" });
        }
        let data = (0..count).map(|_| r.f64("tensors")).collect::<Result<Vec<_>>>()?;
        let decay = model
            .store
            .find(&name)
            .map(|id| model.store.get(id.index()).decay)
            .unwrap_or(true);
        store.add(name, Tensor::new(&dims, data)?, decay);
    }
    if !r.b.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", r.b.len())));
    }
    model.store.copy_values_from(&store)?;
    model.store.validate_finite()?;
    Ok(model)
}

pub fn load_checkpoint(path: impl AsRef<Path>, montage: &ElectrodeMontage) -> Result<EstFormer> {
    read_checkpoint(&std::fs::read(path)?, montage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::mask_case;

    fn toy() -> EstFormer {
        let m = ElectrodeMontage::builtin("toy_6").unwrap();
        let spec = mask_case(&m, 2, 2).unwrap();
        let hp = Hyperparams {
            alpha_s: 0.5,
            mlp_ratio: 2,
            ..Default::default()
        };
        EstFormer::new(spec, 12, hp, 9).unwrap()
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let m = toy();
        let mut bytes = Vec::new();
        write_checkpoint(&m, &m.store, &mut bytes).unwrap();
        let back = read_checkpoint(&bytes, m.spec.montage()).unwrap();
        assert_eq!(back.spec, m.spec);
        assert_eq!(back.hp, m.hp);
        let mut again = Vec::new();
        write_checkpoint(&back, &back.store, &mut again).unwrap();
        assert_eq!(bytes, again);
        let h = read_hyper(&bytes).unwrap();
        assert_eq!(lookup(&h, "time_len").unwrap(), HyperValue::U32(12));
    }

    #[test]
    fn corrupt_inputs() {
        let m = toy();
        let mut bytes = Vec::new();
        write_checkpoint(&m, &m.store, &mut bytes).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(&bad, m.spec.montage()), Err(Error::BadMagic { .. })));
        assert!(matches!(
            read_checkpoint(&bytes[..bytes.len() - 5], m.spec.montage()),
            Err(Error::Truncated { .. })
        ));
        let other = ElectrodeMontage::builtin("standard_16").unwrap();
        assert!(read_checkpoint(&bytes, &other).is_err());
    }
}
