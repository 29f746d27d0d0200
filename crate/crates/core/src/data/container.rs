//! `.esr1` container, all little-endian:
//!
//! ```text
//! "ESR1"  u32 version  u32 N  u32 C  u32 T  f32 sample_rate  u8 has_labels
//! C × { [u8; 16] zero-padded name, f32 x, f32 y, f32 z }
//! N·C·T × f32   (window-major, then channel, then time)
//! N × u16       (only when has_labels = 1)
//! ```
//!
//! Values are stored as `f32`; data already representable in `f32` round
//! trips exactly.

use std::io::{Read, Write};
use std::path::Path;

use super::EEGDataset;
use crate::error::{Error, Result};
use crate::montage::{Electrode, ElectrodeMontage};
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"ESR1";
pub const FORMAT_VERSION: u32 = 1;
const NAME_LEN: usize = 16;

pub fn save(ds: &EEGDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_to(ds, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<EEGDataset> {
    let bytes = std::fs::read(path)?;
    read_from(&mut bytes.as_slice())
}

pub fn write_to(ds: &EEGDataset, w: &mut impl Write) -> Result<()> {
    let u32_of = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} exceeds u32")))
    };
    let mut buf = Vec::with_capacity(29 + ds.channels() * 28 + ds.windows().len() * 4);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&u32_of(ds.len(), "window count")?.to_le_bytes());
    buf.extend_from_slice(&u32_of(ds.channels(), "channel count")?.to_le_bytes());
    buf.extend_from_slice(&u32_of(ds.time_len(), "window length")?.to_le_bytes());
    buf.extend_from_slice(&(ds.sample_rate() as f32).to_le_bytes());
    buf.push(ds.labels().is_some() as u8);
    for e in ds.montage().electrodes() {
        let name = e.name.as_bytes();
        if name.len() > NAME_LEN {
            return Err(Error::Format(format!("electrode name {} longer than {NAME_LEN} bytes", e.name)));
        }
        let mut field = [0u8; NAME_LEN];
        field[..name.len()].copy_from_slice(name);
        buf.extend_from_slice(&field);
        for v in e.pos {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    for &v in ds.windows().data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    if let Some(labels) = ds.labels() {
        for &l in labels {
            buf.extend_from_slice(&l.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self, context: &'static str) -> Result<[u8; N]> {
        if self.bytes.len() < N {
            return Err(Error::Truncated { context });
        }
        let (head, rest) = self.bytes.split_at(N);
        self.bytes = rest;
        Ok(head.try_into().expect("length checked"))
    }

    fn u32(&mut self, context: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(context)?))
    }

    fn f32(&mut self, context: &'static str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(context)?))
    }
}

pub fn read_from(r: &mut impl Read) -> Result<EEGDataset> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes };
    let magic: [u8; 4] = c.take("magic")?;
    if magic != MAGIC {
        return Err(Error::BadMagic {
            expected: MAGIC,
            found: magic,
        });
    }
    let version = c.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let n = c.u32("header")? as usize;
    let ch = c.u32("header")? as usize;
    let t = c.u32("header")? as usize;
    let fs = c.f32("header")? as f64;
    let has_labels = match c.take::<1>("header")?[0] {
        0 => false,
        1 => true,
        b => return Err(Error::Format(format!("label flag {b} is neither 0 nor 1"))),
    };
    if n == 0 || ch == 0 || t == 0 {
        return Err(Error::Format(format!("empty dataset dimensions {n}×{ch}×{t}")));
    }
    let mut electrodes = Vec::with_capacity(ch);
    for _ in 0..ch {
        let raw: [u8; NAME_LEN] = c.take("electrode table")?;
        let end = raw.iter().position(|&b| b == 0).unwrap_or(NAME_LEN);
        let name = std::str::from_utf8(&raw[..end])
            .map_err(|_| Error::Format("electrode name is not UTF-8".into()))?
            .to_string();
        let mut pos = [0.0; 3];
        for p in &mut pos {
            *p = c.f32("electrode table")? as f64;
        }
        electrodes.push(Electrode { name, pos });
    }
    let montage = ElectrodeMontage::new(electrodes)?;
    let count = n
        .checked_mul(ch)
        .and_then(|v| v.checked_mul(t))
        .ok_or_else(|| Error::Format("dataset dimensions overflow".into()))?;
    if c.bytes.len() / 4 < count {
        return Err(Error::Truncated { context: "samples" });
    }
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        data.push(c.f32("samples")? as f64);
    }
    let labels = if has_labels {
        let mut l = Vec::with_capacity(n);
        for _ in 0..n {
            l.push(u16::from_le_bytes(c.take("labels")?));
        }
        Some(l)
    } else {
        None
    };
    if !c.bytes.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", c.bytes.len())));
    }
    EEGDataset::new(montage, fs, Tensor::new(&[n, ch, t], data)?, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> EEGDataset {
        let m = ElectrodeMontage::builtin("toy_6")
            .unwrap()
            .subset(&["C3", "C4"])
            .unwrap();
        let w = Tensor::new(&[2, 2, 3], (0..12).map(|v| v as f64 * 0.5).collect()).unwrap();
        EEGDataset::new(m, 128.0, w, Some(vec![1, 0])).unwrap()
    }

    #[test]
    fn header_layout() {
        let mut bytes = Vec::new();
        write_to(&toy(), &mut bytes).unwrap();
        assert_eq!(&bytes[0..4], b"ESR1");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[2, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[2, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &[3, 0, 0, 0]);
        assert_eq!(&bytes[20..24], &128f32.to_le_bytes());
        assert_eq!(bytes[24], 1);
        assert_eq!(&bytes[25..29], b"C3\0\0");
        assert_eq!(bytes.len(), 25 + 2 * 28 + 12 * 4 + 2 * 2);
        assert_eq!(&bytes[bytes.len() - 4..], &[1, 0, 0, 0]);
    }

    #[test]
    fn round_trip_and_errors() {
        let mut bytes = Vec::new();
        write_to(&toy(), &mut bytes).unwrap();
        let back = read_from(&mut bytes.as_slice()).unwrap();
        let mut again = Vec::new();
        write_to(&back, &mut again).unwrap();
        assert_eq!(bytes, again);
        assert_eq!(back.windows(), toy().windows());

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_from(&mut bad.as_slice()), Err(Error::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(
            read_from(&mut bad.as_slice()),
            Err(Error::UnsupportedVersion { found: 2, .. })
        ));
        let short = &bytes[..bytes.len() - 3];
        assert!(matches!(read_from(&mut &short[..]), Err(Error::Truncated { .. })));
    }
}
