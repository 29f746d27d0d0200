//! Sin-cos absolute positional encodings.
//!
//! Temporal encodings use integer sample indices as positions. Spatial
//! encodings encode each axis of the electrode coordinates separately and
//! concatenate the three parts; coordinates are first mapped to `[0, 1]` per
//! axis and then multiplied by a position scale (default 100) so the phases
//! spread the way they do for integer token positions.

use crate::error::{Error, Result};
use crate::montage::ElectrodeMontage;
use crate::tensor::Tensor;

/// Default multiplier applied to normalized coordinates before encoding.
pub const DEFAULT_POS_SCALE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeKind {
    Temporal1d,
    Spatial3d,
}

/// `num_positions × d_model` table of encodings.
#[derive(Debug, Clone, PartialEq)]
pub struct PeMatrix {
    pub values: Tensor,
    pub kind: PeKind,
}

/// Interleaved encoding of one position: entry `2i` is
/// `sin(pos / 10000^(2i/d_model))` and `2i+1` the matching cosine.
pub fn sincos_encode(pos: f64, d_model: usize) -> Result<Vec<f64>> {
    if d_model < 2 || d_model % 2 != 0 {
        return Err(Error::invalid(format!("d_model must be even and ≥ 2, got {d_model}")));
    }
    let mut out = vec![0.0; d_model];
    for i in 0..d_model / 2 {
        let angle = pos / 10000f64.powf(2.0 * i as f64 / d_model as f64);
        out[2 * i] = angle.sin();
        out[2 * i + 1] = angle.cos();
    }
    Ok(out)
}

/// Row `t` encodes position `t` for `t in 0..len`.
pub fn pe_1d(len: usize, d_model: usize) -> Result<PeMatrix> {
    if len == 0 {
        return Err(Error::invalid("pe_1d needs at least one position"));
    }
    let mut data = Vec::with_capacity(len * d_model);
    for t in 0..len {
        data.extend(sincos_encode(t as f64, d_model)?);
    }
    Ok(PeMatrix {
        values: Tensor::new(&[len, d_model], data)?,
        kind: PeKind::Temporal1d,
    })
}

/// Per-axis affine map of electrode coordinates onto `[0, 1]`. An axis on
/// which every electrode agrees maps to 0.5.
pub fn normalize_coords(montage: &ElectrodeMontage) -> Result<Vec<[f64; 3]>> {
    let pts: Vec<[f64; 3]> = montage.electrodes().iter().map(|e| e.pos).collect();
    normalize_points(&pts)
}

pub(crate) fn normalize_points(pts: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
    if pts.is_empty() {
        return Err(Error::invalid("cannot normalize an empty montage"));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pts {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    Ok(pts
        .iter()
        .map(|p| {
            let mut q = [0.5; 3];
            for a in 0..3 {
                if hi[a] > lo[a] {
                    q[a] = (p[a] - lo[a]) / (hi[a] - lo[a]);
                }
            }
            q
        })
        .collect())
}

/// Spatial encoding of every electrode: `[PE(x) | PE(y) | PE(z)]`, each part
/// `d_model / 3` wide.
pub fn pe_3d(montage: &ElectrodeMontage, d_model: usize, pos_scale: f64) -> Result<PeMatrix> {
    if d_model == 0 || d_model % 6 != 0 {
        return Err(Error::invalid(format!(
            "spatial encoding width must be a positive multiple of 6, got {d_model}"
        )));
    }
    let part = d_model / 3;
    let coords = normalize_coords(montage)?;
    let mut data = Vec::with_capacity(coords.len() * d_model);
    for c in &coords {
        for axis in c {
            data.extend(sincos_encode(axis * pos_scale, part)?);
        }
    }
    Ok(PeMatrix {
        values: Tensor::new(&[coords.len(), d_model], data)?,
        kind: PeKind::Spatial3d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montage::Electrode;

    fn montage(pts: &[[f64; 3]]) -> ElectrodeMontage {
        ElectrodeMontage::new(
            pts.iter()
                .enumerate()
                .map(|(i, p)| Electrode {
                    name: format!("E{i}"),
                    pos: *p,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn position_zero_pattern() {
        let v = sincos_encode(0.0, 8).unwrap();
        assert_eq!(v, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn position_one_width_two() {
        let v = sincos_encode(1.0, 2).unwrap();
        assert!((v[0] - 0.84147).abs() < 1e-5);
        assert!((v[1] - 0.54030).abs() < 1e-5);
    }

    #[test]
    fn odd_width_rejected() {
        assert!(sincos_encode(1.0, 5).is_err());
        assert!(sincos_encode(1.0, 0).is_err());
        let m = montage(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert!(pe_3d(&m, 8, 100.0).is_err());
    }

    #[test]
    fn pe_1d_shape_and_first_row() {
        let pe = pe_1d(7, 6).unwrap();
        assert_eq!(pe.values.shape(), &[7, 6]);
        assert_eq!(pe.values.row(0), sincos_encode(0.0, 6).unwrap().as_slice());
        assert_eq!(pe.kind, PeKind::Temporal1d);
    }

    #[test]
    fn normalization_endpoints_and_degenerate_axis() {
        let m = montage(&[[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let c = normalize_coords(&m).unwrap();
        assert_eq!(c[0][0], 0.0);
        assert_eq!(c[1][0], 1.0);
        // both electrodes have y = z = 0
        assert_eq!(c[0][1], 0.5);
        assert_eq!(c[1][2], 0.5);
    }

    #[test]
    fn axis_separability() {
        let s = 0.5f64.sqrt();
        // same x and y, different z
        let m = montage(&[[0.6, 0.0, 0.8], [0.6, 0.0, -0.8], [-s, s, 0.0]]);
        let pe = pe_3d(&m, 12, 100.0).unwrap();
        assert_eq!(pe.values.row(0)[..8], pe.values.row(1)[..8]);
        assert_ne!(pe.values.row(0)[8..], pe.values.row(1)[8..]);
    }

    #[test]
    fn origin_after_normalization_gives_zero_pattern_in_every_third() {
        let m = ElectrodeMontage::builtin("standard_16").unwrap();
        let coords = normalize_coords(&m).unwrap();
        let pe = pe_3d(&m, 18, 100.0).unwrap();
        // an axis at normalized 0 yields the pos-0 pattern in its third
        for (i, c) in coords.iter().enumerate() {
            for a in 0..3 {
                if c[a] == 0.0 {
                    assert_eq!(&pe.values.row(i)[a * 6..(a + 1) * 6], &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
                }
            }
        }
    }
}
