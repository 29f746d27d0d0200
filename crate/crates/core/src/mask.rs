//! Visible/masked channel partitions and the bundled case catalog.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::montage::ElectrodeMontage;
use crate::rng;
use crate::tensor::Tensor;

/// Scale factors with bundled cases.
pub const SCALES: [usize; 3] = [2, 4, 8];
/// Number of bundled cases per scale.
pub const NUM_CASES: usize = 4;

/// Which channels of a montage are observed. Both index lists are sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec {
    montage: ElectrodeMontage,
    visible: Vec<usize>,
    masked: Vec<usize>,
    scale: usize,
}

impl MaskSpec {
    /// `visible` may be in any order; it is sorted and must be duplicate-free
    /// and in range. The masked set is the complement.
    pub fn new(montage: ElectrodeMontage, mut visible: Vec<usize>, scale: usize) -> Result<Self> {
        let c = montage.len();
        visible.sort_unstable();
        if visible.is_empty() {
            return Err(Error::invalid("no visible channels"));
        }
        if visible.windows(2).any(|w| w[0] == w[1]) || *visible.last().unwrap() >= c {
            return Err(Error::invalid(format!(
                "visible indices must be distinct and below {c}"
            )));
        }
        if scale == 0 {
            return Err(Error::invalid("scale factor must be positive"));
        }
        let masked = (0..c).filter(|i| visible.binary_search(i).is_err()).collect();
        Ok(MaskSpec {
            montage,
            visible,
            masked,
            scale,
        })
    }

    pub fn montage(&self) -> &ElectrodeMontage {
        &self.montage
    }

    pub fn visible(&self) -> &[usize] {
        &self.visible
    }

    pub fn masked(&self) -> &[usize] {
        &self.masked
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn c_sr(&self) -> usize {
        self.montage.len()
    }

    pub fn c_lr(&self) -> usize {
        self.visible.len()
    }

    pub fn c_mask(&self) -> usize {
        self.masked.len()
    }

    /// For each canonical channel, its row in `concat(visible rows, masked
    /// rows)`.
    pub fn merge_order(&self) -> Vec<usize> {
        let mut order = vec![0; self.c_sr()];
        for (j, &i) in self.visible.iter().enumerate() {
            order[i] = j;
        }
        for (j, &i) in self.masked.iter().enumerate() {
            order[i] = self.visible.len() + j;
        }
        order
    }

    /// `(visible rows, masked rows)` of a `C_SR × T` array.
    pub fn split(&self, full: &Tensor) -> Result<(Tensor, Tensor)> {
        self.check_rows("split", full, self.c_sr())?;
        let lr = full.select_rows(&self.visible)?;
        let mk = if self.masked.is_empty() {
            Tensor::zeros(&[1, 1])
        } else {
            full.select_rows(&self.masked)?
        };
        Ok((lr, mk))
    }

    /// Visible rows only.
    pub fn low_res(&self, full: &Tensor) -> Result<Tensor> {
        self.check_rows("low_res", full, self.c_sr())?;
        full.select_rows(&self.visible)
    }

    fn check_rows(&self, op: &'static str, t: &Tensor, rows: usize) -> Result<()> {
        if t.rank() != 2 || t.shape()[0] != rows {
            return Err(Error::shape(op, t.shape(), &[rows, t.shape().last().copied().unwrap_or(0)]));
        }
        Ok(())
    }
}

/// Place visible rows and reconstructed masked rows back in canonical order.
pub fn merge_channels(x_lr: &Tensor, x_mask: Option<&Tensor>, spec: &MaskSpec) -> Result<Tensor> {
    spec.check_rows("merge_channels", x_lr, spec.c_lr())?;
    let t = x_lr.shape()[1];
    let mut out = Tensor::zeros(&[spec.c_sr(), t]);
    for (j, &i) in spec.visible().iter().enumerate() {
        out.row_mut(i).copy_from_slice(x_lr.row(j));
    }
    match x_mask {
        Some(m) => {
            if m.rank() != 2 || m.shape() != [spec.c_mask(), t] {
                return Err(Error::shape("merge_channels", m.shape(), &[spec.c_mask(), t]));
            }
            for (j, &i) in spec.masked().iter().enumerate() {
                out.row_mut(i).copy_from_slice(m.row(j));
            }
        }
        None if spec.c_mask() == 0 => {}
        None => return Err(Error::invalid("masked rows missing")),
    }
    Ok(out)
}

/// `round(C / scale)`, at least 1.
pub fn visible_count(c: usize, scale: usize) -> usize {
    ((c as f64 / scale as f64).round() as usize).max(1)
}

/// Case 1: every `scale`-th electrode in canonical order.
fn strided(c: usize, scale: usize) -> Vec<usize> {
    let n = visible_count(c, scale);
    (0..n)
        .map(|i| if (n - 1) * scale < c { i * scale } else { i * c / n })
        .collect()
}

/// Greedy max-min-distance selection started from a seeded random electrode.
fn spread(m: &ElectrodeMontage, n: usize, seed: u64) -> Vec<usize> {
    let c = m.len();
    let mut r = rng::seeded(seed);
    let mut chosen = vec![r.random_range(0..c)];
    let mut nearest: Vec<f64> = (0..c).map(|i| m.great_circle(i, chosen[0])).collect();
    while chosen.len() < n {
        let mut best = None;
        for i in 0..c {
            if chosen.contains(&i) {
                continue;
            }
            if best.is_none_or(|b: usize| nearest[i] > nearest[b]) {
                best = Some(i);
            }
        }
        let b = best.expect("n ≤ c");
        chosen.push(b);
        for i in 0..c {
            nearest[i] = nearest[i].min(m.great_circle(i, b));
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Bundled case `case ∈ 1..=4` at `scale`.
pub fn mask_case(montage: &ElectrodeMontage, scale: usize, case: usize) -> Result<MaskSpec> {
    if !SCALES.contains(&scale) {
        return Err(Error::Config(format!("scale must be one of {SCALES:?}, got {scale}")));
    }
    if !(1..=NUM_CASES).contains(&case) {
        return Err(Error::Config(format!("case must be 1..={NUM_CASES}, got {case}")));
    }
    let c = montage.len();
    if c < 2 * scale {
        return Err(Error::invalid(format!("montage of {c} channels too small for scale {scale}")));
    }
    let visible = if case == 1 {
        strided(c, scale)
    } else {
        spread(montage, visible_count(c, scale), case as u64 - 1)
    };
    MaskSpec::new(montage.clone(), visible, scale)
}

/// All four bundled cases at `scale`.
pub fn mask_cases(montage: &ElectrodeMontage, scale: usize) -> Result<Vec<MaskSpec>> {
    (1..=NUM_CASES).map(|k| mask_case(montage, scale, k)).collect()
}

/// Smallest great-circle distance between two visible electrodes.
pub fn min_visible_distance(spec: &MaskSpec) -> f64 {
    let v = spec.visible();
    let mut best = f64::INFINITY;
    for a in 0..v.len() {
        for b in a + 1..v.len() {
            best = best.min(spec.montage().great_circle(v[a], v[b]));
        }
    }
    best
}
