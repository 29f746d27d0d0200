//! Windowed multichannel recordings, splitting, and the `.esr1` container.

mod container;
pub mod synth;

pub use container::{load, save, read_from, write_to, FORMAT_VERSION, MAGIC};
pub use synth::{synth_generate, SyntheticConfig, BANDS, BAND_NAMES};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::montage::ElectrodeMontage;
use crate::rng;
use crate::tensor::Tensor;

/// `N × C × T` windows recorded on one montage.
#[derive(Debug, Clone, PartialEq)]
pub struct EEGDataset {
    montage: ElectrodeMontage,
    sample_rate: f64,
    windows: Tensor,
    labels: Option<Vec<u16>>,
}

impl EEGDataset {
    pub fn new(
        montage: ElectrodeMontage,
        sample_rate: f64,
        windows: Tensor,
        labels: Option<Vec<u16>>,
    ) -> Result<Self> {
        if windows.rank() != 3 {
            return Err(Error::invalid("dataset windows must be N × C × T"));
        }
        if windows.shape()[1] != montage.len() {
            return Err(Error::shape("dataset", windows.shape(), &[windows.shape()[0], montage.len()]));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::invalid(format!("sample rate {sample_rate} must be positive")));
        }
        if let Some(l) = &labels {
            if l.len() != windows.shape()[0] {
                return Err(Error::invalid(format!(
                    "{} labels for {} windows",
                    l.len(),
                    windows.shape()[0]
                )));
            }
        }
        Ok(EEGDataset {
            montage,
            sample_rate,
            windows,
            labels,
        })
    }

    /// Cut a `C × L` recording into non-overlapping windows of `time_len`
    /// samples; a trailing partial window is dropped.
    pub fn from_continuous(
        montage: ElectrodeMontage,
        sample_rate: f64,
        recording: &Tensor,
        time_len: usize,
    ) -> Result<Self> {
        if recording.rank() != 2 || time_len == 0 {
            return Err(Error::invalid("need a C × L recording and a positive window length"));
        }
        let (c, l) = (recording.shape()[0], recording.shape()[1]);
        let n = l / time_len;
        if n == 0 {
            return Err(Error::invalid(format!("recording of {l} samples shorter than one window")));
        }
        let mut data = Vec::with_capacity(n * c * time_len);
        for w in 0..n {
            for ch in 0..c {
                data.extend_from_slice(&recording.row(ch)[w * time_len..(w + 1) * time_len]);
            }
        }
        Self::new(montage, sample_rate, Tensor::new(&[n, c, time_len], data)?, None)
    }

    pub fn montage(&self) -> &ElectrodeMontage {
        &self.montage
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.windows.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.windows.shape()[1]
    }

    pub fn time_len(&self) -> usize {
        self.windows.shape()[2]
    }

    pub fn window_seconds(&self) -> f64 {
        self.time_len() as f64 / self.sample_rate
    }

    pub fn windows(&self) -> &Tensor {
        &self.windows
    }

    /// Window `i` as `C × T`.
    pub fn window(&self, i: usize) -> Tensor {
        self.windows.slab(i)
    }

    pub fn labels(&self) -> Option<&[u16]> {
        self.labels.as_deref()
    }

    /// Number of distinct classes (`max label + 1`), zero without labels.
    pub fn num_classes(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |&m| m as usize + 1)
    }

    pub fn with_labels(mut self, labels: Option<Vec<u16>>) -> Result<Self> {
        self.labels = labels;
        Self::new(self.montage, self.sample_rate, self.windows, self.labels)
    }

    /// Windows picked by index, in that order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let (c, t) = (self.channels(), self.time_len());
        let mut data = Vec::with_capacity(idx.len() * c * t);
        for &i in idx {
            if i >= self.len() {
                return Err(Error::OutOfBounds {
                    op: "subset",
                    detail: format!("window {i} of {}", self.len()),
                });
            }
            data.extend_from_slice(&self.windows.data()[i * c * t..(i + 1) * c * t]);
        }
        let labels = self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect());
        Self::new(self.montage.clone(), self.sample_rate, Tensor::new(&[idx.len(), c, t], data)?, labels)
    }

    /// Same windows restricted to the given channels (new montage order).
    pub fn select_channels(&self, channels: &[usize]) -> Result<Self> {
        let names: Vec<&str> = channels
            .iter()
            .map(|&i| {
                if i < self.channels() {
                    Ok(self.montage.name(i))
                } else {
                    Err(Error::OutOfBounds {
                        op: "select_channels",
                        detail: format!("channel {i} of {}", self.channels()),
                    })
                }
            })
            .collect::<Result<_>>()?;
        let montage = self.montage.subset(&names)?;
        let windows: Vec<Tensor> = (0..self.len())
            .map(|i| self.window(i).select_rows(channels))
            .collect::<Result<_>>()?;
        Self::new(montage, self.sample_rate, stack(&windows)?, self.labels.clone())
    }

    /// Replace every window by `f(window)`, keeping shape.
    pub fn map_windows(&self, mut f: impl FnMut(usize, &Tensor) -> Result<Tensor>) -> Result<Self> {
        let windows = (0..self.len())
            .map(|i| f(i, &self.window(i)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.montage.clone(), self.sample_rate, stack(&windows)?, self.labels.clone())
    }
}

/// Stack equal-shape `C × T` tensors into `N × C × T`.
pub fn stack(windows: &[Tensor]) -> Result<Tensor> {
    let first = windows.first().ok_or_else(|| Error::invalid("nothing to stack"))?;
    let shape = first.shape().to_vec();
    let mut data = Vec::with_capacity(windows.len() * first.len());
    for w in windows {
        if w.shape() != shape.as_slice() || shape.len() != 2 {
            return Err(Error::shape("stack", w.shape(), &shape));
        }
        data.extend_from_slice(w.data());
    }
    Tensor::new(&[windows.len(), shape[0], shape[1]], data)
}

/// Seeded shuffle, then the first `round(N · train_frac)` windows (clamped
/// to leave both sides nonempty) become the training set.
pub fn split(ds: &EEGDataset, train_frac: f64, seed: u64) -> Result<(EEGDataset, EEGDataset)> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::invalid(format!("cannot split {n} windows")));
    }
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Config(format!("train fraction {train_frac} outside (0, 1)")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let k = ((n as f64 * train_frac).round() as usize).clamp(1, n - 1);
    Ok((ds.subset(&idx[..k])?, ds.subset(&idx[k..])?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> EEGDataset {
        let m = ElectrodeMontage::builtin("toy_6").unwrap();
        let w = Tensor::new(&[n, 6, 4], (0..n * 24).map(|v| v as f64).collect()).unwrap();
        EEGDataset::new(m, 100.0, w, Some((0..n as u16).collect())).unwrap()
    }

    #[test]
    fn split_sizes_and_coverage() {
        let ds = toy(10);
        let (a, b) = split(&ds, 0.8, 3).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let mut all: Vec<u16> = a.labels().unwrap().iter().chain(b.labels().unwrap()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        let (c, _) = split(&ds, 0.8, 3).unwrap();
        assert_eq!(a, c);
        assert!(split(&toy(1), 0.8, 0).is_err());
    }

    #[test]
    fn windowing_drops_tail() {
        let m = ElectrodeMontage::builtin("toy_6").unwrap();
        let rec = Tensor::new(&[6, 10], (0..60).map(|v| v as f64).collect()).unwrap();
        let ds = EEGDataset::from_continuous(m, 2.0, &rec, 4).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.window(1).row(0), &[4.0, 5.0, 6.0, 7.0]);
        assert_eq!(ds.window_seconds(), 2.0);
    }

    #[test]
    fn rejects_inconsistent_parts() {
        let m = ElectrodeMontage::builtin("toy_6").unwrap();
        assert!(EEGDataset::new(m.clone(), 100.0, Tensor::zeros(&[2, 5, 4]), None).is_err());
        assert!(EEGDataset::new(m.clone(), 100.0, Tensor::zeros(&[2, 6, 4]), Some(vec![0])).is_err());
        assert!(EEGDataset::new(m, 0.0, Tensor::zeros(&[2, 6, 4]), None).is_err());
    }

    #[test]
    fn channel_selection() {
        let ds = toy(2);
        let s = ds.select_channels(&[4, 1]).unwrap();
        assert_eq!(s.montage().name(0), "P3");
        assert_eq!(s.window(1).row(0), ds.window(1).row(4));
        assert_eq!(s.window(1).row(1), ds.window(1).row(1));
    }
}
