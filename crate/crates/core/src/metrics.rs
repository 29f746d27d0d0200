//! Reconstruction quality metrics over masked rows.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    Ok(())
}

/// `Σ(gt − sr)² / Σgt²`.
pub fn nmse(gt: &Tensor, sr: &Tensor) -> Result<f64> {
    same_shape("nmse", gt, sr)?;
    let energy: f64 = gt.data().iter().map(|g| g * g).sum();
    if energy == 0.0 {
        return Err(Error::UndefinedMetric("nmse of an all-zero reference"));
    }
    let err: f64 = gt.data().iter().zip(sr.data()).map(|(g, s)| (g - s) * (g - s)).sum();
    Ok(err / energy)
}

/// `−10·log₁₀(nmse)`; a perfect reconstruction gives `+∞`.
pub fn snr_from_nmse(nmse: f64) -> f64 {
    if nmse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * nmse.log10()
    }
}

pub fn snr_db(gt: &Tensor, sr: &Tensor) -> Result<f64> {
    nmse(gt, sr).map(snr_from_nmse)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::invalid("pearson needs two equal-length, nonempty series"));
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedMetric("correlation with a constant row"));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Mean over rows of the per-row Pearson correlation.
pub fn pcc(gt: &Tensor, sr: &Tensor) -> Result<f64> {
    same_shape("pcc", gt, sr)?;
    let (m, _) = gt.rows_cols();
    let mut total = 0.0;
    for i in 0..m {
        total += pearson(gt.row(i), sr.row(i))?;
    }
    Ok(total / m as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMetrics {
    pub nmse: f64,
    pub snr_db: f64,
    pub pcc: f64,
}

impl SampleMetrics {
    pub fn compute(gt: &Tensor, sr: &Tensor) -> Result<Self> {
        let n = nmse(gt, sr)?;
        Ok(SampleMetrics {
            nmse: n,
            snr_db: snr_from_nmse(n),
            pcc: pcc(gt, sr)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population standard deviation.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return MeanStd {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Per-sample metrics averaged over a test set.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub nmse: MeanStd,
    pub snr_db: MeanStd,
    pub pcc: MeanStd,
    pub samples: Vec<SampleMetrics>,
}

impl MetricSummary {
    pub fn from_samples(samples: Vec<SampleMetrics>) -> Self {
        MetricSummary {
            nmse: MeanStd::of(samples.iter().map(|s| s.nmse)),
            snr_db: MeanStd::of(samples.iter().map(|s| s.snr_db)),
            pcc: MeanStd::of(samples.iter().map(|s| s.pcc)),
            samples,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows)
    }

    #[test]
    fn perfect_and_zero_reconstructions() {
        let gt = t(&[vec![1.0, -2.0, 3.0], vec![0.5, 0.0, -1.0]]);
        assert_eq!(nmse(&gt, &gt).unwrap(), 0.0);
        assert_eq!(snr_db(&gt, &gt).unwrap(), f64::INFINITY);
        assert!((pcc(&gt, &gt).unwrap() - 1.0).abs() < 1e-12);
        let zero = Tensor::zeros(&[2, 3]);
        assert_eq!(nmse(&gt, &zero).unwrap(), 1.0);
        assert_eq!(snr_db(&gt, &zero).unwrap(), 0.0);
    }

    #[test]
    fn undefined_cases() {
        let zero = Tensor::zeros(&[1, 3]);
        assert!(matches!(nmse(&zero, &zero), Err(Error::UndefinedMetric(_))));
        let gt = t(&[vec![1.0, 2.0, 3.0]]);
        let flat = t(&[vec![2.0, 2.0, 2.0]]);
        assert!(pcc(&gt, &flat).is_err());
    }

    #[test]
    fn mean_std() {
        let s = MeanStd::of([1.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
    }
}
