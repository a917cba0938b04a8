//! Multichannel signal container shared by the generators and pipelines.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{ModalError, Result};

/// A bank of `q` channels sampled uniformly at `fs` Hz.
///
/// Rows are channels, columns are samples. `t0` is the time of the first
/// column, so column `k` was measured at `t0 + k / fs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMatrix {
    samples: Array2<f64>,
    fs: f64,
    t0: f64,
}

impl SignalMatrix {
    /// Wrap a channels-by-samples matrix. Requires `q >= 1`, `T >= 2`, `fs > 0`.
    pub fn new(samples: Array2<f64>, fs: f64, t0: f64) -> Result<Self> {
        let (q, t) = samples.dim();
        if q < 1 || t < 2 {
            return Err(ModalError::ShapeMismatch(format!(
                "signal matrix must be at least 1x2, got {q}x{t}"
            )));
        }
        if !(fs > 0.0) || !fs.is_finite() {
            return Err(ModalError::ShapeMismatch(format!(
                "sampling rate must be positive, got {fs}"
            )));
        }
        Ok(Self { samples, fs, t0 })
    }

    /// Single-channel convenience constructor.
    pub fn from_channel(samples: Vec<f64>, fs: f64, t0: f64) -> Result<Self> {
        let t = samples.len();
        Self::new(
            Array2::from_shape_vec((1, t), samples)
                .map_err(|e| ModalError::ShapeMismatch(e.to_string()))?,
            fs,
            t0,
        )
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Number of channels.
    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    /// Number of samples per channel.
    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    /// Channel `i` as an owned vector.
    pub fn channel(&self, i: usize) -> Array1<f64> {
        self.samples.row(i).to_owned()
    }

    /// Time stamps of every column.
    pub fn time_axis(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.t0 + k as f64 / self.fs).collect()
    }

    /// Sub-range of columns as a new matrix; `t0` shifts accordingly.
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(ModalError::ShapeMismatch(format!(
                "window {start}..{end} out of range for {} samples",
                self.len()
            )));
        }
        let samples = self
            .samples
            .slice(ndarray::s![.., start..end])
            .to_owned();
        Self::new(samples, self.fs, self.t0 + start as f64 / self.fs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn window_shifts_origin() {
        let m = SignalMatrix::new(array![[0.0, 1.0, 2.0, 3.0]], 10.0, 0.0).unwrap();
        let w = m.window(2, 4).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w.samples()[[0, 0]], 2.0);
        assert!((w.t0() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(SignalMatrix::new(Array2::zeros((1, 1)), 10.0, 0.0).is_err());
        assert!(SignalMatrix::new(Array2::zeros((2, 4)), 0.0, 0.0).is_err());
    }
}
