//! Analytic-signal construction and per-mode frequency/damping fits.
//!
//! The analytic series is built in the frequency domain (double positive
//! bins, zero negative bins, keep DC and Nyquist), so its real part is the
//! input signal and its imaginary part is the Hilbert transform. Frequency
//! is the mean instantaneous frequency from central differences of the
//! unwrapped phase; damping is the least-squares slope of the
//! log-amplitude. Both are evaluated on an interior window because the
//! transform is unreliable near the edges.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{ModalError, Result};

/// Minimum window length for the analytic construction.
pub const MIN_WINDOW: usize = 16;

/// Default fraction trimmed from each end before fitting.
pub const DEFAULT_TRIM: f64 = 0.1;

/// Complex analytic series of a real channel.
#[derive(Debug, Clone)]
pub struct AnalyticSeries {
    data: Vec<Complex64>,
    fs: f64,
}

impl AnalyticSeries {
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Instantaneous amplitude `|z_k|`.
    pub fn amplitude(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    /// Unwrapped instantaneous phase in radians.
    pub fn unwrapped_phase(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        let mut offset = 0.0;
        let mut prev = 0.0;
        for (k, z) in self.data.iter().enumerate() {
            let raw = z.im.atan2(z.re);
            if k > 0 {
                let mut d = raw - prev;
                while d > PI {
                    d -= 2.0 * PI;
                    offset -= 2.0 * PI;
                }
                while d < -PI {
                    d += 2.0 * PI;
                    offset += 2.0 * PI;
                }
            }
            prev = raw;
            out.push(raw + offset);
        }
        out
    }

    /// Instantaneous frequency in Hz: central differences of the unwrapped
    /// phase, one-sided at the ends.
    pub fn instantaneous_frequency(&self) -> Vec<f64> {
        let phase = self.unwrapped_phase();
        let n = phase.len();
        let scale = self.fs / (2.0 * PI);
        let mut out = vec![0.0; n];
        for k in 1..n - 1 {
            out[k] = (phase[k + 1] - phase[k - 1]) * 0.5 * scale;
        }
        out[0] = (phase[1] - phase[0]) * scale;
        out[n - 1] = (phase[n - 1] - phase[n - 2]) * scale;
        out
    }
}

/// Frequency/damping estimate for one separated channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeEstimate {
    /// Mean instantaneous frequency over the fit window, Hz.
    pub frequency_hz: f64,
    /// Log-amplitude slope in 1/s; negative means decaying.
    pub damping: f64,
    /// Coefficient of determination of the log-amplitude fit.
    pub r_squared: f64,
    /// Fit window as (start, end) sample indices of the input.
    pub fit_window: (usize, usize),
}

/// Frequency-domain analytic signal of a real channel.
pub fn analytic_signal(y: &[f64], fs: f64) -> Result<AnalyticSeries> {
    let n = y.len();
    if n < MIN_WINDOW {
        return Err(ModalError::WindowTooShort {
            needed: MIN_WINDOW,
            got: n,
        });
    }
    for (i, &v) in y.iter().enumerate() {
        if !v.is_finite() {
            return Err(ModalError::InvalidSample { index: i });
        }
    }

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);

    let mut buf: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);

    let half = n / 2;
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == half) {
            // DC and Nyquist untouched.
        } else if k < half || (n % 2 == 1 && k == half) {
            *v *= 2.0;
        } else {
            *v = Complex64::new(0.0, 0.0);
        }
    }

    ifft.process(&mut buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
    Ok(AnalyticSeries { data: buf, fs })
}

fn zero_crossings(y: &[f64]) -> usize {
    let mut count = 0;
    let mut prev: Option<f64> = None;
    for &v in y {
        if v == 0.0 {
            continue;
        }
        if let Some(p) = prev {
            if p * v < 0.0 {
                count += 1;
            }
        }
        prev = Some(v);
    }
    count
}

/// Fit frequency and damping to one oscillatory channel.
///
/// `trim_frac` of the samples are dropped from each end before averaging
/// the instantaneous frequency and fitting the log-amplitude slope.
pub fn mode_parameters(y: &[f64], fs: f64, trim_frac: f64) -> Result<ModeEstimate> {
    let analytic = analytic_signal(y, fs)?;
    let n = y.len();
    let trim = ((trim_frac * n as f64).floor() as usize).min(n / 2);
    let (start, end) = (trim, n - trim);
    if end - start < 8 {
        return Err(ModalError::WindowTooShort {
            needed: 8,
            got: end - start,
        });
    }

    if zero_crossings(&y[start..end]) < 4 {
        return Err(ModalError::NoOscillation);
    }

    let amplitude = analytic.amplitude();
    if amplitude[start..end].iter().any(|&a| a <= 0.0) {
        return Err(ModalError::AmplitudeDegenerate);
    }

    let freq = analytic.instantaneous_frequency();
    let interior = &freq[start..end];
    let f_mean = interior.iter().sum::<f64>() / interior.len() as f64;
    if !f_mean.is_finite() || f_mean <= 0.0 {
        return Err(ModalError::NoOscillation);
    }

    // Least-squares line through (t_k, ln a_k).
    let m = end - start;
    let mf = m as f64;
    let mut sum_t = 0.0;
    let mut sum_l = 0.0;
    for k in start..end {
        sum_t += k as f64 / fs;
        sum_l += amplitude[k].ln();
    }
    let mean_t = sum_t / mf;
    let mean_l = sum_l / mf;
    let mut stt = 0.0;
    let mut stl = 0.0;
    let mut sll = 0.0;
    for k in start..end {
        let dt = k as f64 / fs - mean_t;
        let dl = amplitude[k].ln() - mean_l;
        stt += dt * dt;
        stl += dt * dl;
        sll += dl * dl;
    }
    let slope = stl / stt;
    let r_squared = if sll > 0.0 { (stl * stl) / (stt * sll) } else { 1.0 };

    Ok(ModeEstimate {
        frequency_hz: f_mean,
        damping: slope,
        r_squared,
        fit_window: (start, end),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tone(f: f64, sigma: f64, fs: f64, n: usize, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let t = k as f64 / fs;
                (sigma * t).exp() * (2.0 * PI * f * t + phase).sin()
            })
            .collect()
    }

    #[test]
    fn analytic_real_part_is_input() {
        let y = tone(1.7, -0.2, 50.0, 1000, 0.3);
        let a = analytic_signal(&y, 50.0).unwrap();
        for (k, z) in a.data().iter().enumerate() {
            assert!((z.re - y[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn analytic_of_zero_is_zero() {
        let y = vec![0.0; 64];
        let a = analytic_signal(&y, 10.0).unwrap();
        for z in a.data() {
            assert_eq!(z.norm(), 0.0);
        }
    }

    #[test]
    fn analytic_quadrature_pair() {
        // 1.2 Hz over 10 s at 100 Hz spans an integer cycle count, so the
        // discrete analytic series matches the closed-form quadrature pair.
        let fs = 100.0;
        let n = 1000;
        let y: Vec<f64> = (0..n)
            .map(|k| (2.0 * PI * 1.2 * k as f64 / fs).cos())
            .collect();
        let a = analytic_signal(&y, fs).unwrap();
        let mut worst = 0.0_f64;
        for k in 50..n - 50 {
            let expect = (2.0 * PI * 1.2 * k as f64 / fs).sin();
            worst = worst.max((a.data()[k].im - expect).abs());
        }
        assert!(worst < 1e-3, "max quadrature error {worst}");
    }

    #[test]
    fn analytic_rejects_short_window() {
        assert!(matches!(
            analytic_signal(&[0.0; 8], 10.0).unwrap_err(),
            ModalError::WindowTooShort { .. }
        ));
    }

    #[test]
    fn mode_roundtrip_damped() {
        let y = tone(1.0, -0.1, 100.0, 1000, 0.0);
        let est = mode_parameters(&y, 100.0, DEFAULT_TRIM).unwrap();
        assert!((est.frequency_hz - 1.0).abs() <= 0.01);
        assert!((est.damping + 0.1).abs() <= 0.005);
        assert!(est.r_squared > 0.99);
    }

    #[test]
    fn mode_roundtrip_undamped() {
        let y = tone(1.2, 0.0, 100.0, 1000, 0.0);
        let est = mode_parameters(&y, 100.0, DEFAULT_TRIM).unwrap();
        assert!((est.frequency_hz - 1.2).abs() <= 0.012);
        assert!(est.damping.abs() <= 0.01);
    }

    #[test]
    fn constant_input_is_rejected() {
        let y = vec![3.0; 256];
        assert_eq!(
            mode_parameters(&y, 10.0, DEFAULT_TRIM).unwrap_err(),
            ModalError::NoOscillation
        );
    }

    #[test]
    fn amplitude_scaling_leaves_fit_unchanged() {
        let y = tone(0.8, -0.05, 20.0, 400, 0.7);
        let scaled: Vec<f64> = y.iter().map(|v| 37.5 * v).collect();
        let a = mode_parameters(&y, 20.0, DEFAULT_TRIM).unwrap();
        let b = mode_parameters(&scaled, 20.0, DEFAULT_TRIM).unwrap();
        assert_abs_diff_eq!(a.frequency_hz, b.frequency_hz, epsilon = 1e-12);
        assert_abs_diff_eq!(a.damping, b.damping, epsilon = 1e-10);
    }

    #[test]
    fn stationary_tone_frequency_is_shift_invariant() {
        let fs = 100.0;
        let n = 2000;
        let shift = 0.37;
        let y1: Vec<f64> = (0..n)
            .map(|k| (2.0 * PI * 2.5 * k as f64 / fs).sin())
            .collect();
        let y2: Vec<f64> = (0..n)
            .map(|k| (2.0 * PI * 2.5 * (k as f64 / fs + shift)).sin())
            .collect();
        let a = mode_parameters(&y1, fs, DEFAULT_TRIM).unwrap();
        let b = mode_parameters(&y2, fs, DEFAULT_TRIM).unwrap();
        assert!((a.frequency_hz - b.frequency_hz).abs() < 1e-3);
    }
}
