//! Model-order identification by scanning assumed orders with delay
//! embeddings (HOBMI).
//!
//! For each assumed order `m` the observation matrix is brought to `2m`
//! rows by delay embedding, separated with the CoS pipeline, and every
//! recovered channel gets a Hilbert fit. The `2m` frequency/damping
//! estimates collapse into `m` candidate modes by pairing the closest
//! frequencies; consistent pairs (conjugate images of one real mode) have
//! near-zero divergence while surplus channels pair into high-divergence
//! or NaN entries. The detected order is the set of scan columns that
//! survive the NaN guard, each read at its minimum-divergence row.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bss::{hobi_with, modal_estimates, BssConfig};
use crate::error::{ModalError, Result};
use crate::signal::SignalMatrix;

/// Delay-coordinate matrix built from one channel.
#[derive(Debug, Clone)]
pub struct EmbeddedObservation {
    matrix: Array2<f64>,
    channel: usize,
    delay: usize,
}

impl EmbeddedObservation {
    /// Rows are delayed copies: entry (r, c) equals `x[c + r * delay]`.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn channel(&self) -> usize {
        self.channel
    }

    pub fn delay(&self) -> usize {
        self.delay
    }
}

/// Window selection rule for [`select_window`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowCriterion {
    /// Detect the ringdown onset from the largest derivative spike and take
    /// `target_len` samples from there.
    Auto { target_len: usize },
    /// Use the given sample range unchanged.
    Manual { start: usize, end: usize },
}

/// One paired mode candidate from [`pair_modes`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModePair {
    pub f_avg: f64,
    pub sigma_avg: f64,
    /// `sqrt((f_a - f_b)^2 + (sigma_a - sigma_b)^2)`.
    pub divergence: f64,
}

/// Scan matrices over assumed orders m = 2..=M_max.
///
/// Row `m - 2` holds the pairs for assumed order `m` in columns `0..m`
/// sorted by ascending average frequency; unused cells are NaN.
#[derive(Debug, Clone)]
pub struct OrderScan {
    pub f_avg: Array2<f64>,
    pub sigma_avg: Array2<f64>,
    pub divergence: Array2<f64>,
    /// Sample range of the input actually analyzed.
    pub window: (usize, usize),
    pub m_max: usize,
}

/// One detected mode read from the scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedMode {
    pub frequency_hz: f64,
    pub damping: f64,
    /// Assumed order whose row provided the minimum divergence.
    pub source_order: usize,
    /// 1-based scan column.
    pub column: usize,
}

/// Detected modes; the model order is the number of surviving columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedModes {
    pub modes: Vec<DetectedMode>,
}

impl DetectedModes {
    pub fn order(&self) -> usize {
        self.modes.len()
    }
}

/// Tuning for [`hobmi`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HobmiConfig {
    /// Embedding delay in samples.
    pub delay: usize,
    /// Trim fraction for the Hilbert fits.
    pub trim: f64,
    /// Relative eigenvalue floor for the separation runs. Embedded
    /// observations are rank-deficient at over-assumed orders, so this
    /// floor is what retires surplus scan columns.
    pub eps_rel: f64,
    /// Lag override for the separation runs.
    pub n_lags: Option<usize>,
    /// Manual analysis window in samples.
    pub window: Option<(usize, usize)>,
    /// Target auto-window length in seconds.
    pub window_seconds: f64,
    /// Skip a scan column once it holds at least this many NaN rows.
    pub nan_column_guard: usize,
}

impl Default for HobmiConfig {
    fn default() -> Self {
        Self {
            delay: 1,
            trim: crate::hilbert::DEFAULT_TRIM,
            eps_rel: 1e-6,
            n_lags: None,
            window: None,
            window_seconds: 10.0,
            nan_column_guard: 4,
        }
    }
}

/// Delay-coordinate embedding of a single channel.
pub fn takens_embed(x: &[f64], d_star: usize, delay: usize) -> Result<EmbeddedObservation> {
    takens_embed_channel(x, d_star, delay, 0)
}

fn takens_embed_channel(
    x: &[f64],
    d_star: usize,
    delay: usize,
    channel: usize,
) -> Result<EmbeddedObservation> {
    if d_star == 0 || delay == 0 {
        return Err(ModalError::ParameterOutOfRange(
            "embedding needs d_star >= 1 and delay >= 1".into(),
        ));
    }
    let span = (d_star - 1) * delay;
    if x.len() <= span {
        return Err(ModalError::EmbeddingTooLong {
            needed: span,
            got: x.len(),
        });
    }
    let cols = x.len() - span;
    let mut matrix = Array2::zeros((d_star, cols));
    for r in 0..d_star {
        for c in 0..cols {
            matrix[[r, c]] = x[c + r * delay];
        }
    }
    Ok(EmbeddedObservation {
        matrix,
        channel,
        delay,
    })
}

/// Pick the analysis window of a ringdown record.
///
/// The automatic criterion locates the largest derivative spike (the event
/// onset) and takes `target_len` samples from there, clipped to the record.
pub fn select_window(x: &[f64], criterion: &WindowCriterion) -> Result<std::ops::Range<usize>> {
    match *criterion {
        WindowCriterion::Manual { start, end } => {
            if start >= end || end > x.len() {
                return Err(ModalError::ShapeMismatch(format!(
                    "window {start}..{end} out of range for {} samples",
                    x.len()
                )));
            }
            Ok(start..end)
        }
        WindowCriterion::Auto { target_len } => {
            if x.len() < 64 {
                return Err(ModalError::WindowTooShort {
                    needed: 64,
                    got: x.len(),
                });
            }
            let mut onset = 0;
            let mut best = 0.0_f64;
            for k in 0..x.len() - 1 {
                let d = (x[k + 1] - x[k]).abs();
                if d > best {
                    best = d;
                    onset = k;
                }
            }
            if best == 0.0 {
                return Err(ModalError::NoEventDetected);
            }
            let end = (onset + target_len.max(64)).min(x.len());
            Ok(onset..end)
        }
    }
}

/// NaN-last ascending comparator.
fn cmp_nan_last(a: f64, b: f64) -> std::cmp::Ordering {
    match (a.is_nan(), b.is_nan()) {
        (true, true) => std::cmp::Ordering::Equal,
        (true, false) => std::cmp::Ordering::Greater,
        (false, true) => std::cmp::Ordering::Less,
        (false, false) => a.partial_cmp(&b).unwrap(),
    }
}

/// Collapse `2m` channel estimates into `m` mode candidates.
///
/// Estimates are sorted by frequency and repeatedly paired at the smallest
/// adjacent difference, each element used once; NaN estimates sort last and
/// produce NaN pairs. Returned pairs are sorted by ascending `f_avg`.
pub fn pair_modes(f: &[f64], sigma: &[f64]) -> Result<Vec<ModePair>> {
    if f.len() != sigma.len() {
        return Err(ModalError::ShapeMismatch(format!(
            "frequency and damping counts differ: {} vs {}",
            f.len(),
            sigma.len()
        )));
    }
    if f.len() % 2 != 0 {
        return Err(ModalError::UnpairedEstimate { count: f.len() });
    }

    let mut entries: Vec<(f64, f64)> = f.iter().copied().zip(sigma.iter().copied()).collect();
    entries.sort_by(|a, b| cmp_nan_last(a.0, b.0));

    let mut remaining = entries;
    let mut pairs = Vec::with_capacity(remaining.len() / 2);
    while remaining.len() >= 2 {
        let mut best_idx = 0;
        let mut best_diff = f64::INFINITY;
        for k in 0..remaining.len() - 1 {
            let d = (remaining[k + 1].0 - remaining[k].0).abs();
            if !d.is_nan() && d < best_diff {
                best_diff = d;
                best_idx = k;
            }
        }
        // If every adjacent difference is NaN, pair the front entries.
        let (a, b) = (remaining[best_idx], remaining[best_idx + 1]);
        remaining.drain(best_idx..=best_idx + 1);
        let divergence = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        pairs.push(ModePair {
            f_avg: 0.5 * (a.0 + b.0),
            sigma_avg: 0.5 * (a.1 + b.1),
            divergence,
        });
    }
    pairs.sort_by(|a, b| cmp_nan_last(a.f_avg, b.f_avg));
    Ok(pairs)
}

/// Bring the windowed observation to exactly `rows` rows.
fn observation_matrix(
    x: &SignalMatrix,
    rows: usize,
    delay: usize,
) -> Result<SignalMatrix> {
    let q = x.channels();
    if q >= rows {
        let data = x.samples().slice(ndarray::s![..rows, ..]).to_owned();
        return SignalMatrix::new(data, x.fs(), x.t0());
    }
    // Embed each channel to ceil(rows/q) delay rows and stack channel-major.
    let per = rows.div_ceil(q);
    let cols = x
        .len()
        .checked_sub((per - 1) * delay)
        .filter(|&c| c > 0)
        .ok_or(ModalError::EmbeddingTooLong {
            needed: (per - 1) * delay,
            got: x.len(),
        })?;
    let mut data = Array2::zeros((rows, cols));
    let mut row = 0;
    'outer: for ch in 0..q {
        let series = x.channel(ch).to_vec();
        let emb = takens_embed_channel(&series, per, delay, ch)?;
        for r in 0..per {
            for c in 0..cols {
                data[[row, c]] = emb.matrix()[[r, c]];
            }
            row += 1;
            if row == rows {
                break 'outer;
            }
        }
    }
    SignalMatrix::new(data, x.fs(), x.t0())
}

/// Scan assumed orders 2..=`m_max` and detect the model order.
pub fn hobmi(
    x: &SignalMatrix,
    m_max: usize,
    config: &HobmiConfig,
) -> Result<(OrderScan, DetectedModes)> {
    if m_max < 2 {
        return Err(ModalError::ParameterOutOfRange(format!(
            "m_max must be at least 2, got {m_max}"
        )));
    }

    // Window the record. Multichannel onset detection runs on the
    // per-sample L2 norm across channels.
    let range = match config.window {
        Some((start, end)) => select_window(
            &vec![0.0; x.len()],
            &WindowCriterion::Manual { start, end },
        )?,
        None => {
            let series: Vec<f64> = if x.channels() == 1 {
                x.channel(0).to_vec()
            } else {
                (0..x.len())
                    .map(|k| {
                        (0..x.channels())
                            .map(|i| x.samples()[[i, k]].powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            };
            let target = (config.window_seconds * x.fs()).round() as usize;
            select_window(&series, &WindowCriterion::Auto { target_len: target })?
        }
    };
    let windowed = x.window(range.start, range.end)?;

    let needed = (2 * m_max - 1) * config.delay + 10;
    if windowed.len() <= needed {
        return Err(ModalError::EmbeddingTooLong {
            needed,
            got: windowed.len(),
        });
    }

    let rows = m_max - 1;
    let mut f_avg = Array2::from_elem((rows, m_max), f64::NAN);
    let mut sigma_avg = Array2::from_elem((rows, m_max), f64::NAN);
    let mut divergence = Array2::from_elem((rows, m_max), f64::NAN);

    let bss_config = BssConfig {
        n_lags: config.n_lags,
        eps_rel: config.eps_rel,
        ..BssConfig::default()
    };

    for m in 2..=m_max {
        let obs = observation_matrix(&windowed, 2 * m, config.delay)?;
        let res = hobi_with(&obs, &bss_config)?;
        let channels = modal_estimates(&res, config.trim);

        let mut fs: Vec<f64> = Vec::with_capacity(channels.len());
        let mut sg: Vec<f64> = Vec::with_capacity(channels.len());
        let mut fit: Vec<f64> = Vec::with_capacity(channels.len());
        for est in &channels {
            match &est.estimate {
                Some(e) => {
                    fs.push(e.frequency_hz);
                    sg.push(e.damping);
                    fit.push(e.r_squared);
                }
                None => {
                    fs.push(f64::NAN);
                    sg.push(f64::NAN);
                    fit.push(f64::NAN);
                }
            }
        }
        // Rank truncation can leave an odd channel count; retire the worst
        // fit (a NaN if present) so pairing stays defined.
        if fs.len() % 2 == 1 {
            let mut drop = 0;
            for k in 1..fs.len() {
                if cmp_nan_last(fit[k], fit[drop]) == std::cmp::Ordering::Greater {
                    continue;
                }
                if fit[k].is_nan() || fit[k] < fit[drop] || fit[drop].is_nan() {
                    drop = k;
                }
            }
            fs.remove(drop);
            sg.remove(drop);
        }

        let pairs = pair_modes(&fs, &sg)?;
        for (k, pair) in pairs.iter().take(m_max).enumerate() {
            f_avg[[m - 2, k]] = pair.f_avg;
            sigma_avg[[m - 2, k]] = pair.sigma_avg;
            divergence[[m - 2, k]] = pair.divergence;
        }
    }

    // Column-wise minimum divergence, skipping columns the NaN guard
    // retires or that never received a finite entry.
    let mut modes = Vec::new();
    for col in 0..m_max {
        let mut nan_count = 0;
        let mut best: Option<(usize, f64)> = None;
        for row in 0..rows {
            let d = divergence[[row, col]];
            if d.is_nan() {
                nan_count += 1;
            } else if best.map(|(_, b)| d < b).unwrap_or(true) {
                best = Some((row, d));
            }
        }
        if nan_count >= config.nan_column_guard {
            continue;
        }
        let Some((row, _)) = best else {
            continue;
        };
        modes.push(DetectedMode {
            frequency_hz: f_avg[[row, col]],
            damping: sigma_avg[[row, col]],
            source_order: row + 2,
            column: col + 1,
        });
    }
    if modes.is_empty() {
        return Err(ModalError::OrderUndeterminable);
    }

    Ok((
        OrderScan {
            f_avg,
            sigma_avg,
            divergence,
            window: (range.start, range.end),
            m_max,
        },
        DetectedModes { modes },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eig_sym;
    use crate::sampling::{synth_modal, ModeSpec};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn takens_shape() {
        let x: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let e = takens_embed(&x, 4, 1).unwrap();
        assert_eq!(e.matrix().dim(), (4, 7));
        assert_eq!(e.matrix()[[3, 2]], 5.0);
    }

    #[test]
    fn takens_dimension_one_is_identity() {
        let x: Vec<f64> = (0..20).map(|k| (k as f64).sin()).collect();
        let e = takens_embed(&x, 1, 1).unwrap();
        assert_eq!(e.matrix().row(0).to_vec(), x);
    }

    #[test]
    fn takens_rejects_short_signal() {
        let x = vec![0.0; 5];
        assert!(matches!(
            takens_embed(&x, 4, 2).unwrap_err(),
            ModalError::EmbeddingTooLong { .. }
        ));
    }

    #[test]
    fn embedded_tone_has_rank_two() {
        let fs = 20.0;
        let x: Vec<f64> = (0..200)
            .map(|k| (2.0 * PI * 0.8 * k as f64 / fs).sin())
            .collect();
        let e = takens_embed(&x, 6, 1).unwrap();
        let gram = e.matrix().dot(&e.matrix().t()) / e.matrix().ncols() as f64;
        let spec = eig_sym(&gram).unwrap();
        let top = spec.values()[0];
        for &v in &spec.values()[2..] {
            assert!(v.abs() < 1e-6 * top, "singular spectrum {:?}", spec.values());
        }
    }

    #[test]
    fn window_finds_step_onset() {
        let fs = 100.0;
        let n = 1000;
        let x: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 / fs;
                if t < 1.0 {
                    0.0
                } else {
                    (-0.3 * (t - 1.0)).exp() * (2.0 * PI * 2.0 * (t - 1.0)).sin()
                }
            })
            .collect();
        let w = select_window(&x, &WindowCriterion::Auto { target_len: 500 }).unwrap();
        assert!((w.start as f64 / fs - 1.0).abs() <= 0.1, "start {}", w.start);
    }

    #[test]
    fn window_manual_passthrough_and_flat_error() {
        let x = vec![0.0; 128];
        let w = select_window(&x, &WindowCriterion::Manual { start: 10, end: 90 }).unwrap();
        assert_eq!(w, 10..90);
        assert_eq!(
            select_window(&x, &WindowCriterion::Auto { target_len: 100 }).unwrap_err(),
            ModalError::NoEventDetected
        );
    }

    #[test]
    fn pair_modes_arithmetic() {
        let f = [1.0, 1.0, 2.0, 2.1];
        let s = [-0.1, -0.1, -0.2, -0.3];
        let pairs = pair_modes(&f, &s).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].f_avg, 1.0);
        assert_eq!(pairs[0].divergence, 0.0);
        assert!((pairs[1].f_avg - 2.05).abs() < 1e-12);
        assert!((pairs[1].divergence - 0.02_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pair_modes_nan_entries_pair_last() {
        let f = [1.0, f64::NAN, 1.02, f64::NAN];
        let s = [-0.1, f64::NAN, -0.11, f64::NAN];
        let pairs = pair_modes(&f, &s).unwrap();
        assert!(!pairs[0].f_avg.is_nan());
        assert!(pairs[1].f_avg.is_nan());
        assert!(pairs[1].divergence.is_nan());
    }

    #[test]
    fn pair_modes_rejects_odd_count() {
        assert!(matches!(
            pair_modes(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap_err(),
            ModalError::UnpairedEstimate { count: 3 }
        ));
    }

    #[test]
    fn hobmi_two_modes_exact_order() {
        let modes = [
            ModeSpec::new(1.0, -0.05, 0.8, 0.3).unwrap(),
            ModeSpec::new(0.8, -0.10, 1.5, 1.2).unwrap(),
        ];
        let x = synth_modal(&modes, 20.0, 20.0).unwrap();
        let config = HobmiConfig {
            window: Some((0, x.len())),
            ..HobmiConfig::default()
        };
        let (scan, detected) = hobmi(&x, 5, &config).unwrap();
        assert_eq!(detected.order(), 2, "scan divergence {:?}", scan.divergence);
        let mut freqs: Vec<f64> = detected.modes.iter().map(|m| m.frequency_hz).collect();
        freqs.sort_by(f64::total_cmp);
        assert!((freqs[0] - 0.8).abs() / 0.8 <= 0.02, "f1 {}", freqs[0]);
        assert!((freqs[1] - 1.5).abs() / 1.5 <= 0.02, "f2 {}", freqs[1]);
    }

    #[test]
    fn hobmi_single_tone_order_one() {
        let modes = [ModeSpec::new(1.0, -0.05, 1.0, 0.5).unwrap()];
        let x = synth_modal(&modes, 20.0, 20.0).unwrap();
        let config = HobmiConfig {
            window: Some((0, x.len())),
            ..HobmiConfig::default()
        };
        let (_, detected) = hobmi(&x, 4, &config).unwrap();
        assert_eq!(detected.order(), 1);
    }

    proptest! {
        #[test]
        fn takens_invariant_holds(d_star in 1usize..6, delay in 1usize..4, seed in 0u64..50) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let n = 40;
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let e = takens_embed(&x, d_star, delay).unwrap();
            for ((r, c), &v) in e.matrix().indexed_iter() {
                prop_assert_eq!(v, x[c + r * delay]);
            }
        }
    }
}
