//! Blind source separation pipelines: HOBI (CoS-based) and the SOBI
//! baseline (covariance-based), plus the Hilbert composition that turns
//! recovered sources into mode estimates.
//!
//! Both pipelines share the same skeleton: whiten using the lag-0
//! dependence matrix, build a bank of time-lagged matrices of the whitened
//! signals, jointly diagonalize the bank, and compose the de-mixing matrix
//! `W = psi^T W_X`. They differ only in the dependence statistic.
//!
//! HOBI standardizes each channel to unit sample variance before applying
//! the whitener. The CoS matrix carries no scale information, so without
//! this the pipeline would depend on channel units; with it, rescaling any
//! channel leaves the recovered sources unchanged. The scaling is folded
//! into `W`, so `Y = W X` still holds against the raw input.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::copula_stat::dependency_matrix;
use crate::error::{ModalError, Result};
use crate::hilbert::{mode_parameters, ModeEstimate, DEFAULT_TRIM};
use crate::linalg::{eig_sym, jad, whiten, JadResult, Whitener, JAD_MAX_SWEEPS, JAD_TOL, WHITEN_REL_FLOOR};
use crate::signal::SignalMatrix;

/// Minimum sample count for the separation pipelines.
pub const MIN_PIPELINE_SAMPLES: usize = 30;

/// Tuning knobs shared by [`hobi`] and [`sobi`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BssConfig {
    /// Number of lags; `None` uses `min(100, T/3 + 1)`.
    pub n_lags: Option<usize>,
    /// Relative eigenvalue floor for whitening.
    pub eps_rel: f64,
    /// JAD rotation-angle tolerance in radians.
    pub jad_tol: f64,
    /// JAD sweep budget.
    pub jad_max_sweeps: usize,
}

impl Default for BssConfig {
    fn default() -> Self {
        Self {
            n_lags: None,
            eps_rel: WHITEN_REL_FLOOR,
            jad_tol: JAD_TOL,
            jad_max_sweeps: JAD_MAX_SWEEPS,
        }
    }
}

/// Everything produced by one separation run.
#[derive(Debug, Clone)]
pub struct DemixingResult {
    w: Array2<f64>,
    whitener: Whitener,
    jad: JadResult,
    sources: SignalMatrix,
    lags: Vec<usize>,
}

impl DemixingResult {
    /// The `r x q` de-mixing matrix, `Y = W X`.
    pub fn w(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn whitener(&self) -> &Whitener {
        &self.whitener
    }

    /// The JAD rotation and its convergence trace.
    pub fn jad(&self) -> &JadResult {
        &self.jad
    }

    /// Recovered sources, one per retained rank.
    pub fn sources(&self) -> &SignalMatrix {
        &self.sources
    }

    /// Lags used for the time-shifted matrix bank.
    pub fn lags(&self) -> &[usize] {
        &self.lags
    }
}

/// Outcome of the Hilbert fit on one recovered channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub channel: usize,
    pub estimate: Option<ModeEstimate>,
    /// Reason the fit failed, when `estimate` is `None`.
    pub failure: Option<String>,
}

/// Matched pair from [`align_sources`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    /// Row index in the reference set.
    pub reference: usize,
    /// Row index in the recovered set.
    pub recovered: usize,
    /// Absolute Pearson correlation of the pair.
    pub correlation: f64,
    /// Sign of the raw correlation.
    pub sign: f64,
}

/// Greedy max-|correlation| assignment between recovered and reference rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub pairs: Vec<AlignedPair>,
}

impl Alignment {
    pub fn mean_correlation(&self) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        self.pairs.iter().map(|p| p.correlation).sum::<f64>() / self.pairs.len() as f64
    }

    pub fn min_correlation(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| p.correlation)
            .fold(f64::INFINITY, f64::min)
    }
}

fn default_lag_count(t: usize) -> usize {
    (t / 3 + 1).min(100)
}

fn validate_input(x: &SignalMatrix) -> Result<()> {
    if x.channels() < 2 {
        return Err(ModalError::NeedTwoChannels);
    }
    if x.len() < MIN_PIPELINE_SAMPLES {
        return Err(ModalError::InsufficientSamples {
            needed: MIN_PIPELINE_SAMPLES,
            got: x.len(),
        });
    }
    Ok(())
}

fn compose(
    data: &Array2<f64>,
    fs: f64,
    t0: f64,
    whitener: Whitener,
    jad_result: JadResult,
    scale: Option<&Array1<f64>>,
    lags: Vec<usize>,
) -> Result<DemixingResult> {
    // W = psi^T W_X, with any per-channel standardization folded in.
    let mut w = jad_result.rotation().t().dot(whitener.matrix());
    if let Some(scale) = scale {
        for mut row in w.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v *= scale[j];
            }
        }
    }
    let y = w.dot(data);
    Ok(DemixingResult {
        w,
        whitener,
        jad: jad_result,
        sources: SignalMatrix::new(y, fs, t0)?,
        lags,
    })
}

/// High-order blind identification: CoS whitening plus JAD over lagged CoS
/// matrices of the whitened signals.
pub fn hobi(x: &SignalMatrix, n_lags: Option<usize>) -> Result<DemixingResult> {
    hobi_with(
        x,
        &BssConfig {
            n_lags,
            ..BssConfig::default()
        },
    )
}

/// [`hobi`] with explicit tuning.
pub fn hobi_with(x: &SignalMatrix, config: &BssConfig) -> Result<DemixingResult> {
    validate_input(x)?;
    let q = x.channels();
    let t = x.len();

    // Standardize channels; ranks are unaffected, Z becomes unit-free.
    let mut scale = Array1::zeros(q);
    let mut standardized = x.samples().clone();
    for (i, mut row) in standardized.rows_mut().into_iter().enumerate() {
        let mean = row.sum() / t as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t as f64;
        if var <= 0.0 {
            return Err(ModalError::ZeroVariance);
        }
        let inv = 1.0 / var.sqrt();
        scale[i] = inv;
        row.mapv_inplace(|v| v * inv);
    }
    let xs = SignalMatrix::new(standardized, x.fs(), x.t0())?;

    let d0 = dependency_matrix(&xs, 0)?;
    let spec = eig_sym(&d0.symmetrized())?;
    let whitener = whiten(&spec, spec.relative_floor(config.eps_rel))?;
    let z = whitener.matrix().dot(xs.samples());

    let n_star = config.n_lags.unwrap_or_else(|| default_lag_count(t));
    let lags: Vec<usize> = (1..=n_star).collect();

    let (jad_result, used_lags) = if whitener.rank() == 1 {
        // Single retained component: nothing to rotate.
        (jad(&[Array2::eye(1)], config.jad_tol, config.jad_max_sweeps)?, Vec::new())
    } else {
        let zsig = SignalMatrix::new(z.clone(), x.fs(), x.t0())?;
        let mut bank = Vec::with_capacity(lags.len());
        for &tau in &lags {
            bank.push(dependency_matrix(&zsig, tau)?.symmetrized());
        }
        (jad(&bank, config.jad_tol, config.jad_max_sweeps)?, lags)
    };

    compose(
        x.samples(),
        x.fs(),
        x.t0(),
        whitener,
        jad_result,
        Some(&scale),
        used_lags,
    )
}

/// Second-order blind identification baseline: covariance whitening plus
/// JAD over lagged covariance matrices.
///
/// Channels are mean-centered before the covariances and before `Y = W X`,
/// so recovered sources are zero-mean.
pub fn sobi(x: &SignalMatrix, n_lags: Option<usize>) -> Result<DemixingResult> {
    sobi_with(
        x,
        &BssConfig {
            n_lags,
            ..BssConfig::default()
        },
    )
}

/// [`sobi`] with explicit tuning.
pub fn sobi_with(x: &SignalMatrix, config: &BssConfig) -> Result<DemixingResult> {
    validate_input(x)?;
    let t = x.len();

    let mut centered = x.samples().clone();
    for mut row in centered.rows_mut() {
        let mean = row.sum() / t as f64;
        row.mapv_inplace(|v| v - mean);
    }

    let c0 = centered.dot(&centered.t()) / t as f64;
    let spec = eig_sym(&c0)?;
    let whitener = whiten(&spec, spec.relative_floor(config.eps_rel))?;
    let z = whitener.matrix().dot(&centered);
    let r = whitener.rank();

    let n_star = config.n_lags.unwrap_or_else(|| default_lag_count(t));
    if t < n_star + crate::copula_stat::MIN_SAMPLES {
        return Err(ModalError::LagTooLarge {
            lag: n_star,
            remaining: t.saturating_sub(n_star),
        });
    }
    let lags: Vec<usize> = (1..=n_star).collect();

    let (jad_result, used_lags) = if r == 1 {
        (jad(&[Array2::eye(1)], config.jad_tol, config.jad_max_sweeps)?, Vec::new())
    } else {
        let mut bank = Vec::with_capacity(lags.len());
        for &tau in &lags {
            let mut c = Array2::zeros((r, r));
            let span = t - tau;
            for i in 0..r {
                for j in 0..r {
                    let mut acc = 0.0;
                    for k in 0..span {
                        acc += z[[i, k + tau]] * z[[j, k]];
                    }
                    c[[i, j]] = acc / span as f64;
                }
            }
            bank.push((&c + &c.t()) * 0.5);
        }
        (jad(&bank, config.jad_tol, config.jad_max_sweeps)?, lags)
    };

    compose(
        &centered,
        x.fs(),
        x.t0(),
        whitener,
        jad_result,
        None,
        used_lags,
    )
}

/// Hilbert fits for every recovered channel; failures become null
/// estimates with the reason attached instead of being dropped.
///
/// Each row is normalized to unit sample variance first, which removes the
/// scale indeterminacy of blind separation from the diagnostics.
pub fn modal_estimates(res: &DemixingResult, trim_frac: f64) -> Vec<ChannelEstimate> {
    let y = res.sources();
    let fs = y.fs();
    (0..y.channels())
        .map(|i| {
            let row = y.channel(i).to_vec();
            let t = row.len() as f64;
            let mean = row.iter().sum::<f64>() / t;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / t;
            if var <= 0.0 {
                return ChannelEstimate {
                    channel: i,
                    estimate: None,
                    failure: Some(ModalError::NoOscillation.to_string()),
                };
            }
            let inv = 1.0 / var.sqrt();
            let normalized: Vec<f64> = row.iter().map(|v| (v - mean) * inv).collect();
            match mode_parameters(&normalized, fs, trim_frac) {
                Ok(est) => ChannelEstimate {
                    channel: i,
                    estimate: Some(est),
                    failure: None,
                },
                Err(e) => ChannelEstimate {
                    channel: i,
                    estimate: None,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Convenience composition with the default trim.
pub fn modal_estimates_default(res: &DemixingResult) -> Vec<ChannelEstimate> {
    modal_estimates(res, DEFAULT_TRIM)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for k in 0..a.len() {
        let xa = a[k] - ma;
        let xb = b[k] - mb;
        num += xa * xb;
        da += xa * xa;
        db += xb * xb;
    }
    if da <= 0.0 || db <= 0.0 {
        return 0.0;
    }
    num / (da * db).sqrt()
}

/// Resolve the permutation/sign indeterminacy between recovered rows and a
/// reference set by greedy maximum-|correlation| assignment.
pub fn align_sources(recovered: &Array2<f64>, reference: &Array2<f64>) -> Result<Alignment> {
    if recovered.nrows() != reference.nrows() || recovered.ncols() != reference.ncols() {
        return Err(ModalError::ShapeMismatch(format!(
            "recovered {}x{} vs reference {}x{}",
            recovered.nrows(),
            recovered.ncols(),
            reference.nrows(),
            reference.ncols()
        )));
    }
    let r = recovered.nrows();
    let mut corr = vec![vec![0.0_f64; r]; r];
    for i in 0..r {
        let a = reference.row(i).to_vec();
        for j in 0..r {
            let b = recovered.row(j).to_vec();
            corr[i][j] = pearson(&a, &b);
        }
    }
    let mut used_ref = vec![false; r];
    let mut used_rec = vec![false; r];
    let mut pairs = Vec::with_capacity(r);
    for _ in 0..r {
        let mut best = (0usize, 0usize, -1.0_f64);
        for i in 0..r {
            if used_ref[i] {
                continue;
            }
            for j in 0..r {
                if used_rec[j] {
                    continue;
                }
                if corr[i][j].abs() > best.2 {
                    best = (i, j, corr[i][j].abs());
                }
            }
        }
        used_ref[best.0] = true;
        used_rec[best.1] = true;
        pairs.push(AlignedPair {
            reference: best.0,
            recovered: best.1,
            correlation: best.2,
            sign: if corr[best.0][best.1] < 0.0 { -1.0 } else { 1.0 },
        });
    }
    pairs.sort_by_key(|p| p.reference);
    Ok(Alignment { pairs })
}
