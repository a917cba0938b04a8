//! Symmetric eigendecomposition, whitening, and joint approximate
//! diagonalization (JAD).
//!
//! Everything here is plain cyclic Jacobi: one-matrix Jacobi for the
//! eigendecomposition, Jacobi rotations with the jointly optimal angle for
//! JAD. Rotations are applied in a fixed (p, q) order and eigenvectors carry
//! a deterministic sign convention, so results are bit-reproducible.

use ndarray::Array2;

use crate::error::{ModalError, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct SymmetricSpectrum {
    vectors: Array2<f64>,
    values: Vec<f64>,
}

impl SymmetricSpectrum {
    /// Orthonormal eigenvectors as columns, ordered like [`values`](Self::values).
    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    /// Eigenvalues in descending order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Relative eigenvalue floor `rel * |lambda_max|`.
    pub fn relative_floor(&self, rel: f64) -> f64 {
        rel * self.values.first().map(|v| v.abs()).unwrap_or(0.0)
    }
}

/// Rank-truncating whitening transform `W = Lambda_r^{-1/2} P_r^T`.
#[derive(Debug, Clone)]
pub struct Whitener {
    matrix: Array2<f64>,
    rank: usize,
    floor: f64,
}

impl Whitener {
    /// The `r x q` whitening matrix.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// Retained rank `r`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Eigenvalue floor used for truncation.
    pub fn floor(&self) -> f64 {
        self.floor
    }
}

/// Orthogonal rotation found by JAD plus its convergence trace.
#[derive(Debug, Clone)]
pub struct JadResult {
    rotation: Array2<f64>,
    off_diag_history: Vec<f64>,
    sweeps: usize,
}

impl JadResult {
    /// The accumulated orthogonal rotation `psi`.
    pub fn rotation(&self) -> &Array2<f64> {
        &self.rotation
    }

    /// Summed squared off-diagonal criterion, one entry before the first
    /// sweep and one after each sweep. Non-increasing.
    pub fn off_diag_history(&self) -> &[f64] {
        &self.off_diag_history
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }
}

/// Default JAD rotation-angle tolerance in radians.
pub const JAD_TOL: f64 = 1e-8;
/// Default JAD sweep budget.
pub const JAD_MAX_SWEEPS: usize = 100;
/// Default relative eigenvalue floor for whitening.
pub const WHITEN_REL_FLOOR: f64 = 1e-9;

fn check_finite(m: &Array2<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(ModalError::InvalidMatrix);
    }
    Ok(())
}

/// Frobenius norm of a matrix with its diagonal zeroed.
pub fn off_diag_norm(m: &Array2<f64>) -> f64 {
    let mut acc = 0.0;
    for ((i, j), &v) in m.indexed_iter() {
        if i != j {
            acc += v * v;
        }
    }
    acc.sqrt()
}

fn off_diag_sq(m: &Array2<f64>) -> f64 {
    let v = off_diag_norm(m);
    v * v
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// The input is symmetrized as `(D + D^T)/2` before factoring. Eigenpairs
/// come back sorted by descending eigenvalue, and each eigenvector is
/// oriented so its largest-magnitude component is positive.
pub fn eig_sym(d: &Array2<f64>) -> Result<SymmetricSpectrum> {
    check_finite(d)?;
    let n = d.nrows();
    if n != d.ncols() {
        return Err(ModalError::ShapeMismatch(format!(
            "expected square matrix, got {}x{}",
            n,
            d.ncols()
        )));
    }

    let mut a = (d + &d.t()) * 0.5;
    let mut v: Array2<f64> = Array2::eye(n);
    let scale = a.iter().fold(0.0_f64, |m, &x| m.max(x.abs())).max(1.0);

    for _sweep in 0..100 {
        let off = off_diag_norm(&a);
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));

    let mut vectors = Array2::zeros((n, n));
    let mut values = Vec::with_capacity(n);
    for (col, &idx) in order.iter().enumerate() {
        values.push(a[[idx, idx]]);
        // Sign convention: largest-magnitude component positive.
        let mut kmax = 0;
        for k in 1..n {
            if v[[k, idx]].abs() > v[[kmax, idx]].abs() {
                kmax = k;
            }
        }
        let flip = if v[[kmax, idx]] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            vectors[[k, col]] = flip * v[[k, idx]];
        }
    }
    Ok(SymmetricSpectrum { vectors, values })
}

/// Whitening transform from a spectrum, dropping eigenvalues at or below
/// `floor`.
pub fn whiten(spec: &SymmetricSpectrum, floor: f64) -> Result<Whitener> {
    let kept: Vec<usize> = (0..spec.values.len())
        .filter(|&i| spec.values[i] > floor)
        .collect();
    if kept.is_empty() {
        return Err(ModalError::DegenerateDependency { floor });
    }
    let q = spec.vectors.nrows();
    let r = kept.len();
    let mut w = Array2::zeros((r, q));
    for (row, &i) in kept.iter().enumerate() {
        let inv_sqrt = 1.0 / spec.values[i].sqrt();
        for k in 0..q {
            w[[row, k]] = inv_sqrt * spec.vectors[[k, i]];
        }
    }
    Ok(Whitener {
        matrix: w,
        rank: r,
        floor,
    })
}

/// Jointly diagonalize a set of symmetric matrices with one orthogonal
/// rotation.
///
/// Each Givens angle minimizes the summed squared off-diagonal criterion
/// over the whole set for its plane, so the criterion never increases.
/// Sweeps stop when the largest rotation angle falls below `tol` radians.
pub fn jad(ms: &[Array2<f64>], tol: f64, max_sweeps: usize) -> Result<JadResult> {
    let Some(first) = ms.first() else {
        return Err(ModalError::RaggedMatrixSet {
            expected: 0,
            got_rows: 0,
            got_cols: 0,
        });
    };
    let r = first.nrows();
    for m in ms {
        if m.nrows() != r || m.ncols() != r {
            return Err(ModalError::RaggedMatrixSet {
                expected: r,
                got_rows: m.nrows(),
                got_cols: m.ncols(),
            });
        }
        check_finite(m)?;
    }

    let mut set: Vec<Array2<f64>> = ms.iter().map(|m| (m + &m.t()) * 0.5).collect();
    let mut psi: Array2<f64> = Array2::eye(r);
    let mut history = vec![set.iter().map(off_diag_sq).sum::<f64>()];
    let mut sweeps = 0;

    if r > 1 {
        for _ in 0..max_sweeps {
            sweeps += 1;
            let mut max_angle = 0.0_f64;
            for p in 0..r - 1 {
                for q in p + 1..r {
                    // Jointly optimal Givens angle for this plane.
                    let mut ton = 0.0;
                    let mut toff = 0.0;
                    for m in &set {
                        let h = m[[p, p]] - m[[q, q]];
                        let g = m[[p, q]] + m[[q, p]];
                        ton += h * h - g * g;
                        toff += 2.0 * h * g;
                    }
                    let theta = 0.5 * toff.atan2(ton + (ton * ton + toff * toff).sqrt());
                    max_angle = max_angle.max(theta.abs());
                    if theta.abs() < 1e-300 {
                        continue;
                    }
                    let c = theta.cos();
                    let s = theta.sin();
                    for m in set.iter_mut() {
                        for k in 0..r {
                            let mkp = m[[k, p]];
                            let mkq = m[[k, q]];
                            m[[k, p]] = c * mkp + s * mkq;
                            m[[k, q]] = c * mkq - s * mkp;
                        }
                        for k in 0..r {
                            let mpk = m[[p, k]];
                            let mqk = m[[q, k]];
                            m[[p, k]] = c * mpk + s * mqk;
                            m[[q, k]] = c * mqk - s * mpk;
                        }
                    }
                    for k in 0..r {
                        let vkp = psi[[k, p]];
                        let vkq = psi[[k, q]];
                        psi[[k, p]] = c * vkp + s * vkq;
                        psi[[k, q]] = c * vkq - s * vkp;
                    }
                }
            }
            history.push(set.iter().map(off_diag_sq).sum::<f64>());
            if max_angle < tol {
                break;
            }
        }
    }

    Ok(JadResult {
        rotation: psi,
        off_diag_history: history,
        sweeps,
    })
}
