//! Copula statistic (CoS): a [0,1] rank-based dependence index.
//!
//! The statistic walks the empirical copula along the u-sorted sample,
//! splits it into monotone domains, and scores each domain by how close
//! the copula sits to the Fréchet-Hoeffding bounds relative to the
//! independence copula. Comonotone and countermonotone samples score
//! exactly 1, independent samples score near 0, and for Gaussian-copula
//! data the value approaches |rho| at large sample sizes.
//!
//! Conventions pinned here:
//! - Ranks break ties by original sample index, so pseudo-observations are
//!   always a permutation of {1/n, ..., n/n}.
//! - Adjacent monotone domains share their boundary point; the point counts
//!   therefore satisfy `sum(n_i) = n + m - 1`, which is the aggregation
//!   denominator.
//! - Where a Fréchet bound meets the independence copula (u or v equal to 1)
//!   the bound ratio is taken as 1.
//! - The local-optimum test is evaluated only at shared domain boundaries;
//!   at the ends of the sample there are not three centered values, so the
//!   test is skipped there.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{ModalError, Result};
use crate::signal::SignalMatrix;

/// Minimum sample count for the statistic itself.
pub const MIN_SAMPLES: usize = 10;

/// Rank-transformed sample pair: `u[j] = rank(x[j]) / n`, ties by index.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObservations {
    u: Vec<f64>,
    v: Vec<f64>,
    n: usize,
}

impl PseudoObservations {
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// One monotone domain of the empirical-copula sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosDomain {
    /// First u value covered by the domain.
    pub u_start: f64,
    /// Last u value covered by the domain.
    pub u_end: f64,
    /// Smallest empirical-copula value in the domain.
    pub c_min: f64,
    /// Largest empirical-copula value in the domain.
    pub c_max: f64,
    /// Fréchet-bound ratio at the minimum.
    pub lambda_min: f64,
    /// Fréchet-bound ratio at the maximum.
    pub lambda_max: f64,
    /// Domain score in [0,1].
    pub gamma: f64,
    /// Number of sample points in the domain (shared boundaries count in both).
    pub n_points: usize,
}

/// Full decomposition backing one CoS evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosBreakdown {
    /// Sample count.
    pub n: usize,
    /// Monotone domains in u order.
    pub domains: Vec<CosDomain>,
    /// The aggregated statistic, `sum(n_i * gamma_i) / (n + m - 1)`.
    pub cos_value: f64,
}

impl CosBreakdown {
    /// Number of domains.
    pub fn m(&self) -> usize {
        self.domains.len()
    }

    /// Recompute the aggregate from the stored domains.
    pub fn recompute(&self) -> f64 {
        let weighted: f64 = self
            .domains
            .iter()
            .map(|d| d.n_points as f64 * d.gamma)
            .sum();
        weighted / (self.n + self.m() - 1) as f64
    }
}

/// Pairwise CoS matrix of a channel bank, optionally lagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyMatrix {
    entries: Array2<f64>,
    lag: usize,
}

impl DependencyMatrix {
    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    /// `(D + D^T) / 2`, the form consumed by eigendecomposition and JAD.
    pub fn symmetrized(&self) -> Array2<f64> {
        let t = self.entries.t();
        (&self.entries + &t) * 0.5
    }
}

/// Ranks 1..=n with ties broken by original index.
fn ranks(x: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut r = vec![0usize; x.len()];
    for (pos, &i) in idx.iter().enumerate() {
        r[i] = pos + 1;
    }
    r
}

fn validate_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(ModalError::ShapeMismatch(format!(
            "sample vectors differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    for (i, &v) in x.iter().chain(y.iter()).enumerate() {
        if !v.is_finite() {
            return Err(ModalError::InvalidSample { index: i % x.len() });
        }
    }
    Ok(())
}

fn is_constant(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] == w[1])
}

/// Normalized ranks of a sample pair.
///
/// The statistic itself needs [`MIN_SAMPLES`] points; the rank transform is
/// well defined from one point up and is exposed as such.
pub fn pseudo_observations(x: &[f64], y: &[f64]) -> Result<PseudoObservations> {
    if x.is_empty() {
        return Err(ModalError::InsufficientSamples { needed: 1, got: 0 });
    }
    validate_pair(x, y)?;
    let n = x.len();
    let nf = n as f64;
    let u = ranks(x).into_iter().map(|r| r as f64 / nf).collect();
    let v = ranks(y).into_iter().map(|r| r as f64 / nf).collect();
    Ok(PseudoObservations { u, v, n })
}

/// Empirical copula `C_n(u, v) = #{j : u_j <= u and v_j <= v} / n`.
pub fn empirical_copula(p: &PseudoObservations, u: f64, v: f64) -> f64 {
    let count = p
        .u
        .iter()
        .zip(&p.v)
        .filter(|(&uj, &vj)| uj <= u && vj <= v)
        .count();
    count as f64 / p.n as f64
}

/// Fenwick tree counting inserted v-ranks.
struct RankCounter {
    tree: Vec<u32>,
}

impl RankCounter {
    fn new(n: usize) -> Self {
        Self {
            tree: vec![0; n + 1],
        }
    }

    fn insert(&mut self, mut rank: usize) {
        while rank < self.tree.len() {
            self.tree[rank] += 1;
            rank += rank & rank.wrapping_neg();
        }
    }

    fn count_le(&self, mut rank: usize) -> u32 {
        let mut s = 0;
        while rank > 0 {
            s += self.tree[rank];
            rank -= rank & rank.wrapping_neg();
        }
        s
    }
}

/// Bound ratio of Step 5: distance from independence relative to the
/// Fréchet bound on the same side. `c`, `u`, `v` are exact multiples of 1/n.
fn lambda(c: f64, u: f64, v: f64) -> f64 {
    let uv = u * v;
    if c >= uv {
        let denom = u.min(v) - uv;
        if denom <= 0.0 {
            // Upper bound and independence coincide (u = 1 or v = 1).
            1.0
        } else {
            ((c - uv) / denom).clamp(0.0, 1.0)
        }
    } else {
        let denom = (u + v - 1.0).max(0.0) - uv;
        if denom >= 0.0 {
            1.0
        } else {
            ((c - uv) / denom).clamp(0.0, 1.0)
        }
    }
}

/// CoS core on precomputed ranks. `ru`, `rv` are 1..=n, each a permutation.
fn cos_from_ranks(ru: &[usize], rv: &[usize]) -> CosBreakdown {
    let n = ru.len();
    let nf = n as f64;

    // Sample index at each u-sorted position.
    let mut order = vec![0usize; n];
    for (j, &r) in ru.iter().enumerate() {
        order[r - 1] = j;
    }

    // Empirical copula counts c[k] = n * C_n(u_(k+1), v_[k+1]) along the sweep.
    let mut counter = RankCounter::new(n);
    let mut counts = vec![0u32; n];
    for k in 0..n {
        let vr = rv[order[k]];
        counter.insert(vr);
        counts[k] = counter.count_le(vr);
    }

    // Monotone domains; a plateau extends the current one, and a direction
    // flip cuts at the previous point, which both domains share.
    let mut starts = vec![0usize];
    let mut dir = 0i8;
    for k in 1..n {
        let step = match counts[k].cmp(&counts[k - 1]) {
            std::cmp::Ordering::Greater => 1i8,
            std::cmp::Ordering::Less => -1i8,
            std::cmp::Ordering::Equal => 0i8,
        };
        if step == 0 {
            continue;
        }
        if dir == 0 {
            dir = step;
        } else if step != dir {
            starts.push(k - 1);
            dir = step;
        }
    }
    let m = starts.len();

    // Shared-boundary lookup: boundary index -> (left domain, right domain).
    let boundary_of = |k: usize| -> Option<usize> { starts[1..].iter().position(|&b| b == k) };

    let domain_range = |i: usize| -> (usize, usize) {
        let s = starts[i];
        let e = if i + 1 < m { starts[i + 1] } else { n - 1 };
        (s, e)
    };

    // Step 7: the shared point between domains i and i+1 is a local optimum
    // of the underlying relation when both neighboring copula steps are at
    // most 1/n and the two domains together hold more than four points.
    let local_optimum = |k: usize| -> bool {
        let Some(b) = boundary_of(k) else {
            return false;
        };
        if k == 0 || k + 1 >= n {
            return false;
        }
        let dl = counts[k].abs_diff(counts[k - 1]);
        let dr = counts[k + 1].abs_diff(counts[k]);
        if dl > 1 || dr > 1 {
            return false;
        }
        let (ls, le) = domain_range(b);
        let (rs, re) = domain_range(b + 1);
        (le - ls + 1) + (re - rs + 1) > 4
    };

    let mut domains = Vec::with_capacity(m);
    let mut weighted = 0.0;
    for i in 0..m {
        let (s, e) = domain_range(i);
        let mut kmin = s;
        let mut kmax = s;
        for k in s + 1..=e {
            if counts[k] < counts[kmin] {
                kmin = k;
            }
            if counts[k] > counts[kmax] {
                kmax = k;
            }
        }
        let at = |k: usize| -> (f64, f64, f64) {
            (
                counts[k] as f64 / nf,
                (k + 1) as f64 / nf,
                rv[order[k]] as f64 / nf,
            )
        };
        let (c_min, u_min, v_min) = at(kmin);
        let (c_max, u_max, v_max) = at(kmax);
        let lambda_min = lambda(c_min, u_min, v_min);
        let lambda_max = lambda(c_max, u_max, v_max);

        let gamma = if lambda_min == 1.0 && lambda_max == 1.0 {
            1.0
        } else if local_optimum(kmin) || local_optimum(kmax) {
            1.0
        } else {
            0.5 * (lambda_min + lambda_max)
        };

        let n_points = e - s + 1;
        weighted += n_points as f64 * gamma;
        domains.push(CosDomain {
            u_start: (s + 1) as f64 / nf,
            u_end: (e + 1) as f64 / nf,
            c_min,
            c_max,
            lambda_min,
            lambda_max,
            gamma,
            n_points,
        });
    }

    let cos_value = weighted / (n + m - 1) as f64;
    CosBreakdown {
        n,
        domains,
        cos_value,
    }
}

/// The copula statistic between two samples.
pub fn cos(x: &[f64], y: &[f64]) -> Result<CosBreakdown> {
    validate_pair(x, y)?;
    if x.len() < MIN_SAMPLES {
        return Err(ModalError::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: x.len(),
        });
    }
    if is_constant(x) || is_constant(y) {
        return Err(ModalError::ZeroVariance);
    }
    Ok(cos_from_ranks(&ranks(x), &ranks(y)))
}

/// Pairwise (lagged) CoS matrix of a channel bank.
///
/// At lag 0 the entry (i, j) is `CoS(x_i, x_j)` with the diagonal pinned to 1.
/// At lag `tau > 0` the entry is `CoS(x_i[tau..], x_j[..T-tau])`, pairing each
/// sample of channel i with the sample of channel j measured `tau` steps
/// earlier; the diagonal then carries lagged self-dependence.
pub fn dependency_matrix(x: &SignalMatrix, lag: usize) -> Result<DependencyMatrix> {
    let q = x.channels();
    let t = x.len();
    if q < 2 {
        return Err(ModalError::NeedTwoChannels);
    }
    if t < lag + MIN_SAMPLES {
        return Err(ModalError::LagTooLarge {
            lag,
            remaining: t.saturating_sub(lag),
        });
    }

    // Rank each channel once per slice role.
    let rows: Vec<Vec<f64>> = (0..q).map(|i| x.channel(i).to_vec()).collect();
    for (i, row) in rows.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(ModalError::InvalidSample { index: i * t + k });
            }
        }
        if is_constant(row) {
            return Err(ModalError::ZeroVariance);
        }
    }
    let lead_ranks: Vec<Vec<usize>> = rows.iter().map(|r| ranks(&r[lag..])).collect();
    let trail_ranks: Vec<Vec<usize>> = if lag == 0 {
        Vec::new()
    } else {
        rows.iter().map(|r| ranks(&r[..t - lag])).collect()
    };

    let mut entries = Array2::zeros((q, q));
    for i in 0..q {
        for j in 0..q {
            entries[[i, j]] = if lag == 0 {
                if i == j {
                    1.0
                } else {
                    cos_from_ranks(&lead_ranks[i], &lead_ranks[j]).cos_value
                }
            } else {
                cos_from_ranks(&lead_ranks[i], &trail_ranks[j]).cos_value
            };
        }
    }
    Ok(DependencyMatrix { entries, lag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_copula, CopulaFamily};
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn pseudo_observations_rank_arithmetic() {
        let p = pseudo_observations(&[3.0, 1.0, 2.0], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.u(), &[1.0, 1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn pseudo_observations_sorted_input() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let p = pseudo_observations(&x, &x).unwrap();
        assert_eq!(p.u(), &[0.2, 0.4, 0.6, 0.8, 1.0]);
    }

    #[test]
    fn pseudo_observations_tie_break_by_index() {
        let p = pseudo_observations(&[1.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(p.u(), &[1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn pseudo_observations_rejects_non_finite() {
        let err = pseudo_observations(&[1.0, f64::NAN], &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, ModalError::InvalidSample { .. }));
    }

    #[test]
    fn empirical_copula_corners() {
        let x: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let p = pseudo_observations(&x, &x).unwrap();
        assert_eq!(empirical_copula(&p, 1.0, 1.0), 1.0);
        assert_eq!(empirical_copula(&p, 0.0, 0.0), 0.0);
    }

    #[test]
    fn empirical_copula_comonotone_midpoint() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let p = pseudo_observations(&x, &x).unwrap();
        assert_eq!(empirical_copula(&p, 0.5, 0.5), 0.5);
    }

    #[test]
    fn cos_is_one_for_comonotone() {
        let x: Vec<f64> = (0..100).map(|k| (k as f64 * 0.37).sin() + k as f64).collect();
        let b = cos(&x, &x).unwrap();
        assert_eq!(b.cos_value, 1.0);
        assert_eq!(b.m(), 1);
    }

    #[test]
    fn cos_is_one_for_countermonotone() {
        let x: Vec<f64> = (0..100).map(|k| k as f64 * 0.01).collect();
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        let b = cos(&x, &y).unwrap();
        assert_eq!(b.cos_value, 1.0);
    }

    #[test]
    fn cos_monotone_transform_leaves_value_unchanged() {
        let mut rng = StdRng::seed_from_u64(7);
        let x: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let base = cos(&x, &y).unwrap();
        let fx: Vec<f64> = x.iter().map(|v| (3.0 * v).exp()).collect();
        let gy: Vec<f64> = y.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        let mapped = cos(&fx, &gy).unwrap();
        assert_eq!(base.cos_value.to_bits(), mapped.cos_value.to_bits());
    }

    #[test]
    fn cos_gaussian_copula_tracks_rho() {
        let pairs = sample_copula(&CopulaFamily::gaussian(0.8).unwrap(), 5000, 11).unwrap();
        let (u, v): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let b = cos(&u, &v).unwrap();
        assert_abs_diff_eq!(b.cos_value, 0.8, epsilon = 0.1);
    }

    #[test]
    fn cos_rejects_degenerate_input() {
        let x = vec![1.0; 20];
        let y: Vec<f64> = (0..20).map(|k| k as f64).collect();
        assert_eq!(cos(&x, &y).unwrap_err(), ModalError::ZeroVariance);
    }

    #[test]
    fn cos_rejects_short_input() {
        let x = [1.0, 2.0, 3.0];
        assert!(matches!(
            cos(&x, &x).unwrap_err(),
            ModalError::InsufficientSamples { .. }
        ));
    }

    #[test]
    fn dependency_matrix_identical_rows() {
        let row: Vec<f64> = (0..50).map(|k| (k as f64 * 0.3).sin()).collect();
        let mut data = Array2::zeros((2, 50));
        for k in 0..50 {
            data[[0, k]] = row[k];
            data[[1, k]] = row[k];
        }
        let x = SignalMatrix::new(data, 10.0, 0.0).unwrap();
        let d = dependency_matrix(&x, 0).unwrap();
        for &e in d.entries().iter() {
            assert_eq!(e, 1.0);
        }
    }

    #[test]
    fn dependency_matrix_rejects_excessive_lag() {
        let x = SignalMatrix::new(Array2::from_elem((2, 30), 0.0), 10.0, 0.0).unwrap();
        assert!(matches!(
            dependency_matrix(&x, 25).unwrap_err(),
            ModalError::LagTooLarge { .. }
        ));
    }

    #[test]
    fn symmetrized_matches_transpose_average() {
        let mut rng = StdRng::seed_from_u64(3);
        let mut data = Array2::zeros((3, 60));
        for v in data.iter_mut() {
            *v = rng.random::<f64>();
        }
        let x = SignalMatrix::new(data, 10.0, 0.0).unwrap();
        let d = dependency_matrix(&x, 2).unwrap();
        let s = d.symmetrized();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(s[[i, j]], s[[j, i]]);
                assert_abs_diff_eq!(
                    s[[i, j]],
                    0.5 * (d.entries()[[i, j]] + d.entries()[[j, i]]),
                    epsilon = 0.0
                );
            }
        }
    }

    proptest! {
        #[test]
        fn cos_value_in_unit_interval(seed in 0u64..500) {
            let mut rng = StdRng::seed_from_u64(seed);
            let n = 10 + (seed as usize % 90);
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let b = cos(&x, &y).unwrap();
            prop_assert!((0.0..=1.0).contains(&b.cos_value));
            for d in &b.domains {
                prop_assert!((0.0..=1.0).contains(&d.gamma));
            }
        }

        #[test]
        fn aggregation_identity_holds(seed in 0u64..200) {
            let mut rng = StdRng::seed_from_u64(seed);
            let n = 12 + (seed as usize % 60);
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let b = cos(&x, &y).unwrap();
            let total: usize = b.domains.iter().map(|d| d.n_points).sum();
            prop_assert_eq!(total, b.n + b.m() - 1);
            prop_assert!((b.recompute() - b.cos_value).abs() < 1e-15);
        }
    }
}
