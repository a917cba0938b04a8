//! Oscillation-mode identification from ringdown measurements using
//! copula-statistic blind source separation.
//!
//! The crate provides, bottom to top:
//!
//! * [`copula_stat`] — the copula statistic (CoS), a [0,1] rank-based
//!   dependence index, and (lagged) pairwise dependency matrices.
//! * [`sampling`] — Frank/Clayton/Gumbel/Gaussian copula samplers and
//!   synthetic ringdown generators for benchmarks.
//! * [`linalg`] — symmetric Jacobi eigendecomposition, rank-truncating
//!   whitening, and joint approximate diagonalization (JAD).
//! * [`hilbert`] — analytic-signal construction and per-channel
//!   frequency/damping fits.
//! * [`bss`] — the HOBI separation pipeline, the SOBI baseline, and
//!   permutation/sign-resolving alignment for validation.
//! * [`order`] — Takens delay embedding and HOBMI model-order scans.
//!
//! All randomness is confined to the samplers and seeded explicitly, so
//! every pipeline is deterministic given its inputs.

pub mod bss;
pub mod copula_stat;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod order;
pub mod sampling;
pub mod signal;

pub use bss::{align_sources, hobi, modal_estimates, sobi, DemixingResult};
pub use copula_stat::{cos, dependency_matrix, CosBreakdown, DependencyMatrix};
pub use error::{ModalError, Result};
pub use hilbert::{analytic_signal, mode_parameters, AnalyticSeries, ModeEstimate};
pub use linalg::{eig_sym, jad, off_diag_norm, whiten};
pub use order::{hobmi, pair_modes, select_window, takens_embed, DetectedModes, OrderScan};
pub use sampling::{sample_copula, synth_modal, synth_numerical_model, CopulaFamily, ModeSpec};
pub use signal::SignalMatrix;
