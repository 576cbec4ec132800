//! Exact and simulated bit-error rates for downlink power-domain NOMA with
//! imperfect successive interference cancellation over Nakagami-m fading,
//! together with the fairness and minimum-average-BER power-allocation
//! solvers built on top of the analytic BER surface.
//!
//! The crate is organized around the processing chain:
//!
//! - [`special_math`]: Q function, incomplete gamma, series expansion,
//!   Gauss-Legendre quadrature.
//! - [`model`]: superposed Gray-QPSK signal model, power allocation,
//!   amplitude levels and the per-case SNR catalog.
//! - [`fading`]: Nakagami-m gains, order statistics, ordered densities.
//! - [`detectors`]: per-user maximum-likelihood detection and the SIC chain.
//! - [`exact_cond_ber`]: fixed-gain BER formulas plus an exact enumeration
//!   oracle that works for any user count.
//! - [`avg_ber`]: fading-averaged BER via the series form, Rayleigh closed
//!   forms, and a numeric averaging oracle.
//! - [`montecarlo`]: reproducible sharded symbol-level simulation.
//! - [`optimizer`]: fairness and minimum-average-BER power allocation.
//! - [`validate`]: named consistency checks and the formula audit report.
//!
//! # Example
//!
//! ```
//! use noma_ber::avg_ber::{avg_ber, AvgBerSpec};
//! use noma_ber::exact_cond_ber::enumerate_exact;
//! use noma_ber::model::PowerAllocation;
//!
//! let alloc = PowerAllocation::new(vec![0.7, 0.3])?;
//! // Exact conditional BER at fixed gains (sigma^2 = N0/2 per dimension).
//! let cond = enumerate_exact(&alloc, &[0.5, 1.2], 0.05)?;
//! assert!((cond.per_user[0] - 0.130_047_349_593_311).abs() < 1e-12);
//!
//! // Fading-averaged BER of user 2 at m = 2, Eb/N0 = 10 dB.
//! let spec = AvgBerSpec::new(alloc, 2, 2.0, 1.0, 10.0)?;
//! let avg = avg_ber(&spec)?;
//! assert!(avg.converged && avg.value > 0.0 && avg.value < 0.5);
//! # Ok::<(), noma_ber::Error>(())
//! ```

// Validation sites use `!(x > 0.0)`-style guards so that NaN inputs fail
// them; the suggested `partial_cmp` rewrite loses that property.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod avg_ber;
pub mod detectors;
pub mod error;
pub mod exact_cond_ber;
pub mod fading;
pub mod model;
pub mod montecarlo;
pub mod optimizer;
pub mod special_math;
pub mod validate;

pub use error::{Error, Result};
