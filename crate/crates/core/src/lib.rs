//! Exact simulation and numerical verification of a one-dimensional resetting
//! PDMP in its singular spiking limit.
//!
//! The process flows deterministically on `[0, 1)` under `eps * dx/dt =
//! eps*f(x) + x*h(x)` and resets to `0` with state-dependent hazard
//! `h(x)/eps`. As `eps -> 0` the reset points ("pre-spikes") converge to a
//! decorated Poisson point process with spatial intensity proportional to
//! `dx / x^2`, thinned by a two-state background chain.
//!
//! The crate provides:
//!
//! - [`model`]: the coefficient pair `(f, h)` with built-in families,
//! - [`flow`]: the cumulative integrals `U`, `V`, their inverses, hitting
//!   times and asymptotic expansions,
//! - [`transforms`]: the Laplace-domain quantities `C`, `D`, `E` and the
//!   generating function `Z` with its analytic limit,
//! - [`sampler`]: exact hazard-inversion simulation of the process,
//! - [`limit`]: samplers for the limiting jump chain and decorated Poisson
//!   point process,
//! - [`stats`]: goodness-of-fit and convergence test machinery,
//! - [`suites`]: named verification suites shared by the CLI and the
//!   acceptance tests.
//!
//! Monte Carlo drivers fan replicas out through [`exec`], which uses rayon
//! when the `parallel` feature (default) is enabled and falls back to a
//! sequential loop otherwise. Results are identical either way: every replica
//! owns a counter-based RNG stream keyed by its index and reductions are
//! performed in replica order.

pub mod exec;
pub mod flow;
pub mod io;
pub mod limit;
pub mod model;
pub(crate) mod quad;
pub mod sampler;
pub mod stats;
pub mod suites;
pub mod transforms;

pub use flow::{FlowContext, FlowError, FlowParams};
pub use model::{Model, ModelError, ValidationReport};
pub use sampler::{PointPattern, RngStream};
pub use stats::TestReport;
