//! Statistical simulator for a multicarrier continuous-variable quadrature
//! pipeline. A block of Gaussian single-carrier quadratures is spread onto
//! subcarriers by a unitary transform, sent through parallel noisy
//! sub-channels, recombined, and recovered by an optimal least-squares
//! estimator; the residual error then feeds a spectral secret-key-rate
//! account.
//!
//! The crate is organized bottom-up:
//!
//! - [`config`]: run parameters, validation, and the flat `key = value`
//!   config-file grammar.
//! - [`rng`]: seeded, per-trial-streamed Gaussian sampling with
//!   deterministic draw order.
//! - [`carrier`]: domain-tagged quadrature vectors.
//! - [`spectral`]: unitary transforms, spectral densities, autocorrelation
//!   duality, and decimation.
//! - [`channel`]: sub-channel transmission, measurement models, and gate
//!   transfer profiles.
//! - [`gqi`]: windowed inverse-transform inference over measured blocks.
//! - [`qe`]: covariance assembly, the estimator solve, and error-covariance
//!   diagnostics.
//! - [`keyrate`]: entropy and divergence rates and the key-rate report.
//! - [`sim`]: the end-to-end pipeline, sweeps, probes, and CSV emitters.
//!
//! Every run is reproducible: a fixed seed yields byte-identical CSV output
//! regardless of execution mode or thread count.

pub mod carrier;
pub mod channel;
pub mod config;
pub mod error;
pub mod gqi;
pub mod keyrate;
pub mod qe;
pub mod rng;
pub mod sim;
pub mod spectral;

pub use config::{CovMode, SimConfig, WindowSpec, TRANSMITTANCE_MAX};
pub use error::{Error, Result};
pub use sim::{run_core, run_pipeline, sweep_m, ExecMode, RunOutput, SimReport};
