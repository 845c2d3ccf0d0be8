//! Energy-efficiency optimization for vehicles that split computing tasks
//! between local processing and a full-duplex anchor node which also powers
//! them wirelessly.
//!
//! The crate covers the link and energy model ([`model`], [`eval`],
//! [`constraints`]), a log-barrier solver ([`nlp`]), the alternating block
//! optimizer ([`aiis`]), two reference schemes ([`baselines`]) and a
//! Monte-Carlo sweep harness ([`experiments`]).
//!
//! ```
//! use swipt_mec::aiis::{run_aiis, AiisOptions};
//! use swipt_mec::channel::generate_channels;
//! use swipt_mec::config::SystemConfig;
//!
//! let cfg = SystemConfig::default().with_vehicles(3);
//! let ch = generate_channels(&cfg, 0)?;
//! let run = run_aiis(&cfg, &ch, &AiisOptions::default())?;
//! assert!(run.trace.objective_converged);
//! assert!(run.report.avg_ee >= run.trace.initial_objective);
//! # Ok::<(), swipt_mec::error::Error>(())
//! ```

pub mod aiis;
pub mod baselines;
pub mod channel;
pub mod config;
pub mod constraints;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod model;
pub mod nlp;
pub mod selftest;

pub use error::{Error, Result};

/// Git-describe style version of this build.
pub const VERSION: &str = env!("SWIPT_MEC_VERSION");

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/system-model.md")]
    mod system_model {}
    #[doc = include_str!("../../../book/src/constraints.md")]
    mod constraints {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/aiis.md")]
    mod aiis {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
