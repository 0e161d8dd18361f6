//! Formation control of multiple groups of differential-drive robots.
//!
//! The team's stacked positions are mapped by a centroid based
//! transformation into intra-group shape vectors, inter-group shape vectors
//! and the overall centroid. Each subsystem is driven onto its own sliding
//! surface; the reaching gains are scaled so the intra-group shape settles
//! first, the arrangement of the groups next, and centroid tracking last.
//! An optional pairwise repulsion keeps robots apart while they maneuver.
//!
//! ```
//! use formctl_core::{config, sim, analysis};
//!
//! let mut cfg = config::preset_paper_scenario();
//! cfg.integrator.duration = 0.5;
//! let result = sim::run_scenario(&cfg).unwrap();
//! let report = analysis::detect_convergence(&result, &cfg.convergence);
//! assert!(report.reach_time.intra.is_some());
//! ```

pub mod analysis;
pub mod audit;
pub mod cbt;
pub mod collision;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod output;
pub mod reference;
pub mod sim;
pub mod smc;

pub use error::{Error, Result};
