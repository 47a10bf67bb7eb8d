//! Portfolio optimization for variable renewable generation mixes.
//!
//! The crate builds efficient frontiers for portfolios of wind and solar
//! plants from hourly generation and demand time series. Three model
//! families are covered:
//!
//! * mean-variance portfolios that maximize expected generation under a
//!   standard-deviation cap (`Trad_*` scenarios),
//! * cost-minimizing portfolios that fix mean generation and sweep the
//!   same cap (`Cost_*` scenarios),
//! * CVaR-constrained portfolios in which capacity is sized so that the
//!   lower tail of the generation-minus-demand balance stays above a
//!   target (`CVaR_*` scenarios).
//!
//! Demand can enter the covariance structure as a virtual generator with
//! negated output, which couples portfolio risk to the load profile
//! instead of treating it as flat.
//!
//! The typical pipeline is [`ingest`] -> [`stats`] -> [`models`] ->
//! [`analysis`]; [`solver`] holds the interior-point engine the model
//! layer drives, [`sampling`] produces the stratified subsamples used by
//! the CVaR constraint rows, and [`cli`] wires everything to config files
//! and CSV/JSON outputs.
//!
//! Runnable walkthroughs live under `examples/`, one per capability:
//!
//! ```text
//! cargo run --example efficient_frontier
//! cargo run --example cvar_frontier
//! cargo run --example same_risk_scaling
//! ```

pub mod analysis;
pub mod cli;
pub mod error;
pub mod ingest;
pub mod models;
pub mod sampling;
pub mod solver;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
