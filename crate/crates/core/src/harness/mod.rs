//! Experiment harness: run configuration, the simulation driver, and the
//! study drivers (convergence ladders, coarsening runs, history-mode
//! performance comparison) used by the command-line front end.

pub mod coarsening;
pub mod config;
pub mod convergence;
pub mod manufactured;
pub mod output;
pub mod perf;
pub mod run;
