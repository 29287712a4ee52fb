//! Routing and wavelength assignment on WDM networks: deterministic and
//! two-stage stochastic models, a Benders branch-and-cut with aggregated
//! link-usage cuts, SAA statistics and rolling-horizon traffic simulation.

pub mod benders;
pub mod model;
pub mod par;
pub mod saa;
pub mod sim;
pub mod topology;
pub mod traffic;

pub use rwa_solver as solver;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("topology: {0}")]
    Topology(String),
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("network state: {0}")]
    State(String),
    #[error("wavelength conflict on arc {arc}, wavelength {wavelength}")]
    WavelengthConflict { arc: usize, wavelength: usize },
    #[error("configuration: {0}")]
    Config(String),
    #[error("model: {0}")]
    Model(String),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Solver(#[from] rwa_solver::SolverError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
