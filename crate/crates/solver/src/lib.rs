//! Linear and mixed-integer programming for the RWA models.
//!
//! The reference backend is a dense bounded-variable simplex (primal and
//! dual) wrapped in a best-bound branch-and-bound that accepts lazy cuts
//! from a callback at every node.

mod backend;
mod error;
mod mip;
mod problem;
mod simplex;

#[cfg(feature = "minilp")]
mod minilp_backend;

pub use backend::{Backend, Capabilities, LpSession, ReferenceBackend};
pub use error::SolverError;
pub use mip::{solve_mip, CutCallback, CutRow, MipSolution, MipStatus, NodeContext};
pub use problem::{Column, LinearProgram, ObjectiveSense, Row, Sense};
pub use simplex::{solve_lp, LpSolution, LpStatus};

#[cfg(feature = "minilp")]
pub use minilp_backend::MinilpBackend;

use std::time::Duration;

/// Tolerances and limits shared by the LP and MIP solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Primal feasibility tolerance.
    pub tol_feas: f64,
    /// Integrality tolerance.
    pub tol_int: f64,
    /// Relative optimality tolerance for branch-and-bound termination.
    pub tol_obj: f64,
    pub time_limit: Option<Duration>,
    /// Simplex iteration cap per LP solve.
    pub max_iterations: usize,
    pub node_limit: Option<usize>,
    /// Record (primal, dual bound) pairs at each simplex iteration.
    pub collect_diagnostics: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_feas: 1e-7,
            tol_int: 1e-6,
            tol_obj: 1e-6,
            time_limit: Some(Duration::from_secs(600)),
            max_iterations: 200_000,
            node_limit: None,
            collect_diagnostics: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        for (name, v) in [
            ("tol_feas", self.tol_feas),
            ("tol_int", self.tol_int),
            ("tol_obj", self.tol_obj),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolverError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}
