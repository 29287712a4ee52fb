use crate::simplex::Tableau;
use crate::{
    solve_lp, solve_mip, CutCallback, LinearProgram, LpSolution, LpStatus, MipSolution,
    SolverConfig, SolverError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capabilities {
    pub duals: bool,
    pub lazy_cuts: bool,
}

/// A solver that can be plugged under the RWA models.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn capabilities(&self) -> Capabilities;

    fn solve_lp(&self, lp: &LinearProgram, config: &SolverConfig) -> Result<LpSolution, SolverError>;

    fn solve_mip(
        &self,
        lp: &LinearProgram,
        config: &SolverConfig,
        callback: Option<&dyn CutCallback>,
    ) -> Result<MipSolution, SolverError>;

    /// An LP whose right-hand sides change between solves. Backends without
    /// warm starts get a session that re-solves from scratch.
    fn lp_session(
        &self,
        lp: &LinearProgram,
        config: &SolverConfig,
    ) -> Result<Box<dyn LpSession + '_>, SolverError> {
        lp.validate()?;
        Ok(Box::new(ColdSession { backend: self, lp: lp.clone(), config: config.clone() }))
    }
}

pub trait LpSession: Send {
    fn set_rhs(&mut self, row: usize, value: f64);
    fn solve(&mut self) -> Result<LpSolution, SolverError>;
}

struct ColdSession<'a, B: Backend + ?Sized> {
    backend: &'a B,
    lp: LinearProgram,
    config: SolverConfig,
}

impl<B: Backend + ?Sized> LpSession for ColdSession<'_, B> {
    fn set_rhs(&mut self, row: usize, value: f64) {
        self.lp.rows[row].rhs = value;
    }

    fn solve(&mut self) -> Result<LpSolution, SolverError> {
        self.backend.solve_lp(&self.lp, &self.config)
    }
}

/// The in-tree dense simplex and branch-and-cut.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceBackend;

impl Backend for ReferenceBackend {
    fn name(&self) -> &str {
        "reference"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { duals: true, lazy_cuts: true }
    }

    fn solve_lp(&self, lp: &LinearProgram, config: &SolverConfig) -> Result<LpSolution, SolverError> {
        solve_lp(lp, config)
    }

    fn solve_mip(
        &self,
        lp: &LinearProgram,
        config: &SolverConfig,
        callback: Option<&dyn CutCallback>,
    ) -> Result<MipSolution, SolverError> {
        solve_mip(lp, config, callback)
    }

    fn lp_session(
        &self,
        lp: &LinearProgram,
        config: &SolverConfig,
    ) -> Result<Box<dyn LpSession + '_>, SolverError> {
        lp.validate()?;
        config.validate()?;
        Ok(Box::new(WarmSession { lp: lp.clone(), config: config.clone(), tab: None }))
    }
}

/// Keeps the last optimal tableau and repairs it with the dual simplex.
struct WarmSession {
    lp: LinearProgram,
    config: SolverConfig,
    tab: Option<Tableau>,
}

impl LpSession for WarmSession {
    fn set_rhs(&mut self, row: usize, value: f64) {
        self.lp.rows[row].rhs = value;
        if let Some(tab) = self.tab.as_mut() {
            tab.set_rhs(row, value);
        }
    }

    fn solve(&mut self) -> Result<LpSolution, SolverError> {
        if let Some(tab) = self.tab.as_mut() {
            tab.iterations = 0;
            tab.deadline = self.config.time_limit.map(|t| std::time::Instant::now() + t);
            if let Some(LpStatus::Optimal) = tab.reoptimize() {
                return Ok(tab.solution(LpStatus::Optimal));
            }
        }
        let mut tab = Tableau::new(&self.lp, &self.config);
        let status = tab.optimize_cold();
        let sol = tab.solution(status);
        self.tab = (status == LpStatus::Optimal).then_some(tab);
        Ok(sol)
    }
}
