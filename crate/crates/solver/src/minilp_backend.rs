use crate::{
    Backend, Capabilities, CutCallback, LinearProgram, LpSolution, LpStatus, MipSolution,
    ObjectiveSense, Sense, SolverConfig, SolverError,
};

/// LP-only adapter over the `minilp` crate. Reports neither duals nor lazy
/// cuts; useful as an independent check of the reference simplex.
#[derive(Debug, Clone, Copy, Default)]
pub struct MinilpBackend;

impl Backend for MinilpBackend {
    fn name(&self) -> &str {
        "minilp"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { duals: false, lazy_cuts: false }
    }

    fn solve_lp(&self, lp: &LinearProgram, _config: &SolverConfig) -> Result<LpSolution, SolverError> {
        lp.validate()?;
        let dir = match lp.objective {
            ObjectiveSense::Maximize => minilp::OptimizationDirection::Maximize,
            ObjectiveSense::Minimize => minilp::OptimizationDirection::Minimize,
        };
        let mut problem = minilp::Problem::new(dir);
        let vars: Vec<minilp::Variable> = lp
            .columns
            .iter()
            .map(|c| problem.add_var(c.cost, (c.lower, c.upper)))
            .collect();
        for row in &lp.rows {
            let expr: Vec<(minilp::Variable, f64)> =
                row.coeffs.iter().map(|&(j, a)| (vars[j], a)).collect();
            let op = match row.sense {
                Sense::Le => minilp::ComparisonOp::Le,
                Sense::Ge => minilp::ComparisonOp::Ge,
                Sense::Eq => minilp::ComparisonOp::Eq,
            };
            problem.add_constraint(expr, op, row.rhs);
        }
        let empty = |status| LpSolution {
            status,
            primal: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            objective: f64::NAN,
            iterations: 0,
            diagnostics: Vec::new(),
        };
        match problem.solve() {
            Ok(sol) => {
                let primal: Vec<f64> = vars.iter().map(|&v| sol[v]).collect();
                Ok(LpSolution {
                    status: LpStatus::Optimal,
                    objective: lp.objective_value(&primal),
                    primal,
                    duals: Vec::new(),
                    reduced_costs: Vec::new(),
                    iterations: 0,
                    diagnostics: Vec::new(),
                })
            }
            Err(minilp::Error::Infeasible) => Ok(empty(LpStatus::Infeasible)),
            Err(minilp::Error::Unbounded) => Ok(empty(LpStatus::Unbounded)),
        }
    }

    fn solve_mip(
        &self,
        _lp: &LinearProgram,
        _config: &SolverConfig,
        _callback: Option<&dyn CutCallback>,
    ) -> Result<MipSolution, SolverError> {
        Err(SolverError::Unsupported { backend: self.name().into(), what: "integer programs".into() })
    }
}
