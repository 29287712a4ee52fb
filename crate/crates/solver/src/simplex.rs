//! Dense bounded-variable simplex.
//!
//! Every row gets a slack (`a·x + s = b`) whose bounds encode the row sense,
//! so the initial basis is the identity. Rows whose slack cannot absorb the
//! initial residual get an artificial column for phase 1. The full tableau
//! `B⁻¹[A I]` is kept, which makes warm starts cheap: adding a row, moving a
//! bound or changing a right-hand side leaves the basis dual feasible and the
//! dual simplex restores primal feasibility.

use std::time::Instant;

use crate::{LinearProgram, ObjectiveSense, Sense, SolverConfig, SolverError};

const PIVOT_TOL: f64 = 1e-9;
const DJ_TOL: f64 = 1e-9;
const DUAL_FEAS_TOL: f64 = 1e-7;
const STALL_LIMIT: usize = 50;
const REFACTOR_EVERY: usize = 400;
const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    /// `SolverConfig::time_limit` ran out mid-solve.
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Column values (meaningful when optimal; best basis otherwise).
    pub primal: Vec<f64>,
    /// Row duals. For a maximization `≤` rows carry nonnegative duals, for a
    /// minimization they are nonpositive.
    pub duals: Vec<f64>,
    /// `c_j - y·A_j` in the user's objective sense.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// `(primal objective, Lagrangian dual bound)` per phase-2 iteration,
    /// only filled when `SolverConfig::collect_diagnostics` is set.
    pub diagnostics: Vec<(f64, f64)>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solve `lp` (integrality ignored) from a slack basis.
pub fn solve_lp(lp: &LinearProgram, config: &SolverConfig) -> Result<LpSolution, SolverError> {
    lp.validate()?;
    config.validate()?;
    let mut tab = Tableau::new(lp, config);
    let status = tab.optimize_cold();
    Ok(tab.solution(status))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    Lower,
    Upper,
    /// Free nonbasic column held at zero.
    Zero,
}

enum Ratio {
    Unbounded,
    Flip(f64),
    Pivot { row: usize, theta: f64, leave_to: VarState },
}

#[derive(Debug, Clone)]
pub(crate) struct Tableau {
    n_struct: usize,
    /// Internal costs are minimized: `sign * c`.
    sign: f64,
    user_cost: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    value: Vec<f64>,
    state: Vec<VarState>,
    pos: Vec<usize>,
    artificial: Vec<bool>,
    orig: Vec<Vec<(usize, f64)>>,
    row_sense: Vec<Sense>,
    rhs: Vec<f64>,
    slack_of_row: Vec<usize>,
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    xb: Vec<f64>,
    d: Vec<f64>,
    tol_feas: f64,
    max_iterations: usize,
    pub(crate) deadline: Option<Instant>,
    pub(crate) iterations: usize,
    since_refactor: usize,
    collect: bool,
    diagnostics: Vec<(f64, f64)>,
}

fn slack_bounds(sense: Sense) -> (f64, f64) {
    match sense {
        Sense::Le => (0.0, f64::INFINITY),
        Sense::Ge => (f64::NEG_INFINITY, 0.0),
        Sense::Eq => (0.0, 0.0),
    }
}

fn initial_state(lo: f64, up: f64) -> (VarState, f64) {
    if lo.is_finite() {
        (VarState::Lower, lo)
    } else if up.is_finite() {
        (VarState::Upper, up)
    } else {
        (VarState::Zero, 0.0)
    }
}

impl Tableau {
    pub(crate) fn new(lp: &LinearProgram, config: &SolverConfig) -> Self {
        let n = lp.num_columns();
        let m = lp.num_rows();
        let sign = match lp.objective {
            ObjectiveSense::Minimize => 1.0,
            ObjectiveSense::Maximize => -1.0,
        };
        let mut tab = Tableau {
            n_struct: n,
            sign,
            user_cost: lp.columns.iter().map(|c| c.cost).collect(),
            cost: Vec::new(),
            lower: Vec::with_capacity(n + m),
            upper: Vec::with_capacity(n + m),
            value: Vec::with_capacity(n + m),
            state: Vec::with_capacity(n + m),
            pos: Vec::with_capacity(n + m),
            artificial: Vec::with_capacity(n + m),
            orig: Vec::with_capacity(m),
            row_sense: Vec::with_capacity(m),
            rhs: Vec::with_capacity(m),
            slack_of_row: Vec::with_capacity(m),
            t: Vec::with_capacity(m),
            basis: Vec::with_capacity(m),
            xb: Vec::with_capacity(m),
            d: Vec::new(),
            tol_feas: config.tol_feas,
            max_iterations: config.max_iterations,
            deadline: config.time_limit.map(|t| Instant::now() + t),
            iterations: 0,
            since_refactor: 0,
            collect: config.collect_diagnostics,
            diagnostics: Vec::new(),
        };
        for c in &lp.columns {
            let (st, v) = initial_state(c.lower, c.upper);
            tab.lower.push(c.lower);
            tab.upper.push(c.upper);
            tab.value.push(v);
            tab.state.push(st);
            tab.pos.push(NONE);
            tab.artificial.push(false);
        }
        for i in 0..m {
            let (lo, up) = slack_bounds(lp.rows[i].sense);
            tab.lower.push(lo);
            tab.upper.push(up);
            tab.value.push(0.0);
            tab.state.push(VarState::Basic);
            tab.pos.push(NONE);
            tab.artificial.push(false);
        }
        // Residuals decide between slack and artificial basics.
        let mut artificial_rows = Vec::new();
        for (i, row) in lp.rows.iter().enumerate() {
            let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(row.coeffs.len() + 2);
            let mut residual = row.rhs;
            for &(j, a) in &row.coeffs {
                residual -= a * tab.value[j];
                coeffs.push((j, a));
            }
            let s = n + i;
            coeffs.push((s, 1.0));
            tab.orig.push(coeffs);
            tab.row_sense.push(row.sense);
            tab.rhs.push(row.rhs);
            tab.slack_of_row.push(s);
            let (lo, up) = (tab.lower[s], tab.upper[s]);
            if residual >= lo - config.tol_feas && residual <= up + config.tol_feas {
                tab.basis.push(s);
                tab.pos[s] = i;
                tab.xb.push(residual);
            } else {
                let (st, v) = initial_state(lo, up);
                tab.state[s] = if lo == up { VarState::Lower } else { st };
                tab.value[s] = v;
                tab.basis.push(NONE);
                tab.xb.push(0.0);
                artificial_rows.push((i, residual - v));
            }
        }
        for &(i, r) in &artificial_rows {
            let a = tab.lower.len();
            let sigma = if r >= 0.0 { 1.0 } else { -1.0 };
            tab.lower.push(0.0);
            tab.upper.push(f64::INFINITY);
            tab.value.push(0.0);
            tab.state.push(VarState::Basic);
            tab.pos.push(i);
            tab.artificial.push(true);
            tab.orig[i].push((a, sigma));
            tab.basis[i] = a;
            tab.xb[i] = r.abs();
        }
        let ncols = tab.lower.len();
        tab.t = (0..m)
            .map(|i| {
                let mut row = vec![0.0; ncols];
                let b = tab.basis[i];
                let scale = if tab.artificial[b] { 1.0 / tab.coef(i, b) } else { 1.0 };
                for &(j, a) in &tab.orig[i] {
                    row[j] += a * scale;
                }
                row
            })
            .collect();
        tab.cost = vec![0.0; ncols];
        tab.d = vec![0.0; ncols];
        tab
    }

    fn coef(&self, row: usize, col: usize) -> f64 {
        self.orig[row].iter().filter(|&&(j, _)| j == col).map(|&(_, a)| a).sum()
    }

    fn ncols(&self) -> usize {
        self.lower.len()
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    fn set_phase2_costs(&mut self) {
        let ncols = self.ncols();
        self.cost = vec![0.0; ncols];
        for j in 0..self.n_struct {
            self.cost[j] = self.sign * self.user_cost[j];
        }
        self.compute_reduced_costs();
    }

    fn compute_reduced_costs(&mut self) {
        let ncols = self.ncols();
        let mut d = self.cost.clone();
        d.resize(ncols, 0.0);
        for (i, row) in self.t.iter().enumerate() {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                for (dj, &tij) in d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        for &b in &self.basis {
            d[b] = 0.0;
        }
        self.d = d;
    }

    /// Phase 1 (if artificials exist) followed by phase 2.
    pub(crate) fn optimize_cold(&mut self) -> LpStatus {
        if self.artificial.iter().any(|&a| a) {
            let ncols = self.ncols();
            self.cost = (0..ncols).map(|j| if self.artificial[j] { 1.0 } else { 0.0 }).collect();
            self.compute_reduced_costs();
            match self.primal(false) {
                LpStatus::Optimal => {}
                s @ (LpStatus::IterationLimit | LpStatus::TimeLimit) => return s,
                // Phase 1 is bounded below by zero; treat anything else as numerical trouble.
                _ => return LpStatus::Infeasible,
            }
            let infeas: f64 = (0..self.basis.len())
                .filter(|&i| self.artificial[self.basis[i]])
                .map(|i| self.xb[i].max(0.0))
                .sum();
            if infeas > self.tol_feas * 10.0 {
                return LpStatus::Infeasible;
            }
            self.retire_artificials();
        }
        self.set_phase2_costs();
        self.primal(self.collect)
    }

    fn retire_artificials(&mut self) {
        for r in 0..self.basis.len() {
            let b = self.basis[r];
            if !self.artificial[b] {
                continue;
            }
            let candidate = (0..self.ncols())
                .filter(|&j| {
                    !self.artificial[j] && self.state[j] != VarState::Basic && !self.is_fixed(j)
                })
                .max_by(|&a, &b| self.t[r][a].abs().total_cmp(&self.t[r][b].abs()));
            if let Some(j) = candidate {
                if self.t[r][j].abs() > 1e-7 {
                    let delta = (self.xb[r] - 0.0) / self.t[r][j];
                    self.move_basics(j, delta);
                    let entering = self.value[j] + delta;
                    self.value[b] = 0.0;
                    self.state[b] = VarState::Lower;
                    self.pos[b] = NONE;
                    self.xb[r] = entering;
                    self.pivot(r, j);
                }
            }
        }
        for j in 0..self.ncols() {
            if self.artificial[j] {
                self.lower[j] = 0.0;
                self.upper[j] = 0.0;
                if self.state[j] != VarState::Basic {
                    self.value[j] = 0.0;
                    self.state[j] = VarState::Lower;
                }
            }
        }
    }

    fn move_basics(&mut self, j: usize, delta: f64) {
        if delta != 0.0 {
            for (x, row) in self.xb.iter_mut().zip(&self.t) {
                *x -= row[j] * delta;
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.t[r][j];
        let inv = 1.0 / p;
        for v in self.t[r].iter_mut() {
            *v *= inv;
        }
        self.t[r][j] = 1.0;
        let pivot_row = std::mem::take(&mut self.t[r]);
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[j] = 0.0;
            }
        }
        let f = self.d[j];
        if f != 0.0 {
            for (v, &pv) in self.d.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
        self.d[j] = 0.0;
        self.t[r] = pivot_row;
        let leaving = self.basis[r];
        if leaving != NONE {
            self.pos[leaving] = NONE;
        }
        self.basis[r] = j;
        self.pos[j] = r;
        self.state[j] = VarState::Basic;
        self.since_refactor += 1;
    }

    fn entering_primal(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncols() {
            let st = self.state[j];
            if st == VarState::Basic || self.is_fixed(j) {
                continue;
            }
            let dj = self.d[j];
            let dir = match st {
                VarState::Lower if dj < -DJ_TOL => 1.0,
                VarState::Upper if dj > DJ_TOL => -1.0,
                VarState::Zero if dj.abs() > DJ_TOL => -dj.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn ratio_primal(&self, j: usize, dir: f64, bland: bool) -> Ratio {
        let mut best_theta = f64::INFINITY;
        let mut best: Option<(usize, VarState, f64)> = None;
        if self.lower[j].is_finite() && self.upper[j].is_finite() {
            best_theta = self.upper[j] - self.lower[j];
        }
        for (i, row) in self.t.iter().enumerate() {
            let alpha = row[j];
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            let rate = -alpha * dir;
            let b = self.basis[i];
            let (theta, to) = if rate < 0.0 {
                if !self.lower[b].is_finite() {
                    continue;
                }
                ((self.xb[i] - self.lower[b]) / -rate, VarState::Lower)
            } else {
                if !self.upper[b].is_finite() {
                    continue;
                }
                ((self.upper[b] - self.xb[i]) / rate, VarState::Upper)
            };
            let theta = theta.max(0.0);
            let replace = if theta < best_theta - 1e-12 {
                true
            } else if theta <= best_theta + 1e-12 {
                match best {
                    Some((bi, _, balpha)) => {
                        if bland {
                            b < self.basis[bi]
                        } else {
                            alpha.abs() > balpha.abs()
                        }
                    }
                    None => false,
                }
            } else {
                false
            };
            if replace {
                best_theta = best_theta.min(theta);
                best = Some((i, to, alpha));
            }
        }
        match best {
            Some((row, leave_to, _)) => Ratio::Pivot { row, theta: best_theta, leave_to },
            None if best_theta.is_finite() => Ratio::Flip(best_theta),
            None => Ratio::Unbounded,
        }
    }

    fn leave(&mut self, r: usize, to: VarState) {
        let b = self.basis[r];
        let fixed = self.is_fixed(b);
        let (st, v) = match to {
            VarState::Lower => (VarState::Lower, self.lower[b]),
            _ => (VarState::Upper, self.upper[b]),
        };
        self.state[b] = if fixed { VarState::Lower } else { st };
        self.value[b] = v;
    }

    fn primal(&mut self, record: bool) -> LpStatus {
        let mut stall = 0usize;
        let mut refactored_at_end = false;
        loop {
            if self.since_refactor >= REFACTOR_EVERY && self.refactor().is_err() {
                return LpStatus::IterationLimit;
            }
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
            if self.deadline.is_some_and(|d| Instant::now() >= d) {
                return LpStatus::TimeLimit;
            }
            let bland = stall > STALL_LIMIT;
            let Some((j, dir)) = self.entering_primal(bland) else {
                if !refactored_at_end && self.since_refactor > 0 {
                    refactored_at_end = true;
                    if self.refactor().is_ok() && self.entering_primal(false).is_some() {
                        continue;
                    }
                }
                return LpStatus::Optimal;
            };
            self.iterations += 1;
            match self.ratio_primal(j, dir, bland) {
                Ratio::Unbounded => return LpStatus::Unbounded,
                Ratio::Flip(theta) => {
                    self.move_basics(j, dir * theta);
                    if dir > 0.0 {
                        self.value[j] = self.upper[j];
                        self.state[j] = VarState::Upper;
                    } else {
                        self.value[j] = self.lower[j];
                        self.state[j] = VarState::Lower;
                    }
                    stall = 0;
                }
                Ratio::Pivot { row, theta, leave_to } => {
                    let delta = dir * theta;
                    self.move_basics(j, delta);
                    let entering = self.value[j] + delta;
                    self.leave(row, leave_to);
                    self.xb[row] = entering;
                    self.pivot(row, j);
                    if theta < 1e-11 {
                        stall += 1;
                    } else {
                        stall = 0;
                    }
                }
            }
            if record {
                let pair = (self.user_objective(), self.lagrangian_bound());
                self.diagnostics.push(pair);
            }
        }
    }

    fn dual_feasible(&self) -> bool {
        (0..self.ncols()).all(|j| {
            if self.is_fixed(j) {
                return true;
            }
            match self.state[j] {
                VarState::Basic => true,
                VarState::Lower => self.d[j] >= -DUAL_FEAS_TOL,
                VarState::Upper => self.d[j] <= DUAL_FEAS_TOL,
                VarState::Zero => self.d[j].abs() <= DUAL_FEAS_TOL,
            }
        })
    }

    fn primal_violation(&self, i: usize) -> f64 {
        let b = self.basis[i];
        (self.lower[b] - self.xb[i]).max(self.xb[i] - self.upper[b]).max(0.0)
    }

    fn primal_feasible(&self) -> bool {
        (0..self.basis.len()).all(|i| self.primal_violation(i) <= self.tol_feas)
    }

    fn dual(&mut self) -> LpStatus {
        let mut stall = 0usize;
        loop {
            if self.since_refactor >= REFACTOR_EVERY && self.refactor().is_err() {
                return LpStatus::IterationLimit;
            }
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
            if self.deadline.is_some_and(|d| Instant::now() >= d) {
                return LpStatus::TimeLimit;
            }
            let bland = stall > STALL_LIMIT;
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.basis.len() {
                let v = self.primal_violation(i);
                if v > self.tol_feas {
                    if bland {
                        if leave.is_none_or(|(r, _)| self.basis[i] < self.basis[r]) {
                            leave = Some((i, v));
                        }
                    } else if leave.is_none_or(|(_, bv)| v > bv) {
                        leave = Some((i, v));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return LpStatus::Optimal;
            };
            self.iterations += 1;
            let b = self.basis[r];
            let increase = self.xb[r] < self.lower[b];
            let target = if increase { self.lower[b] } else { self.upper[b] };
            let mut best: Option<(usize, f64, f64)> = None;
            for j in 0..self.ncols() {
                let st = self.state[j];
                if st == VarState::Basic || self.is_fixed(j) {
                    continue;
                }
                let alpha = self.t[r][j];
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let ok = match (st, increase) {
                    (VarState::Zero, _) => true,
                    (VarState::Lower, true) => alpha < 0.0,
                    (VarState::Upper, true) => alpha > 0.0,
                    (VarState::Lower, false) => alpha > 0.0,
                    (VarState::Upper, false) => alpha < 0.0,
                    (VarState::Basic, _) => false,
                };
                if !ok {
                    continue;
                }
                let ratio = self.d[j].abs() / alpha.abs();
                let replace = match best {
                    None => true,
                    Some((bj, br, ba)) => {
                        if ratio < br - 1e-12 {
                            true
                        } else if ratio <= br + 1e-12 {
                            if bland {
                                j < bj
                            } else {
                                alpha.abs() > ba.abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if replace {
                    best = Some((j, ratio, alpha));
                }
            }
            let Some((j, ratio, alpha)) = best else {
                return LpStatus::Infeasible;
            };
            if ratio < 1e-11 {
                stall += 1;
            } else {
                stall = 0;
            }
            let delta = (self.xb[r] - target) / alpha;
            self.move_basics(j, delta);
            let entering = self.value[j] + delta;
            self.leave(r, if increase { VarState::Lower } else { VarState::Upper });
            self.xb[r] = entering;
            self.pivot(r, j);
        }
    }

    /// Re-solve after warm-start edits. Returns `None` when the basis cannot be
    /// repaired and the caller should solve from scratch.
    pub(crate) fn reoptimize(&mut self) -> Option<LpStatus> {
        if self.dual_feasible() {
            match self.dual() {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => {
                    // Confirm with a fresh factorization before trusting it.
                    if self.refactor().is_err() {
                        return None;
                    }
                    if !self.dual_feasible() {
                        return None;
                    }
                    match self.dual() {
                        LpStatus::Optimal => {}
                        other => return Some(other),
                    }
                }
                other => return Some(other),
            }
            return Some(self.primal(false));
        }
        if self.primal_feasible() {
            return Some(self.primal(false));
        }
        None
    }

    /// Rebuild `B⁻¹[A I]`, basic values and reduced costs from the original rows.
    pub(crate) fn refactor(&mut self) -> Result<(), SolverError> {
        let m = self.basis.len();
        let ncols = self.ncols();
        let mut mat: Vec<Vec<f64>> = self
            .orig
            .iter()
            .map(|coeffs| {
                let mut row = vec![0.0; ncols];
                for &(j, a) in coeffs {
                    row[j] += a;
                }
                row
            })
            .collect();
        let mut assigned = vec![false; m];
        let mut new_basis = vec![NONE; m];
        for &c in &self.basis {
            let mut best = NONE;
            let mut best_abs = 1e-9;
            for (i, row) in mat.iter().enumerate() {
                if !assigned[i] && row[c].abs() > best_abs {
                    best_abs = row[c].abs();
                    best = i;
                }
            }
            if best == NONE {
                return Err(SolverError::Numerical("singular basis during refactorization".into()));
            }
            let p = best;
            assigned[p] = true;
            new_basis[p] = c;
            let inv = 1.0 / mat[p][c];
            for v in mat[p].iter_mut() {
                *v *= inv;
            }
            mat[p][c] = 1.0;
            let prow = std::mem::take(&mut mat[p]);
            for (i, row) in mat.iter_mut().enumerate() {
                if i == p {
                    continue;
                }
                let f = row[c];
                if f != 0.0 {
                    for (v, &pv) in row.iter_mut().zip(&prow) {
                        *v -= f * pv;
                    }
                    row[c] = 0.0;
                }
            }
            mat[p] = prow;
        }
        self.t = mat;
        self.basis = new_basis;
        for (i, &b) in self.basis.iter().enumerate() {
            self.pos[b] = i;
        }
        let residual: Vec<f64> = self
            .orig
            .iter()
            .zip(&self.rhs)
            .map(|(coeffs, &b)| {
                b - coeffs
                    .iter()
                    .filter(|&&(j, _)| self.state[j] != VarState::Basic)
                    .map(|&(j, a)| a * self.value[j])
                    .sum::<f64>()
            })
            .collect();
        for i in 0..m {
            self.xb[i] = (0..m).map(|k| self.t[i][self.slack_of_row[k]] * residual[k]).sum();
        }
        self.compute_reduced_costs();
        self.since_refactor = 0;
        Ok(())
    }

    pub(crate) fn set_bounds(&mut self, j: usize, lo: f64, up: f64) {
        self.lower[j] = lo;
        self.upper[j] = up;
        if self.state[j] == VarState::Basic {
            return;
        }
        let old = self.value[j];
        let (st, v) = match self.state[j] {
            VarState::Lower if lo.is_finite() => (VarState::Lower, lo),
            VarState::Upper if up.is_finite() => (VarState::Upper, up),
            _ => initial_state(lo, up),
        };
        self.state[j] = st;
        self.value[j] = v;
        self.move_basics(j, v - old);
    }

    pub(crate) fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Append a row over structural columns; the new slack enters the basis.
    pub(crate) fn add_row(&mut self, coeffs: &[(usize, f64)], sense: Sense, rhs: f64) {
        let s = self.ncols();
        for row in self.t.iter_mut() {
            row.push(0.0);
        }
        let (lo, up) = slack_bounds(sense);
        self.lower.push(lo);
        self.upper.push(up);
        self.cost.push(0.0);
        self.d.push(0.0);
        self.value.push(0.0);
        self.state.push(VarState::Basic);
        self.pos.push(self.basis.len());
        self.artificial.push(false);

        let mut agg: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for &(j, a) in coeffs {
            match agg.iter_mut().find(|(k, _)| *k == j) {
                Some((_, v)) => *v += a,
                None => agg.push((j, a)),
            }
        }
        let mut row = vec![0.0; s + 1];
        let mut activity = 0.0;
        for &(j, a) in &agg {
            activity += a * self.column_value(j);
            if self.state[j] == VarState::Basic {
                let k = self.pos[j];
                for (v, &tv) in row.iter_mut().zip(&self.t[k]) {
                    *v -= a * tv;
                }
            } else {
                row[j] += a;
            }
        }
        for &b in &self.basis {
            row[b] = 0.0;
        }
        row[s] = 1.0;
        let mut orig = agg;
        orig.push((s, 1.0));
        self.orig.push(orig);
        self.row_sense.push(sense);
        self.rhs.push(rhs);
        self.slack_of_row.push(s);
        self.t.push(row);
        self.basis.push(s);
        self.xb.push(rhs - activity);
    }

    pub(crate) fn set_rhs(&mut self, row: usize, value: f64) {
        let delta = value - self.rhs[row];
        if delta == 0.0 {
            return;
        }
        self.rhs[row] = value;
        let col = self.slack_of_row[row];
        for (x, trow) in self.xb.iter_mut().zip(&self.t) {
            *x += trow[col] * delta;
        }
    }

    fn column_value(&self, j: usize) -> f64 {
        if self.state[j] == VarState::Basic {
            self.xb[self.pos[j]]
        } else {
            self.value[j]
        }
    }

    pub(crate) fn primal_values(&self) -> Vec<f64> {
        (0..self.n_struct).map(|j| self.column_value(j)).collect()
    }

    pub(crate) fn user_objective(&self) -> f64 {
        (0..self.n_struct).map(|j| self.user_cost[j] * self.column_value(j)).sum()
    }

    fn user_duals(&self) -> Vec<f64> {
        self.slack_of_row.iter().map(|&s| -self.sign * self.d[s]).collect()
    }

    /// Valid bound from the current (sign-projected) duals via Lagrangian relaxation.
    fn lagrangian_bound(&self) -> f64 {
        let maximize = self.sign < 0.0;
        let mut y = self.user_duals();
        for (yi, sense) in y.iter_mut().zip(&self.row_sense) {
            match (sense, maximize) {
                (Sense::Le, true) | (Sense::Ge, false) => *yi = yi.max(0.0),
                (Sense::Ge, true) | (Sense::Le, false) => *yi = yi.min(0.0),
                (Sense::Eq, _) => {}
            }
        }
        let mut reduced = self.user_cost.clone();
        let mut bound = 0.0;
        for (i, coeffs) in self.orig.iter().enumerate() {
            bound += y[i] * self.rhs[i];
            for &(j, a) in coeffs {
                if j < self.n_struct {
                    reduced[j] -= y[i] * a;
                }
            }
        }
        for (j, &r) in reduced.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            let (lo, up) = (self.lower[j], self.upper[j]);
            let best = if maximize { (r * lo).max(r * up) } else { (r * lo).min(r * up) };
            if best.is_nan() {
                bound += if maximize { f64::INFINITY } else { f64::NEG_INFINITY };
            } else {
                bound += best;
            }
        }
        bound
    }

    pub(crate) fn solution(&self, status: LpStatus) -> LpSolution {
        let primal = self.primal_values();
        let duals = self.user_duals();
        let reduced_costs = (0..self.n_struct).map(|j| self.sign * self.d[j]).collect();
        LpSolution {
            status,
            objective: self.user_objective(),
            primal,
            duals,
            reduced_costs,
            iterations: self.iterations,
            diagnostics: self.diagnostics.clone(),
        }
    }
}
