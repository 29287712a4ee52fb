//! Multi-cut Benders branch-and-cut for the IP-LP stochastic problems.
//!
//! The master holds the first stage and one η per scenario. Two cut families
//! bound η: x-cuts from the recourse LP with the first stage fixed, and
//! β-cuts from a relaxed recourse where capacity is aggregated per arc, which
//! only depend on per-arc usage β.

use std::collections::{BTreeMap, HashSet};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rwa_solver::{
    Backend, CutCallback, CutRow, LinearProgram, LpSession, MipSolution, MipStatus, NodeContext, Sense, SolverConfig,
};
use serde::{Deserialize, Serialize};

use crate::model::{
    build_aggregated_recourse, build_extensive, build_first_stage, build_master, build_recourse, decode_first_stage,
    FormulationSpec, Model, Relaxation, RowKind, VarKey, VarKind, WavelinkUsage,
};
use crate::par::Execution;
use crate::topology::Lightpath;
use crate::traffic::DemandMatrix;
use crate::Error;

pub const X_CUT: &str = "x_cut";
pub const BETA_CUT: &str = "beta_cut";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "extensive")]
    Extensive,
    #[serde(rename = "benders-x")]
    BendersX,
    #[serde(rename = "benders-xbeta")]
    BendersXBeta,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Extensive => "extensive",
            Method::BendersX => "benders-x",
            Method::BendersXBeta => "benders-xbeta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CutFamily {
    #[serde(rename = "x_cut")]
    X,
    #[serde(rename = "beta_cut")]
    Beta,
}

impl CutFamily {
    pub fn label(self) -> &'static str {
        match self {
            CutFamily::X => X_CUT,
            CutFamily::Beta => BETA_CUT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BendersConfig {
    pub method: Method,
    pub preprocess_lp_lp: bool,
    pub separate_beta_at_fractional: bool,
    /// Minimum η excess over the subproblem value for a cut to be added.
    pub tol_cut: f64,
}

impl Default for BendersConfig {
    fn default() -> Self {
        Self { method: Method::BendersXBeta, preprocess_lp_lp: true, separate_beta_at_fractional: true, tol_cut: 1e-5 }
    }
}

impl BendersConfig {
    pub fn with_method(method: Method) -> Self {
        Self { method, ..Self::default() }.normalized()
    }

    /// BENDERS-x never uses β.
    pub fn normalized(mut self) -> Self {
        if self.method != Method::BendersXBeta {
            self.preprocess_lp_lp = false;
            self.separate_beta_at_fractional = false;
        }
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.tol_cut > 0.0 && self.tol_cut.is_finite()) {
            return Err(Error::Config(format!("tol_cut must be positive, got {}", self.tol_cut)));
        }
        Ok(())
    }
}

/// `η_scenario ≤ Σ coeffs·v + constant` over master columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub family: CutFamily,
    pub scenario: usize,
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
    /// Master values at which the cut was separated.
    pub origin: Arc<Vec<f64>>,
    /// Subproblem optimum at `origin`.
    pub subproblem_value: f64,
}

impl Cut {
    pub fn rhs(&self, values: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|&(j, a)| a * values[j]).sum::<f64>()
    }

    fn signature(&self) -> (CutFamily, usize, Vec<(usize, u64)>, u64) {
        let coeffs = self.coeffs.iter().map(|&(j, a)| (j, a.to_bits())).collect();
        (self.family, self.scenario, coeffs, self.constant.to_bits())
    }

    fn to_row(&self, eta: usize) -> CutRow {
        let mut coeffs = vec![(eta, 1.0)];
        coeffs.extend(self.coeffs.iter().map(|&(j, a)| (j, -a)));
        CutRow { coeffs, sense: Sense::Le, rhs: self.constant, family: self.family.label().into() }
    }
}

/// Append-only cut store that drops exact duplicates.
#[derive(Debug, Clone, Default)]
pub struct CutPool {
    pub(crate) cuts: Vec<Cut>,
    seen: HashSet<(CutFamily, usize, Vec<(usize, u64)>, u64)>,
}

impl CutPool {
    pub fn insert(&mut self, cut: Cut) -> bool {
        if self.seen.insert(cut.signature()) {
            self.cuts.push(cut);
            true
        } else {
            false
        }
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn count(&self, family: CutFamily) -> usize {
        self.cuts.iter().filter(|c| c.family == family).count()
    }
}

/// Recourse LP with first-stage dependent right-hand sides, solved repeatedly.
struct Subproblem<'a> {
    /// `None` when the scenario leaves no columns: the optimum is 0.
    session: Option<Mutex<Box<dyn LpSession + 'a>>>,
    /// `(row, arc, wavelength)` for capacity rows, or `(row, arc, _)` for aggregated rows.
    coupled: Vec<(usize, usize, usize)>,
    /// Constant part of the dual objective: demand rows times requests, plus unit rows.
    fixed: Vec<(usize, f64)>,
}

impl<'a> Subproblem<'a> {
    fn new(model: &Model, coupled_kind: RowKind, demand: &DemandMatrix, backend: &'a dyn Backend, config: &SolverConfig) -> Result<Self, Error> {
        let mut coupled = Vec::new();
        let mut fixed = Vec::new();
        for (i, tag) in model.row_tags().iter().enumerate() {
            match tag.kind {
                k if k == coupled_kind => coupled.push((i, tag.arc.unwrap(), tag.wavelength.unwrap_or(0))),
                RowKind::RecourseDemand => fixed.push((i, demand.get(tag.pair.unwrap()) as f64)),
                RowKind::Unit => fixed.push((i, 1.0)),
                _ => {}
            }
        }
        let session = if model.num_vars() == 0 { None } else { Some(Mutex::new(backend.lp_session(&model.lp, config)?)) };
        Ok(Self { session, coupled, fixed })
    }

    /// Solve with the coupled rows at `rhs(arc, wavelength)`. Returns the optimum and
    /// `(arc, wavelength, dual)` of every coupled row, plus the constant term.
    fn solve(&self, rhs: impl Fn(usize, usize) -> f64) -> Result<(f64, Vec<(usize, usize, f64)>, f64), Error> {
        let Some(session) = &self.session else {
            return Ok((0.0, Vec::new(), 0.0));
        };
        let mut session = session.lock().unwrap_or_else(|e| e.into_inner());
        for &(row, arc, w) in &self.coupled {
            session.set_rhs(row, rhs(arc, w).max(0.0));
        }
        let sol = session.solve()?;
        if !sol.is_optimal() {
            return Err(Error::Model(format!("recourse LP ended {:?}; it always admits granting nothing", sol.status)));
        }
        let duals = self.coupled.iter().map(|&(row, arc, w)| (arc, w, sol.duals[row])).collect();
        let constant = self.fixed.iter().map(|&(row, b)| sol.duals[row] * b).sum();
        Ok((sol.objective, duals, constant))
    }
}

struct MasterLayout {
    /// x columns per wavelink.
    x_by_wavelink: BTreeMap<(usize, usize), Vec<usize>>,
    eta: Vec<usize>,
    /// β column per arc, when present.
    beta: Vec<usize>,
}

impl MasterLayout {
    fn of(model: &Model, scenarios: usize) -> Result<Self, Error> {
        let mut x_by_wavelink: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (j, key) in model.columns_of(VarKind::X) {
            x_by_wavelink.entry((key.arc.unwrap(), key.wavelength.unwrap())).or_default().push(j);
        }
        let eta = (0..scenarios).map(|k| model.var_index(&VarKey::eta(k))).collect::<Result<_, _>>()?;
        let mut beta: Vec<(usize, usize)> =
            model.columns_of(VarKind::Beta).map(|(j, key)| (key.arc.unwrap(), j)).collect();
        beta.sort_unstable();
        Ok(Self { x_by_wavelink, eta, beta: beta.into_iter().map(|(_, j)| j).collect() })
    }
}

/// Separation oracles for every scenario of a master.
pub struct Separator<'a> {
    spec: &'a FormulationSpec,
    layout: MasterLayout,
    x_subs: Vec<Subproblem<'a>>,
    beta_subs: Vec<Subproblem<'a>>,
    free_count: Vec<f64>,
    tol_cut: f64,
    exec: Execution,
}

impl<'a> Separator<'a> {
    pub fn new(
        spec: &'a FormulationSpec,
        master: &Model,
        backend: &'a dyn Backend,
        solver: &SolverConfig,
        tol_cut: f64,
        exec: Execution,
    ) -> Result<Self, Error> {
        let layout = MasterLayout::of(master, spec.scenarios.len())?;
        let topo = spec.topology();
        let sub_config = SolverConfig { time_limit: None, ..solver.clone() };
        let zero = WavelinkUsage::zero(topo);
        let x_subs = spec
            .scenarios
            .iter()
            .map(|dem| {
                let m = build_recourse(spec, &zero, dem)?;
                Subproblem::new(&m, RowKind::Capacity, dem, backend, &sub_config)
            })
            .collect::<Result<Vec<_>, Error>>()?;
        let beta_subs = if layout.beta.is_empty() {
            Vec::new()
        } else {
            let zero = vec![0.0; topo.num_arcs()];
            spec.scenarios
                .iter()
                .map(|dem| {
                    let m = build_aggregated_recourse(spec, &zero, dem)?;
                    Subproblem::new(&m, RowKind::AggregatedCapacity, dem, backend, &sub_config)
                })
                .collect::<Result<Vec<_>, Error>>()?
        };
        let free_count = (0..topo.num_arcs()).map(|a| spec.second_stage_free_count(a) as f64).collect();
        Ok(Self { spec, layout, x_subs, beta_subs, free_count, tol_cut, exec })
    }

    pub fn has_beta(&self) -> bool {
        !self.beta_subs.is_empty()
    }

    /// x-cut for scenario `k` at master point `values`, if η is too large.
    pub fn separate_x(&self, k: usize, values: &Arc<Vec<f64>>) -> Result<Option<Cut>, Error> {
        let usage = |arc: usize, w: usize| -> f64 {
            self.layout.x_by_wavelink.get(&(arc, w)).map_or(0.0, |cols| cols.iter().map(|&j| values[j]).sum())
        };
        let (q, duals, constant) = self.x_subs[k].solve(|a, w| 1.0 - usage(a, w))?;
        if values[self.layout.eta[k]] <= q + self.tol_cut {
            return Ok(None);
        }
        let mut coeffs = Vec::new();
        let mut constant = constant;
        for (arc, w, pi) in duals {
            if pi == 0.0 {
                continue;
            }
            constant += pi;
            if let Some(cols) = self.layout.x_by_wavelink.get(&(arc, w)) {
                coeffs.extend(cols.iter().map(|&j| (j, -pi)));
            }
        }
        coeffs.sort_unstable_by_key(|&(j, _)| j);
        Ok(Some(Cut { family: CutFamily::X, scenario: k, coeffs, constant, origin: Arc::clone(values), subproblem_value: q }))
    }

    /// β-cut for scenario `k` at master point `values`, if η is too large.
    pub fn separate_beta(&self, k: usize, values: &Arc<Vec<f64>>) -> Result<Option<Cut>, Error> {
        let beta = &self.layout.beta;
        let (q, duals, constant) = self.beta_subs[k].solve(|a, _| self.free_count[a] - values[beta[a]])?;
        if values[self.layout.eta[k]] <= q + self.tol_cut {
            return Ok(None);
        }
        let mut coeffs = Vec::new();
        let mut constant = constant;
        for (arc, _, pi) in duals {
            if pi == 0.0 {
                continue;
            }
            constant += pi * self.free_count[arc];
            coeffs.push((beta[arc], -pi));
        }
        coeffs.sort_unstable_by_key(|&(j, _)| j);
        Ok(Some(Cut { family: CutFamily::Beta, scenario: k, coeffs, constant, origin: Arc::clone(values), subproblem_value: q }))
    }

    /// The node policy: β-cuts at fractional nodes when `beta_fractional`; at
    /// integral nodes β-cuts first, then x-cuts for scenarios without a β-cut.
    pub fn separate(&self, values: &[f64], integral: bool, beta_fractional: bool, x_cuts: bool) -> Result<Vec<Cut>, Error> {
        let values = Arc::new(values.to_vec());
        let n = self.spec.scenarios.len();
        let use_beta = self.has_beta() && (integral || beta_fractional);
        let use_x = integral && x_cuts;
        let per_scenario = self.exec.try_map_range(n, |k| -> Result<Option<Cut>, Error> {
            if use_beta {
                if let Some(cut) = self.separate_beta(k, &values)? {
                    return Ok(Some(cut));
                }
            }
            if use_x {
                return self.separate_x(k, &values);
            }
            Ok(None)
        })?;
        Ok(per_scenario.into_iter().flatten().collect())
    }

    pub fn eta_column(&self, k: usize) -> usize {
        self.layout.eta[k]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub method: String,
    pub time_s: f64,
    pub gap_pct: Option<f64>,
    pub n_beta_cuts: usize,
    pub n_x_cuts: usize,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: MipStatus,
    pub objective: Option<f64>,
    pub bound: f64,
    pub first_stage: Vec<Lightpath>,
    /// First-stage contribution to the objective.
    pub first_stage_value: f64,
    /// η per scenario at the returned solution.
    pub eta: Vec<f64>,
    pub node_count: usize,
    /// β-cuts found while solving the LP-LP relaxation.
    pub preprocessing_cuts: usize,
    pub stats: SolveStats,
    /// Every cut generated, including those found during preprocessing.
    pub cuts: Vec<Cut>,
}

impl SolveResult {
    pub fn timed_out(&self) -> bool {
        self.status == MipStatus::TimeLimit
    }
}

/// `solve_mip`, except that a model without columns is decided directly.
fn solve_mip_model(backend: &dyn Backend, lp: &LinearProgram, solver: &SolverConfig) -> Result<MipSolution, Error> {
    if lp.num_columns() > 0 {
        return Ok(backend.solve_mip(lp, solver, None)?);
    }
    let feasible = lp.max_violation(&[]) <= solver.tol_feas;
    Ok(MipSolution {
        status: if feasible { MipStatus::Optimal } else { MipStatus::Infeasible },
        incumbent: feasible.then(Vec::new),
        objective: feasible.then_some(0.0),
        bound: if feasible { 0.0 } else { f64::NEG_INFINITY },
        gap: if feasible { 0.0 } else { f64::INFINITY },
        node_count: 0,
        cut_counts: Default::default(),
        cuts: Vec::new(),
        trace: Vec::new(),
        elapsed_seconds: 0.0,
    })
}

fn remaining(solver: &SolverConfig, started: Instant) -> SolverConfig {
    let time_limit = solver.time_limit.map(|t| t.saturating_sub(started.elapsed()).max(Duration::from_millis(1)));
    SolverConfig { time_limit, ..solver.clone() }
}

/// Solve `spec` with the configured method. Deterministic problems and
/// stochastic ones without scenarios reduce to the first-stage model.
pub fn solve(
    spec: &FormulationSpec,
    config: &BendersConfig,
    solver: &SolverConfig,
    backend: &dyn Backend,
    exec: &Execution,
) -> Result<SolveResult, Error> {
    config.validate()?;
    solver.validate()?;
    let config = config.clone().normalized();
    let started = Instant::now();
    if !spec.problem.is_stochastic() || spec.scenarios.is_empty() {
        let model = build_first_stage(spec);
        let sol = solve_mip_model(backend, &model.lp, solver)?;
        return finish(spec, &config, &model, sol, 0, Vec::new(), started);
    }
    if config.method == Method::Extensive {
        let model = build_extensive(spec)?;
        let sol = solve_mip_model(backend, &model.lp, solver)?;
        return finish(spec, &config, &model, sol, 0, Vec::new(), started);
    }
    let caps = backend.capabilities();
    if !caps.duals || !caps.lazy_cuts {
        return Err(Error::Unsupported(format!(
            "backend `{}` lacks duals or lazy cuts required by {}",
            backend.name(),
            config.method.name()
        )));
    }
    if spec.relaxation == Relaxation::IpIp {
        return Err(Error::Config("Benders methods need continuous recourse (ip-lp or lp-lp)".into()));
    }
    let with_beta = config.method == Method::BendersXBeta;
    let mut master = build_master(spec, with_beta);
    let mut preprocessing_cuts = 0;
    let mut cuts = Vec::new();
    if with_beta && config.preprocess_lp_lp {
        let pre = preprocess_lp_lp(spec, config.tol_cut, &remaining(solver, started), backend, exec)?;
        for c in pre.pool.cuts() {
            let row = c.to_row(pre.eta[c.scenario]);
            master.lp.add_row(row.coeffs, row.sense, row.rhs);
        }
        preprocessing_cuts = pre.pool.len();
        cuts = pre.pool.cuts;
    }
    let separator = Separator::new(spec, &master, backend, solver, config.tol_cut, exec.clone())?;
    let run = CallbackState::new(&separator, config.separate_beta_at_fractional, true);
    let sol = backend.solve_mip(&master.lp, &remaining(solver, started), Some(&run))?;
    let pool = run.finish()?;
    cuts.extend(pool.cuts);
    finish(spec, &config, &master, sol, preprocessing_cuts, cuts, started)
}

/// Lazy-cut callback around a separator, collecting cuts and the first error.
struct CallbackState<'s, 'a> {
    separator: &'s Separator<'a>,
    beta_fractional: bool,
    x_cuts: bool,
    pool: Mutex<CutPool>,
    failure: Mutex<Option<Error>>,
}

impl<'s, 'a> CallbackState<'s, 'a> {
    fn new(separator: &'s Separator<'a>, beta_fractional: bool, x_cuts: bool) -> Self {
        Self { separator, beta_fractional, x_cuts, pool: Mutex::new(CutPool::default()), failure: Mutex::new(None) }
    }

    fn finish(self) -> Result<CutPool, Error> {
        if let Some(e) = self.failure.into_inner().unwrap_or_else(|e| e.into_inner()) {
            return Err(e);
        }
        Ok(self.pool.into_inner().unwrap_or_else(|e| e.into_inner()))
    }
}

impl CutCallback for CallbackState<'_, '_> {
    fn separate(&self, ctx: &NodeContext<'_>) -> Vec<CutRow> {
        match self.separator.separate(ctx.values, ctx.integral, self.beta_fractional, self.x_cuts) {
            Ok(cuts) => {
                let mut pool = self.pool.lock().unwrap_or_else(|e| e.into_inner());
                cuts.into_iter()
                    .filter(|c| pool.insert(c.clone()))
                    .map(|c| c.to_row(self.separator.eta_column(c.scenario)))
                    .collect()
            }
            Err(e) => {
                self.failure.lock().unwrap_or_else(|e| e.into_inner()).get_or_insert(e);
                Vec::new()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub pool: CutPool,
    /// Optimum of the LP-relaxed β master once no β-cut is violated.
    pub objective: Option<f64>,
    pub status: MipStatus,
    /// η column per scenario in the β master.
    pub eta: Vec<usize>,
}

/// Solve the LP relaxation of the β master, adding β-cuts for every
/// scenario until none is violated.
pub fn preprocess_lp_lp(
    spec: &FormulationSpec,
    tol_cut: f64,
    solver: &SolverConfig,
    backend: &dyn Backend,
    exec: &Execution,
) -> Result<Preprocessed, Error> {
    let mut master = build_master(spec, true);
    master.lp = master.lp.relaxed();
    let eta = (0..spec.scenarios.len()).map(|k| master.var_index(&VarKey::eta(k))).collect::<Result<_, _>>()?;
    if spec.scenarios.is_empty() {
        return Ok(Preprocessed { pool: CutPool::default(), objective: None, status: MipStatus::Optimal, eta });
    }
    let separator = Separator::new(spec, &master, backend, solver, tol_cut, exec.clone())?;
    let run = CallbackState::new(&separator, true, false);
    let sol = backend.solve_mip(&master.lp, solver, Some(&run))?;
    let pool = run.finish()?;
    Ok(Preprocessed { pool, objective: sol.objective, status: sol.status, eta })
}

fn finish(
    spec: &FormulationSpec,
    config: &BendersConfig,
    model: &Model,
    sol: rwa_solver::MipSolution,
    preprocessing_cuts: usize,
    cuts: Vec<Cut>,
    started: Instant,
) -> Result<SolveResult, Error> {
    let (first_stage, eta) = match &sol.incumbent {
        Some(values) if spec.relaxation.integer_first_stage() => {
            let eta = (0..spec.scenarios.len())
                .map(|k| model.var_index(&VarKey::eta(k)).map(|j| values[j]).unwrap_or(0.0))
                .collect();
            (decode_first_stage(spec, model, values)?, eta)
        }
        Some(values) => {
            let eta = (0..spec.scenarios.len())
                .map(|k| model.var_index(&VarKey::eta(k)).map(|j| values[j]).unwrap_or(0.0))
                .collect();
            (Vec::new(), eta)
        }
        None => (Vec::new(), Vec::new()),
    };
    let count = |family: CutFamily| cuts.iter().filter(|c| c.family == family).count();
    let stats = SolveStats {
        method: config.method.name().into(),
        time_s: started.elapsed().as_secs_f64(),
        gap_pct: sol.objective.map(|_| 100.0 * sol.gap),
        n_beta_cuts: count(CutFamily::Beta),
        n_x_cuts: count(CutFamily::X),
        objective: sol.objective,
    };
    Ok(SolveResult {
        status: sol.status,
        objective: sol.objective,
        bound: sol.bound,
        first_stage_value: spec.first_stage_value(&first_stage),
        first_stage,
        eta,
        node_count: sol.node_count,
        preprocessing_cuts,
        stats,
        cuts,
    })
}

/// Recourse optimum of each scenario given a first-stage usage. `exact`
/// solves the integer recourse, otherwise its LP relaxation.
pub fn recourse_values(
    spec: &FormulationSpec,
    usage: &WavelinkUsage,
    scenarios: &[DemandMatrix],
    exact: bool,
    solver: &SolverConfig,
    backend: &dyn Backend,
    exec: &Execution,
) -> Result<Vec<f64>, Error> {
    let relaxation = if exact { Relaxation::IpIp } else { Relaxation::IpLp };
    let spec = spec.with_relaxation(relaxation);
    let solver = SolverConfig { time_limit: None, ..solver.clone() };
    exec.try_map_range(scenarios.len(), |k| {
        let m = build_recourse(&spec, usage, &scenarios[k])?;
        if exact {
            let sol = solve_mip_model(backend, &m.lp, &solver)?;
            sol.objective.ok_or_else(|| Error::Model(format!("integer recourse ended {:?}", sol.status)))
        } else {
            if m.num_vars() == 0 {
                return Ok(0.0);
            }
            let sol = backend.solve_lp(&m.lp, &solver)?;
            if !sol.is_optimal() {
                return Err(Error::Model(format!("recourse LP ended {:?}", sol.status)));
            }
            Ok(sol.objective)
        }
    })
}

/// First-stage value plus the mean recourse of `lightpaths` over `scenarios`.
pub fn evaluate(
    spec: &FormulationSpec,
    lightpaths: &[Lightpath],
    scenarios: &[DemandMatrix],
    exact: bool,
    solver: &SolverConfig,
    backend: &dyn Backend,
    exec: &Execution,
) -> Result<f64, Error> {
    let usage = WavelinkUsage::from_lightpaths(spec.topology(), lightpaths);
    let values = recourse_values(spec, &usage, scenarios, exact, solver, backend, exec)?;
    let mean = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / values.len() as f64 };
    Ok(spec.first_stage_value(lightpaths) + mean)
}
