//! Rolling-horizon simulation of dynamic traffic: provisioning runs
//! (maxRWA vs SmaxRWA) and defragmentation runs (minRWA vs SmaxLR targets).

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rwa_solver::{Backend, MipStatus, SolverConfig};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::benders::{self, BendersConfig, SolveResult};
use crate::model::{FormulationSpec, Problem, Relaxation};
use crate::par::Execution;
use crate::topology::{ActiveConnection, Lightpath, NetworkState, Topology};
use crate::traffic::{
    derive_seed, rng_from_seed, sample_holding, sample_pair, sample_requests, sample_scenarios, DemandMatrix, Request,
    TrafficParams,
};
use crate::Error;

const STREAM_ARRIVALS: u64 = 1;
const STREAM_SCENARIOS: u64 = 2;
const STREAM_INITIAL: u64 = 3;
const INITIAL_RETRIES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "maxrwa")]
    MaxRwa,
    #[serde(rename = "smaxrwa")]
    SmaxRwa,
    #[serde(rename = "minrwa-defrag")]
    MinRwaDefrag,
    #[serde(rename = "smaxlr-defrag")]
    SmaxLrDefrag,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::MaxRwa => "maxrwa",
            Policy::SmaxRwa => "smaxrwa",
            Policy::MinRwaDefrag => "minrwa-defrag",
            Policy::SmaxLrDefrag => "smaxlr-defrag",
        }
    }

    pub fn is_defrag(self) -> bool {
        matches!(self, Policy::MinRwaDefrag | Policy::SmaxLrDefrag)
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Policy::SmaxRwa | Policy::SmaxLrDefrag)
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub horizon: usize,
    pub repetitions: usize,
    pub policy: Policy,
    pub traffic: TrafficParams,
    pub scenario_count: usize,
    /// Connections present before the first defragmentation.
    pub initial_requests: usize,
    pub seed: u64,
    pub benders: BendersConfig,
    /// Solver settings per stage; hitting the time limit triggers the fallback.
    pub solver: SolverConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), Error> {
        self.traffic.validate()?;
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.policy.is_stochastic() && self.scenario_count == 0 {
            return Err(Error::Config(format!("policy {} needs scenario_count >= 1", self.policy.name())));
        }
        self.benders.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub arrivals: usize,
    pub granted: usize,
    pub blocked: usize,
    pub cumulative_arrivals: usize,
    pub cumulative_granted: usize,
    pub gos: f64,
    /// Occupied wavelinks at the end of the stage.
    pub spectrum_usage: usize,
    /// Occupied wavelinks right after rerouting (defragmentation runs).
    pub defrag_spectrum: Option<usize>,
    /// The policy solve hit its time limit and the deterministic fallback was used.
    pub fallback: bool,
    pub active_connections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub policy: Policy,
    pub seed: u64,
    pub run: usize,
    pub stages: Vec<StageRecord>,
}

impl SimTrace {
    pub fn fallbacks(&self) -> usize {
        self.stages.iter().filter(|s| s.fallback).count()
    }

    pub fn total_granted(&self) -> usize {
        self.stages.last().map_or(0, |s| s.cumulative_granted)
    }
}

/// One lightpath on a random wavelength along a random simple path, using
/// only wavelinks for which `usable` holds.
pub fn random_lightpath<R: Rng + ?Sized>(
    topo: &Topology,
    usable: &dyn Fn(usize, usize) -> bool,
    pair: (usize, usize),
    rng: &mut R,
) -> Option<Lightpath> {
    let mut wavelengths: Vec<usize> = (0..topo.wavelengths()).collect();
    wavelengths.shuffle(rng);
    for w in wavelengths {
        let mut visited = vec![false; topo.num_nodes()];
        visited[pair.0] = true;
        // Iterative randomized depth-first search: stack of candidate arcs per depth.
        let mut path: Vec<usize> = Vec::new();
        let mut stack: Vec<Vec<usize>> = vec![shuffled_out(topo, usable, pair.0, w, rng)];
        while let Some(frame) = stack.last_mut() {
            let Some(arc) = frame.pop() else {
                stack.pop();
                if let Some(a) = path.pop() {
                    visited[topo.arc(a).head] = false;
                }
                continue;
            };
            let head = topo.arc(arc).head;
            if visited[head] {
                continue;
            }
            path.push(arc);
            if head == pair.1 {
                return Some(Lightpath { source: pair.0, destination: pair.1, wavelength: w, path });
            }
            visited[head] = true;
            let next = shuffled_out(topo, usable, head, w, rng);
            stack.push(next);
        }
    }
    None
}

fn shuffled_out<R: Rng + ?Sized>(
    topo: &Topology,
    usable: &dyn Fn(usize, usize) -> bool,
    v: usize,
    w: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut arcs: Vec<usize> = topo.out_of(v).iter().copied().filter(|&a| usable(a, w)).collect();
    arcs.shuffle(rng);
    arcs
}

/// Greedily route `pairs` in the given order on free wavelinks of `state`
/// without conflicts. Pairs that cannot be routed are skipped, so the result
/// is a valid provisioning of a subset.
pub fn random_provisioning<R: Rng + ?Sized>(state: &NetworkState, pairs: &[(usize, usize)], rng: &mut R) -> Vec<Lightpath> {
    let topo = state.topology();
    let mut taken = vec![vec![false; topo.num_arcs()]; topo.wavelengths()];
    let mut out = Vec::new();
    for &pair in pairs {
        let usable = |a: usize, w: usize| state.is_free(a, w) && !taken[w][a];
        if let Some(lp) = random_lightpath(topo, &usable, pair, rng) {
            for &a in &lp.path {
                taken[lp.wavelength][a] = true;
            }
            out.push(lp);
        }
    }
    out
}

/// `count` connections with uniform random pairs, placed one by one on random
/// feasible lightpaths, with sampled holding times as expiry stages. A pair
/// that cannot be routed any more is redrawn, up to a bounded number of times.
pub fn random_state<R: Rng + ?Sized>(
    topo: &Arc<Topology>,
    count: usize,
    traffic: &TrafficParams,
    rng: &mut R,
) -> Result<NetworkState, Error> {
    let mut state = NetworkState::empty(Arc::clone(topo));
    for _ in 0..count {
        let mut placed = None;
        for _ in 0..INITIAL_RETRIES {
            let pair = sample_pair(topo.num_nodes(), rng);
            let usable = |a: usize, w: usize| state.is_free(a, w);
            if let Some(lp) = random_lightpath(topo, &usable, pair, rng) {
                placed = Some(lp);
                break;
            }
        }
        let Some(lightpath) = placed else {
            return Err(Error::Config(format!("could only place {} of {count} initial connections", state.connections().len())));
        };
        let expiry_stage = sample_holding(traffic, rng);
        state.apply_provisioning(vec![ActiveConnection { lightpath, expiry_stage }])?;
    }
    Ok(state)
}

/// Pre-sampled arrivals of one run, shared by every policy with the same seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub batches: Vec<Vec<Request>>,
}

impl SamplePath {
    pub fn sample(config: &SimConfig, num_nodes: usize, run: usize) -> Self {
        let batches = (0..config.horizon)
            .map(|t| {
                let mut rng = rng_from_seed(derive_seed(config.seed, &[run as u64, t as u64, STREAM_ARRIVALS]));
                sample_requests(&config.traffic, num_nodes, &mut rng)
            })
            .collect();
        Self { batches }
    }
}

fn demand_of(requests: &[Request]) -> DemandMatrix {
    let mut m = DemandMatrix::new();
    for r in requests {
        m.add(r.pair, 1);
    }
    m
}

fn spec_for(problem: Problem, state: &NetworkState, new_demand: DemandMatrix, current: DemandMatrix, scenarios: Vec<DemandMatrix>) -> FormulationSpec {
    FormulationSpec {
        problem,
        relaxation: Relaxation::IpLp,
        state: state.clone(),
        new_demand,
        current_demand: current,
        scenarios,
    }
}

fn solved(result: &SolveResult) -> bool {
    result.objective.is_some() && result.status != MipStatus::TimeLimit
}

/// Match granted lightpaths to requests of the same pair in arrival order.
fn assign(lightpaths: Vec<Lightpath>, requests: &[Request], stage: usize) -> Vec<ActiveConnection> {
    let mut by_pair: BTreeMap<(usize, usize), Vec<Lightpath>> = BTreeMap::new();
    for lp in lightpaths.into_iter().rev() {
        by_pair.entry((lp.source, lp.destination)).or_default().push(lp);
    }
    let mut out = Vec::new();
    for r in requests {
        if let Some(lp) = by_pair.get_mut(&r.pair).and_then(Vec::pop) {
            out.push(ActiveConnection { lightpath: lp, expiry_stage: stage + r.holding });
        }
    }
    out
}

struct Runner<'a> {
    config: &'a SimConfig,
    backend: &'a dyn Backend,
    exec: Execution,
    run: usize,
}

impl Runner<'_> {
    fn scenarios(&self, num_nodes: usize, stage: usize) -> Vec<DemandMatrix> {
        let seed = derive_seed(self.config.seed, &[self.run as u64, stage as u64, STREAM_SCENARIOS]);
        sample_scenarios(&self.config.traffic, num_nodes, self.config.scenario_count, seed).scenarios
    }

    fn solve(&self, spec: &FormulationSpec) -> Result<SolveResult, Error> {
        benders::solve(spec, &self.config.benders, &self.config.solver, self.backend, &self.exec)
    }

    /// Deterministic grant without a time limit.
    fn solve_exact(&self, spec: &FormulationSpec) -> Result<SolveResult, Error> {
        let solver = SolverConfig { time_limit: None, ..self.config.solver.clone() };
        let r = benders::solve(spec, &self.config.benders, &solver, self.backend, &self.exec)?;
        if r.objective.is_none() {
            return Err(Error::Model(format!("{:?} ended {:?}", spec.problem, r.status)));
        }
        Ok(r)
    }

    /// Lightpaths granted to `requests` on `state`; the flag marks a fallback.
    fn grant(&self, state: &NetworkState, requests: &[Request], stage: usize, stochastic: bool) -> Result<(Vec<Lightpath>, bool), Error> {
        if requests.is_empty() {
            return Ok((Vec::new(), false));
        }
        let demand = demand_of(requests);
        if stochastic {
            let scenarios = self.scenarios(state.topology().num_nodes(), stage);
            let spec = spec_for(Problem::SmaxRwa, state, demand.clone(), DemandMatrix::new(), scenarios);
            let r = self.solve(&spec)?;
            if solved(&r) {
                return Ok((r.first_stage, false));
            }
            log::warn!("run {} stage {stage}: SmaxRWA ended {:?}, granting with maxRWA", self.run, r.status);
            let spec = spec_for(Problem::MaxRwa, state, demand, DemandMatrix::new(), Vec::new());
            return Ok((self.solve_exact(&spec)?.first_stage, true));
        }
        let spec = spec_for(Problem::MaxRwa, state, demand, DemandMatrix::new(), Vec::new());
        Ok((self.solve_exact(&spec)?.first_stage, false))
    }

    fn record(&self, stage: usize, arrivals: usize, granted: usize, prev: Option<&StageRecord>, state: &NetworkState) -> StageRecord {
        let cumulative_arrivals = prev.map_or(0, |p| p.cumulative_arrivals) + arrivals;
        let cumulative_granted = prev.map_or(0, |p| p.cumulative_granted) + granted;
        StageRecord {
            stage,
            arrivals,
            granted,
            blocked: arrivals - granted,
            cumulative_arrivals,
            cumulative_granted,
            gos: if cumulative_arrivals == 0 { 1.0 } else { cumulative_granted as f64 / cumulative_arrivals as f64 },
            spectrum_usage: state.spectrum_usage(),
            defrag_spectrum: None,
            fallback: false,
            active_connections: state.connections().len(),
        }
    }

    fn provisioning(&self, topo: &Arc<Topology>) -> Result<SimTrace, Error> {
        let path = SamplePath::sample(self.config, topo.num_nodes(), self.run);
        let mut state = NetworkState::empty(Arc::clone(topo));
        let mut stages: Vec<StageRecord> = Vec::new();
        for (t, batch) in path.batches.iter().enumerate() {
            let (lightpaths, fallback) = self.grant(&state, batch, t, self.config.policy == Policy::SmaxRwa)?;
            let granted = lightpaths.len();
            state.apply_provisioning(assign(lightpaths, batch, t))?;
            let mut rec = self.record(t, batch.len(), granted, stages.last(), &state);
            rec.fallback = fallback;
            stages.push(rec);
            state.drop_expired(t + 1);
        }
        Ok(SimTrace { policy: self.config.policy, seed: self.config.seed, run: self.run, stages })
    }

    /// Reroute the current connections onto the policy's target provisioning.
    fn defragment(&self, state: &mut NetworkState, stage: usize) -> Result<bool, Error> {
        if state.connections().is_empty() {
            return Ok(false);
        }
        let mut current = DemandMatrix::new();
        for c in state.connections() {
            current.add((c.lightpath.source, c.lightpath.destination), 1);
        }
        let (target, fallback) = if self.config.policy == Policy::SmaxLrDefrag {
            let scenarios = self.scenarios(state.topology().num_nodes(), stage);
            let spec = spec_for(Problem::SmaxLr, state, DemandMatrix::new(), current.clone(), scenarios);
            let r = self.solve(&spec)?;
            if solved(&r) {
                (r.first_stage, false)
            } else {
                log::warn!("run {} stage {stage}: SmaxLR ended {:?}, rerouting to minRWA", self.run, r.status);
                let spec = spec_for(Problem::MinRwa, state, DemandMatrix::new(), current, Vec::new());
                (self.solve_exact(&spec)?.first_stage, true)
            }
        } else {
            let spec = spec_for(Problem::MinRwa, state, DemandMatrix::new(), current, Vec::new());
            (self.solve_exact(&spec)?.first_stage, false)
        };
        let mut by_pair: BTreeMap<(usize, usize), Vec<Lightpath>> = BTreeMap::new();
        for lp in target.into_iter().rev() {
            by_pair.entry((lp.source, lp.destination)).or_default().push(lp);
        }
        let mut old: Vec<ActiveConnection> = state.connections().to_vec();
        old.sort_by_key(|c| c.expiry_stage);
        let mut rerouted = Vec::with_capacity(old.len());
        for c in old {
            let pair = (c.lightpath.source, c.lightpath.destination);
            let lp = by_pair
                .get_mut(&pair)
                .and_then(Vec::pop)
                .ok_or_else(|| Error::Model(format!("target provisioning lacks a lightpath for {pair:?}")))?;
            rerouted.push(ActiveConnection { lightpath: lp, expiry_stage: c.expiry_stage });
        }
        state.replace_connections(rerouted)?;
        Ok(fallback)
    }

    fn defrag(&self, topo: &Arc<Topology>) -> Result<SimTrace, Error> {
        let path = SamplePath::sample(self.config, topo.num_nodes(), self.run);
        let mut rng = rng_from_seed(derive_seed(self.config.seed, &[self.run as u64, STREAM_INITIAL]));
        let mut state = random_state(topo, self.config.initial_requests, &self.config.traffic, &mut rng)?;
        let mut stages: Vec<StageRecord> = Vec::new();
        for (t, batch) in path.batches.iter().enumerate() {
            let fallback = self.defragment(&mut state, t)?;
            let defrag_spectrum = state.spectrum_usage();
            state.drop_expired(t);
            let (lightpaths, _) = self.grant(&state, batch, t, false)?;
            let granted = lightpaths.len();
            state.apply_provisioning(assign(lightpaths, batch, t))?;
            let mut rec = self.record(t, batch.len(), granted, stages.last(), &state);
            rec.fallback = fallback;
            rec.defrag_spectrum = Some(defrag_spectrum);
            stages.push(rec);
        }
        Ok(SimTrace { policy: self.config.policy, seed: self.config.seed, run: self.run, stages })
    }
}

/// Provisioning run: arrivals are granted, then connections expiring at the
/// end of the stage are dropped. Expiry is the grant stage plus the holding time.
pub fn run_provisioning(topo: &Arc<Topology>, config: &SimConfig, run: usize, backend: &dyn Backend) -> Result<SimTrace, Error> {
    config.validate()?;
    if config.policy.is_defrag() {
        return Err(Error::Config(format!("{} is a defragmentation policy", config.policy.name())));
    }
    Runner { config, backend, exec: Execution::sequential(), run }.provisioning(topo)
}

/// Defragmentation run: reroute to the policy target, drop expired
/// connections, then grant arrivals with deterministic maxRWA.
pub fn run_defrag(topo: &Arc<Topology>, config: &SimConfig, run: usize, backend: &dyn Backend) -> Result<SimTrace, Error> {
    config.validate()?;
    if !config.policy.is_defrag() {
        return Err(Error::Config(format!("{} is not a defragmentation policy", config.policy.name())));
    }
    Runner { config, backend, exec: Execution::sequential(), run }.defrag(topo)
}

/// All repetitions of `config`, runs in parallel.
pub fn run_all(topo: &Arc<Topology>, config: &SimConfig, backend: &dyn Backend, exec: &Execution) -> Result<Vec<SimTrace>, Error> {
    config.validate()?;
    exec.try_map_range(config.repetitions, |run| {
        if config.policy.is_defrag() {
            run_defrag(topo, config, run, backend)
        } else {
            run_provisioning(topo, config, run, backend)
        }
    })
}

/// `100 (a − b) / b`, with `b = 0` mapped to 0 when `a = 0` and to 100 otherwise.
pub fn relative_pct(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        100.0 * (a - b) / b
    } else if a == b {
        0.0
    } else {
        100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub stage: usize,
    pub rel_granted_pct: f64,
    pub rel_granted_std: f64,
    pub rel_gos_pct: f64,
    pub rel_gos_std: f64,
    pub rel_spectrum_pct: f64,
    pub rel_spectrum_std: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Per-stage relative difference of A over B, averaged over paired runs.
/// Positive means A granted more, had higher GoS, or used more spectrum.
/// Granted counts are cumulative.
pub fn compare(a: &[SimTrace], b: &[SimTrace]) -> Result<Vec<ComparisonRow>, Error> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::Config(format!("cannot pair {} runs with {} runs", a.len(), b.len())));
    }
    for (x, y) in a.iter().zip(b) {
        if x.seed != y.seed || x.run != y.run || x.stages.len() != y.stages.len() {
            return Err(Error::Config(format!("run {} and run {} are not paired", x.run, y.run)));
        }
    }
    let horizon = a[0].stages.len();
    let mut rows = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let series = |f: &dyn Fn(&StageRecord) -> f64| -> (f64, f64) {
            let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| relative_pct(f(&x.stages[t]), f(&y.stages[t]))).collect();
            mean_std(&v)
        };
        let (g, gs) = series(&|s| s.cumulative_granted as f64);
        let (o, os) = series(&|s| s.gos);
        let (p, ps) = series(&|s| s.spectrum_usage as f64);
        rows.push(ComparisonRow {
            stage: t,
            rel_granted_pct: g,
            rel_granted_std: gs,
            rel_gos_pct: o,
            rel_gos_std: os,
            rel_spectrum_pct: p,
            rel_spectrum_std: ps,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// `P(W ≥ wins)` for `W ~ Binomial(wins + losses, 1/2)`.
    pub p_value: f64,
}

/// One-sided sign test that `a` tends to exceed `b`; ties are dropped.
pub fn sign_test(pairs: &[(f64, f64)]) -> SignTest {
    let wins = pairs.iter().filter(|(a, b)| a > b).count();
    let losses = pairs.iter().filter(|(a, b)| a < b).count();
    let ties = pairs.len() - wins - losses;
    let n = wins + losses;
    let p_value = if wins == 0 {
        1.0
    } else {
        let bin = Binomial::new(0.5, n as u64).expect("valid binomial");
        1.0 - bin.cdf(wins as u64 - 1)
    };
    SignTest { wins, losses, ties, p_value }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_handles_zero_baseline() {
        assert_eq!(relative_pct(0.0, 0.0), 0.0);
        assert_eq!(relative_pct(3.0, 0.0), 100.0);
        assert_eq!(relative_pct(12.0, 10.0), 20.0);
    }

    #[test]
    fn sign_test_exact_values() {
        // 5 wins of 5: p = 1/32.
        let t = sign_test(&[(1.0, 0.0); 5]);
        assert!((t.p_value - 1.0 / 32.0).abs() < 1e-12);
        let t = sign_test(&[(0.0, 0.0), (1.0, 2.0)]);
        assert_eq!((t.wins, t.losses, t.ties), (0, 1, 1));
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn random_lightpaths_are_simple() {
        let topo = Topology::ring(6, 2);
        let state = NetworkState::empty(Arc::new(topo));
        let mut rng = rng_from_seed(4);
        let pairs = [(0, 3), (1, 4), (2, 5), (3, 0), (0, 3)];
        let lps = random_provisioning(&state, &pairs, &mut rng);
        assert!(!lps.is_empty());
        for lp in &lps {
            assert!(state.topology().is_simple_path(lp.source, lp.destination, &lp.path));
        }
        let mut copy = state.clone();
        let conns = lps.into_iter().map(|lightpath| ActiveConnection { lightpath, expiry_stage: 1 }).collect();
        copy.apply_provisioning(conns).unwrap();
    }
}
