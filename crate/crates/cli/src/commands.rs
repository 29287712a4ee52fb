use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rwa_core::benders::{self, SolveStats};
use rwa_core::model::{FormulationSpec, Problem, Relaxation};
use rwa_core::par::Execution;
use rwa_core::saa::{self, SaaSetup};
use rwa_core::sim::{self, Policy, SimConfig, SimTrace, StageRecord};
use rwa_core::solver::{MipStatus, ReferenceBackend};
use rwa_core::topology::{Lightpath, Network, NetworkState, Topology};
use rwa_core::traffic::{derive_seed, rng_from_seed, sample_batch, sample_scenarios, DemandMatrix};
use serde::Serialize;

use crate::config::{ExperimentConfig, DATA_DIR_ENV};
use crate::output::OutputDir;
use crate::RunArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success = 0,
    Error = 1,
    /// A solve stopped at a time or node limit.
    Limit = 2,
}

struct Prepared {
    config: ExperimentConfig,
    topology: Arc<Topology>,
    exec: Execution,
    out: OutputDir,
}

fn prepare(args: &RunArgs) -> Result<Prepared> {
    let config = ExperimentConfig::load(&args.config, &args.sets)?;
    let topology = Arc::new(config.load_topology()?);
    let root: PathBuf = match (&args.output, &config.output_dir) {
        (Some(p), _) | (None, Some(p)) => p.clone(),
        (None, None) => bail!("no output directory: set `output_dir` in the config or pass --output"),
    };
    let out = OutputDir::create(&root, args.force, &config)?;
    Ok(Prepared { config, topology, exec: Execution::with_threads(args.threads), out })
}

fn status_name(s: MipStatus) -> &'static str {
    match s {
        MipStatus::Optimal => "optimal",
        MipStatus::Infeasible => "infeasible",
        MipStatus::Unbounded => "unbounded",
        MipStatus::TimeLimit => "time_limit",
        MipStatus::NodeLimit => "node_limit",
    }
}

fn outcome_of(s: MipStatus) -> Outcome {
    match s {
        MipStatus::Optimal => Outcome::Success,
        MipStatus::TimeLimit | MipStatus::NodeLimit => Outcome::Limit,
        MipStatus::Infeasible | MipStatus::Unbounded => Outcome::Error,
    }
}

/// The configured instance: initial connections, new requests and scenarios,
/// each drawn from its own stream of `instance.seed`.
fn build_instance(config: &ExperimentConfig, topology: &Arc<Topology>) -> Result<FormulationSpec> {
    let inst = &config.instance;
    let traffic = config.traffic()?;
    let n = topology.num_nodes();
    let mut rng = rng_from_seed(derive_seed(inst.seed, &[0]));
    let state: NetworkState = sim::random_state(topology, inst.initial_requests, &traffic, &mut rng)?;
    let new_demand = match &inst.demand {
        Some(d) => {
            if let Some(((s, t), _)) = d.pairs().find(|&((s, t), _)| s >= n || t >= n) {
                bail!("instance.demand: pair ({s},{t}) references a node >= {n}");
            }
            d.clone()
        }
        None => sample_batch(&traffic, n, &mut rng_from_seed(derive_seed(inst.seed, &[1]))),
    };
    let scenarios = if inst.problem.is_stochastic() {
        sample_scenarios(&traffic, n, inst.scenarios, derive_seed(inst.seed, &[2])).scenarios
    } else {
        Vec::new()
    };
    let (new_demand, current_demand) = if inst.problem.reroutes() {
        let current = DemandMatrix::from_pairs(state.connections().iter().map(|c| ((c.lightpath.source, c.lightpath.destination), 1)));
        (DemandMatrix::new(), current)
    } else {
        (new_demand, DemandMatrix::new())
    };
    Ok(FormulationSpec { problem: inst.problem, relaxation: inst.relaxation, state, new_demand, current_demand, scenarios })
}

#[derive(Serialize)]
struct SolveReport<'a> {
    problem: Problem,
    relaxation: Relaxation,
    status: &'static str,
    objective: Option<f64>,
    bound: f64,
    first_stage_value: f64,
    eta: &'a [f64],
    node_count: usize,
    preprocessing_cuts: usize,
    stats: &'a SolveStats,
    new_demand: &'a DemandMatrix,
    current_demand: &'a DemandMatrix,
    scenario_count: usize,
    provisioning: &'a [Lightpath],
}

pub fn solve(args: &RunArgs) -> Result<Outcome> {
    let cx = prepare(args)?;
    let spec = build_instance(&cx.config, &cx.topology)?;
    let r = benders::solve(&spec, &cx.config.benders, &cx.config.solver(), &ReferenceBackend, &cx.exec)?;
    cx.out.write_json(
        "result.json",
        &SolveReport {
            problem: spec.problem,
            relaxation: spec.relaxation,
            status: status_name(r.status),
            objective: r.objective,
            bound: r.bound,
            first_stage_value: r.first_stage_value,
            eta: &r.eta,
            node_count: r.node_count,
            preprocessing_cuts: r.preprocessing_cuts,
            stats: &r.stats,
            new_demand: &spec.new_demand,
            current_demand: &spec.current_demand,
            scenario_count: spec.scenarios.len(),
            provisioning: &r.first_stage,
        },
    )?;
    cx.out.write_json("scenarios.json", &spec.scenarios)?;
    println!(
        "{}: {} objective {} ({:.2}s)",
        r.stats.method,
        status_name(r.status),
        r.objective.map_or("none".into(), |o| format!("{o:.6}")),
        r.stats.time_s
    );
    Ok(outcome_of(r.status))
}

#[derive(Serialize)]
struct TraceRow {
    policy: &'static str,
    run: usize,
    seed: u64,
    stage: usize,
    arrivals: usize,
    granted: usize,
    blocked: usize,
    cumulative_arrivals: usize,
    cumulative_granted: usize,
    gos: f64,
    spectrum_usage: usize,
    defrag_spectrum: Option<usize>,
    fallback: bool,
    active_connections: usize,
}

fn trace_rows(trace: &SimTrace) -> impl Iterator<Item = TraceRow> + '_ {
    trace.stages.iter().map(move |s: &StageRecord| TraceRow {
        policy: trace.policy.name(),
        run: trace.run,
        seed: trace.seed,
        stage: s.stage,
        arrivals: s.arrivals,
        granted: s.granted,
        blocked: s.blocked,
        cumulative_arrivals: s.cumulative_arrivals,
        cumulative_granted: s.cumulative_granted,
        gos: s.gos,
        spectrum_usage: s.spectrum_usage,
        defrag_spectrum: s.defrag_spectrum,
        fallback: s.fallback,
        active_connections: s.active_connections,
    })
}

#[derive(Serialize)]
struct PolicySummary {
    policy: Policy,
    mean_granted: f64,
    mean_gos: f64,
    fallbacks: usize,
}

#[derive(Serialize)]
struct SimSummary {
    seed: u64,
    repetitions: usize,
    horizon: usize,
    policies: Vec<PolicySummary>,
    /// Total granted per run, first policy against the second.
    sign_test: Option<sim::SignTest>,
}

pub fn simulate(args: &RunArgs) -> Result<Outcome> {
    let cx = prepare(args)?;
    let s = &cx.config.simulation;
    let traffic = cx.config.traffic()?;
    let mut all: Vec<Vec<SimTrace>> = Vec::new();
    for &policy in &s.policies {
        let config = SimConfig {
            horizon: s.horizon,
            repetitions: s.repetitions,
            policy,
            traffic,
            scenario_count: s.scenario_count,
            initial_requests: s.initial_requests,
            seed: s.seed,
            benders: cx.config.benders.clone(),
            solver: cx.config.solver(),
        };
        all.push(sim::run_all(&cx.topology, &config, &ReferenceBackend, &cx.exec)?);
    }
    let rows: Vec<TraceRow> = all.iter().flatten().flat_map(trace_rows).collect();
    cx.out.write_csv("traces.csv", &rows)?;
    let mut sign_test = None;
    if let [a, b] = all.as_slice() {
        cx.out.write_csv("comparison.csv", &sim::compare(a, b)?)?;
        let pairs: Vec<(f64, f64)> = a.iter().zip(b).map(|(x, y)| (x.total_granted() as f64, y.total_granted() as f64)).collect();
        sign_test = Some(sim::sign_test(&pairs));
    }
    let policies: Vec<PolicySummary> = all
        .iter()
        .zip(&s.policies)
        .map(|(traces, &policy)| {
            let n = traces.len() as f64;
            PolicySummary {
                policy,
                mean_granted: traces.iter().map(|t| t.total_granted() as f64).sum::<f64>() / n,
                mean_gos: traces.iter().map(|t| t.stages.last().map_or(1.0, |st| st.gos)).sum::<f64>() / n,
                fallbacks: traces.iter().map(SimTrace::fallbacks).sum(),
            }
        })
        .collect();
    for p in &policies {
        println!("{}: mean granted {:.2}, final GoS {:.4}, fallbacks {}", p.policy.name(), p.mean_granted, p.mean_gos, p.fallbacks);
    }
    if let Some(t) = &sign_test {
        println!("sign test: {} wins, {} losses, {} ties, p = {:.4}", t.wins, t.losses, t.ties, t.p_value);
    }
    let fallbacks: usize = policies.iter().map(|p| p.fallbacks).sum();
    cx.out.write_json("summary.json", &SimSummary { seed: s.seed, repetitions: s.repetitions, horizon: s.horizon, policies, sign_test })?;
    Ok(if fallbacks > 0 { Outcome::Limit } else { Outcome::Success })
}

fn stochastic_instance(cx: &Prepared) -> Result<FormulationSpec> {
    if !cx.config.instance.problem.is_stochastic() {
        bail!("instance.problem must be smaxrwa or smaxlr");
    }
    build_instance(&cx.config, &cx.topology)
}

pub fn saa(args: &RunArgs) -> Result<Outcome> {
    let cx = prepare(args)?;
    let spec = stochastic_instance(&cx)?;
    let s = &cx.config.saa;
    let setup = SaaSetup {
        spec: &spec,
        traffic: cx.config.traffic()?,
        benders: cx.config.benders.clone(),
        solver: cx.config.solver(),
        backend: &ReferenceBackend,
        exec: cx.exec.clone(),
        exact_recourse: s.exact_recourse,
    };
    let mut reports = Vec::new();
    for &level in &s.levels {
        let r = saa::saa_analysis(&setup, level, s.repetitions, s.evaluation_size, derive_seed(s.seed, &[level as u64]))?;
        println!(
            "|S| = {level}: UB {:.4} ± {:.4}, LB {:.4} ± {:.4}, gap {}",
            r.ub_mean,
            r.ub_width,
            r.lb_mean,
            r.lb_width,
            r.gap_pct.map_or("n/a".into(), |g| format!("{g:.2}%"))
        );
        reports.push(r);
    }
    let excluded: usize = reports.iter().map(|r| r.excluded.len()).sum();
    let rows: Vec<SaaRow> = reports.iter().map(SaaRow::from).collect();
    cx.out.write_csv("saa.csv", &rows)?;
    cx.out.write_json("saa.json", &reports)?;
    Ok(if excluded > 0 { Outcome::Limit } else { Outcome::Success })
}

#[derive(Serialize)]
struct SaaRow {
    scenarios: usize,
    repetitions: usize,
    ub_mean: f64,
    ub_width: f64,
    lb_mean: f64,
    lb_width: f64,
    gap_pct: Option<f64>,
    excluded: usize,
}

impl From<&saa::SaaReport> for SaaRow {
    fn from(r: &saa::SaaReport) -> Self {
        Self {
            scenarios: r.scenario_level,
            repetitions: r.repetitions,
            ub_mean: r.ub_mean,
            ub_width: r.ub_width,
            lb_mean: r.lb_mean,
            lb_width: r.lb_width,
            gap_pct: r.gap_pct,
            excluded: r.excluded.len(),
        }
    }
}

#[derive(Serialize)]
struct EvssRow {
    scenarios: usize,
    evss: f64,
    sigma_det: f64,
    stochastic_value: f64,
    mean_deterministic_value: f64,
}

pub fn evss(args: &RunArgs) -> Result<Outcome> {
    let cx = prepare(args)?;
    let spec = stochastic_instance(&cx)?;
    let r = saa::evss(&spec, &cx.config.benders, &cx.config.solver(), &ReferenceBackend, &cx.exec)?;
    let mean = r.deterministic_values.iter().sum::<f64>() / r.deterministic_values.len() as f64;
    println!("EVSS {:.6} (sigma {:.6}); stochastic {:.6}, deterministic mean {:.6}", r.evss, r.sigma_det, r.stochastic_value, mean);
    cx.out.write_csv(
        "evss.csv",
        &[EvssRow { scenarios: spec.scenarios.len(), evss: r.evss, sigma_det: r.sigma_det, stochastic_value: r.stochastic_value, mean_deterministic_value: mean }],
    )?;
    cx.out.write_json("evss.json", &r)?;
    Ok(Outcome::Success)
}

pub fn validate_topology(targets: &[String]) -> Result<Outcome> {
    let dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
    let targets: Vec<String> = if targets.is_empty() { Network::ALL.iter().map(|n| n.name().to_string()).collect() } else { targets.to_vec() };
    let mut ok = true;
    for t in &targets {
        let (topo, network) = match Network::from_name(t) {
            Some(n) => (n.load(dir.as_deref(), 1), Some(n)),
            None => {
                let path = Path::new(t);
                let stem = path.file_stem().and_then(|s| s.to_str()).and_then(Network::from_name);
                (Topology::from_file(path, 1), stem)
            }
        };
        let topo = match topo.with_context(|| format!("loading {t}")) {
            Ok(topo) => topo,
            Err(e) => {
                println!("{t}: FAIL {e:#}");
                ok = false;
                continue;
            }
        };
        let check = network.map(|n| n.validate(&topo));
        let verdict = match &check {
            Some(Ok(())) => "OK".to_string(),
            Some(Err(e)) => {
                ok = false;
                format!("FAIL {e}")
            }
            None => "parsed (no published size to compare)".to_string(),
        };
        println!("{t}: {} nodes, {} arcs: {verdict}", topo.num_nodes(), topo.num_arcs());
    }
    Ok(if ok { Outcome::Success } else { Outcome::Error })
}
