//! Sample average approximation statistics and the expected value of the
//! stochastic solution.

use rwa_solver::{Backend, SolverConfig};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::benders::{self, evaluate, BendersConfig, SolveResult};
use crate::model::{FormulationSpec, WavelinkUsage};
use crate::par::Execution;
use crate::traffic::{derive_seed, sample_scenarios, DemandMatrix, TrafficParams};
use crate::Error;

pub const CONFIDENCE: f64 = 0.95;

/// Mean and half-width of a two-sided t confidence interval.
pub fn t_interval(values: &[f64], confidence: f64) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
    let q = t.inverse_cdf(0.5 + confidence / 2.0);
    (mean, q * (var / n as f64).sqrt())
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaaReport {
    pub scenario_level: usize,
    pub repetitions: usize,
    pub ub_mean: f64,
    pub ub_width: f64,
    pub lb_mean: f64,
    pub lb_width: f64,
    /// Worst case over the two intervals, relative to the lowest lower bound.
    pub gap_pct: Option<f64>,
    /// Repetitions that hit the time limit and were left out.
    pub excluded: Vec<usize>,
    /// Repetition whose solution gave the lower bound.
    pub best_repetition: usize,
}

/// `(ub_hi − lb_lo) / lb_lo` in percent, when the lower end is positive.
pub fn worst_case_gap_pct(ub_mean: f64, ub_width: f64, lb_mean: f64, lb_width: f64) -> Option<f64> {
    let lb_lo = lb_mean - lb_width;
    (lb_lo > 0.0).then(|| 100.0 * ((ub_mean + ub_width) - lb_lo) / lb_lo)
}

#[derive(Clone)]
pub struct SaaSetup<'a> {
    /// Instance whose `scenarios` are replaced by each sample.
    pub spec: &'a FormulationSpec,
    pub traffic: TrafficParams,
    pub benders: BendersConfig,
    pub solver: SolverConfig,
    pub backend: &'a dyn Backend,
    pub exec: Execution,
    /// Evaluate candidate solutions with integer recourse.
    pub exact_recourse: bool,
}

/// Solve `repetitions` independent SAA problems with `level` scenarios each
/// (upper bound), then evaluate every solution on a common sample of
/// `eval_size` fresh scenarios and keep the best (lower bound).
pub fn saa_analysis(setup: &SaaSetup<'_>, level: usize, repetitions: usize, eval_size: usize, seed: u64) -> Result<SaaReport, Error> {
    if repetitions < 2 {
        return Err(Error::Config(format!("SAA needs at least 2 repetitions, got {repetitions}")));
    }
    if level == 0 || eval_size < 2 {
        return Err(Error::Config("SAA needs a positive level and an evaluation sample of at least 2".into()));
    }
    let nodes = setup.spec.topology().num_nodes();
    let solves: Vec<SolveResult> = setup.exec.try_map_range(repetitions, |i| {
        let sample = sample_scenarios(&setup.traffic, nodes, level, derive_seed(seed, &[0, i as u64]));
        let spec = setup.spec.with_scenarios(sample.scenarios);
        benders::solve(&spec, &setup.benders, &setup.solver, setup.backend, &setup.exec)
    })?;
    let mut excluded = Vec::new();
    let mut kept = Vec::new();
    for (i, r) in solves.iter().enumerate() {
        match r.objective {
            Some(_) if !r.timed_out() => kept.push(i),
            _ => excluded.push(i),
        }
    }
    if kept.len() < 2 {
        return Err(Error::Model(format!("only {} SAA repetitions finished", kept.len())));
    }
    let ub: Vec<f64> = kept.iter().map(|&i| solves[i].objective.unwrap()).collect();
    let (ub_mean, ub_width) = t_interval(&ub, CONFIDENCE);

    let eval = sample_scenarios(&setup.traffic, nodes, eval_size, derive_seed(seed, &[1]));
    let mut best: Option<(usize, f64, f64)> = None;
    for &i in &kept {
        let first = &solves[i].first_stage;
        let usage = WavelinkUsage::from_lightpaths(setup.spec.topology(), first);
        let q = benders::recourse_values(
            setup.spec,
            &usage,
            &eval.scenarios,
            setup.exact_recourse,
            &setup.solver,
            setup.backend,
            &setup.exec,
        )?;
        let base = setup.spec.first_stage_value(first);
        let totals: Vec<f64> = q.iter().map(|v| base + v).collect();
        let (mean, width) = t_interval(&totals, CONFIDENCE);
        if best.is_none_or(|(_, m, _)| mean > m) {
            best = Some((i, mean, width));
        }
    }
    let (best_repetition, lb_mean, lb_width) = best.expect("at least two kept repetitions");
    Ok(SaaReport {
        scenario_level: level,
        repetitions,
        ub_mean,
        ub_width,
        lb_mean,
        lb_width,
        gap_pct: worst_case_gap_pct(ub_mean, ub_width, lb_mean, lb_width),
        excluded,
        best_repetition,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvssReport {
    pub evss: f64,
    pub sigma_det: f64,
    /// In-sample value of the stochastic solution.
    pub stochastic_value: f64,
    /// In-sample value of each single-scenario solution.
    pub deterministic_values: Vec<f64>,
}

/// Compare the stochastic solution over `spec.scenarios` with the solutions
/// of each single-scenario problem, all evaluated on the same sample.
pub fn evss(
    spec: &FormulationSpec,
    config: &BendersConfig,
    solver: &SolverConfig,
    backend: &dyn Backend,
    exec: &Execution,
) -> Result<EvssReport, Error> {
    let scenarios: &[DemandMatrix] = &spec.scenarios;
    if scenarios.len() < 2 {
        return Err(Error::Config(format!("EVSS needs at least 2 scenarios, got {}", scenarios.len())));
    }
    let stochastic = benders::solve(spec, config, solver, backend, exec)?;
    if stochastic.objective.is_none() {
        return Err(Error::Model(format!("stochastic problem ended {:?}", stochastic.status)));
    }
    let stochastic_value = evaluate(spec, &stochastic.first_stage, scenarios, false, solver, backend, exec)?;
    let deterministic_values = exec.try_map_range(scenarios.len(), |k| {
        let single = spec.with_scenarios(vec![scenarios[k].clone()]);
        let r = benders::solve(&single, config, solver, backend, exec)?;
        if r.objective.is_none() {
            return Err(Error::Model(format!("single-scenario problem {k} ended {:?}", r.status)));
        }
        evaluate(spec, &r.first_stage, scenarios, false, solver, backend, exec)
    })?;
    let mean = deterministic_values.iter().sum::<f64>() / deterministic_values.len() as f64;
    Ok(EvssReport {
        evss: stochastic_value - mean,
        sigma_det: std_dev(&deterministic_values),
        stochastic_value,
        deterministic_values,
    })
}
