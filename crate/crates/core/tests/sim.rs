mod common;

use std::sync::Arc;

use rwa_core::benders::BendersConfig;
use rwa_core::par::Execution;
use rwa_core::sim::{compare, random_state, run_all, run_defrag, run_provisioning, Policy, SamplePath, SimConfig, SimTrace};
use rwa_core::solver::ReferenceBackend;
use rwa_core::topology::Topology;
use rwa_core::traffic::{rng_from_seed, TrafficParams};

fn config(policy: Policy, rate: f64, hold: f64, horizon: usize) -> SimConfig {
    SimConfig {
        horizon,
        repetitions: 4,
        policy,
        traffic: TrafficParams::new(rate, hold).unwrap(),
        scenario_count: 3,
        initial_requests: if policy.is_defrag() { 4 } else { 0 },
        seed: 11,
        benders: BendersConfig::default(),
        solver: common::solver(),
    }
}

fn check_bookkeeping(trace: &SimTrace, batches: &SamplePath, capacity: usize) {
    let (mut arrivals, mut granted) = (0, 0);
    for (t, s) in trace.stages.iter().enumerate() {
        assert_eq!(s.stage, t);
        assert_eq!(s.arrivals, batches.batches[t].len());
        assert_eq!(s.granted + s.blocked, s.arrivals);
        arrivals += s.arrivals;
        granted += s.granted;
        assert_eq!((s.cumulative_arrivals, s.cumulative_granted), (arrivals, granted));
        let gos = if arrivals == 0 { 1.0 } else { granted as f64 / arrivals as f64 };
        assert!((s.gos - gos).abs() < 1e-12, "stage {t}: gos {} vs {gos}", s.gos);
        assert!(s.spectrum_usage <= capacity);
        assert_eq!(s.active_connections == 0, s.spectrum_usage == 0);
        assert!(s.active_connections <= s.spectrum_usage);
    }
}

#[test]
fn stage_records_are_consistent() {
    let topo = Arc::new(Topology::ring(5, 2));
    for policy in [Policy::MaxRwa, Policy::SmaxRwa, Policy::MinRwaDefrag, Policy::SmaxLrDefrag] {
        let cfg = config(policy, 2.0, 3.0, 6);
        for run in 0..2 {
            let trace = if policy.is_defrag() {
                run_defrag(&topo, &cfg, run, &ReferenceBackend).unwrap()
            } else {
                run_provisioning(&topo, &cfg, run, &ReferenceBackend).unwrap()
            };
            assert_eq!(trace.policy, policy);
            assert_eq!(trace.stages.len(), cfg.horizon);
            assert_eq!(trace.fallbacks(), 0);
            check_bookkeeping(&trace, &SamplePath::sample(&cfg, 5, run), topo.num_arcs() * 2);
            assert!(trace.stages.iter().all(|s| s.defrag_spectrum.is_some() == policy.is_defrag()));
        }
    }
}

#[test]
fn uncongested_network_grants_everything() {
    let topo = Arc::new(Topology::ring(5, 40));
    for policy in [Policy::MaxRwa, Policy::SmaxRwa] {
        let traces = run_all(&topo, &config(policy, 1.0, 1.0, 8), &ReferenceBackend, &Execution::sequential()).unwrap();
        for t in &traces {
            assert!(t.stages.iter().all(|s| s.blocked == 0 && s.gos == 1.0), "{policy:?}");
        }
    }
}

#[test]
fn runs_replay_identically_in_parallel() {
    let topo = Arc::new(Topology::ring(6, 2));
    let cfg = config(Policy::SmaxRwa, 2.0, 4.0, 5);
    let serial = run_all(&topo, &cfg, &ReferenceBackend, &Execution::sequential()).unwrap();
    let parallel = run_all(&topo, &cfg, &ReferenceBackend, &Execution::with_threads(Some(3))).unwrap();
    assert_eq!(serial, parallel);
    assert_eq!(serial.iter().map(|t| t.run).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    let again = run_provisioning(&topo, &cfg, 2, &ReferenceBackend).unwrap();
    assert_eq!(again, serial[2]);
}

#[test]
fn policies_share_arrivals() {
    let topo = Arc::new(Topology::ring(6, 2));
    let a = run_all(&topo, &config(Policy::SmaxRwa, 2.0, 4.0, 5), &ReferenceBackend, &Execution::sequential()).unwrap();
    let b = run_all(&topo, &config(Policy::MaxRwa, 2.0, 4.0, 5), &ReferenceBackend, &Execution::sequential()).unwrap();
    for (x, y) in a.iter().zip(&b) {
        let arrivals = |t: &SimTrace| t.stages.iter().map(|s| s.arrivals).collect::<Vec<_>>();
        assert_eq!(arrivals(x), arrivals(y));
    }
}

#[test]
fn comparing_a_policy_with_itself_is_zero() {
    let topo = Arc::new(Topology::ring(6, 2));
    let traces = run_all(&topo, &config(Policy::MaxRwa, 2.0, 4.0, 5), &ReferenceBackend, &Execution::sequential()).unwrap();
    for row in compare(&traces, &traces).unwrap() {
        for v in [row.rel_granted_pct, row.rel_granted_std, row.rel_gos_pct, row.rel_gos_std, row.rel_spectrum_pct, row.rel_spectrum_std] {
            assert_eq!(v, 0.0, "stage {}", row.stage);
        }
    }
    assert!(compare(&traces, &traces[..2]).is_err());
}

#[test]
fn defragmentation_never_uses_more_spectrum_than_before() {
    let topo = Arc::new(Topology::ring(6, 3));
    let cfg = config(Policy::MinRwaDefrag, 2.0, 5.0, 6);
    for run in 0..3 {
        let trace = run_defrag(&topo, &cfg, run, &ReferenceBackend).unwrap();
        for w in trace.stages.windows(2) {
            assert!(w[1].defrag_spectrum.unwrap() <= w[0].spectrum_usage, "run {run} stage {}", w[1].stage);
        }
    }
}

#[test]
fn single_stage_without_arrivals() {
    let topo = Arc::new(Topology::ring(4, 2));
    let mut cfg = config(Policy::SmaxRwa, 1e-9, 1.0, 1);
    cfg.repetitions = 1;
    let trace = run_provisioning(&topo, &cfg, 0, &ReferenceBackend).unwrap();
    let s = &trace.stages[0];
    assert_eq!((s.arrivals, s.granted, s.spectrum_usage, s.active_connections), (0, 0, 0, 0));
    assert_eq!(s.gos, 1.0);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = config(Policy::SmaxRwa, 1.0, 1.0, 0);
    assert!(cfg.validate().is_err());
    cfg.horizon = 2;
    cfg.scenario_count = 0;
    assert!(cfg.validate().is_err());
    cfg.policy = Policy::MaxRwa;
    assert!(cfg.validate().is_ok());
}

#[test]
fn random_state_fills_or_fails() {
    let topo = Arc::new(Topology::ring(4, 1));
    let traffic = TrafficParams::new(1.0, 3.0).unwrap();
    let state = random_state(&topo, 2, &traffic, &mut rng_from_seed(5)).unwrap();
    assert_eq!(state.connections().len(), 2);
    assert!(state.connections().iter().all(|c| c.expiry_stage >= 1));
    // Eight wavelinks cannot hold nine connections.
    assert!(random_state(&topo, 9, &traffic, &mut rng_from_seed(5)).is_err());
}
