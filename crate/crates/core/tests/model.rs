mod common;

use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use rwa_core::benders::{self, BendersConfig, Method};
use rwa_core::model::*;
use rwa_core::par::Execution;
use rwa_core::solver::{solve_lp, solve_mip, MipStatus, ReferenceBackend};
use rwa_core::topology::{ActiveConnection, Lightpath, Network, NetworkState, Topology};
use rwa_core::traffic::{rng_from_seed, DemandMatrix};

fn deterministic(problem: Problem, topo: Topology, demand: DemandMatrix) -> FormulationSpec {
    stochastic_spec(problem, Relaxation::IpIp, topo, demand, Vec::new())
}

fn optimum(model: &Model) -> f64 {
    let sol = solve_mip(&model.lp, &solver(), None).unwrap();
    assert_eq!(sol.status, MipStatus::Optimal);
    sol.objective.unwrap()
}

#[test]
fn single_fiber_maxrwa() {
    let topo = Topology::from_fibers(2, &[(0, 1)], 1).unwrap();
    let spec = deterministic(Problem::MaxRwa, topo, DemandMatrix::from_pairs([((0, 1), 1)]));
    assert_eq!(optimum(&build_first_stage(&spec)), 1.0);
}

#[test]
fn nsf_example_grants_all_five() {
    let topo = Network::Nsf.load(None, 3).unwrap();
    let demand = DemandMatrix::from_pairs([((0, 11), 2), ((11, 0), 1), ((5, 0), 1), ((5, 1), 1)]);
    let spec = deterministic(Problem::MaxRwa, topo, demand);
    let model = build_first_stage(&spec);
    let sol = solve_mip(&model.lp, &solver(), None).unwrap();
    assert_eq!(sol.objective, Some(5.0));
    let paths = decode_first_stage(&spec, &model, sol.incumbent.as_ref().unwrap()).unwrap();
    assert_eq!(paths.len(), 5);
    let mut state = spec.state.clone();
    state.apply_provisioning(paths.into_iter().map(|lightpath| ActiveConnection { lightpath, expiry_stage: 1 }).collect()).unwrap();
}

/// Clockwise-only 4-ring: the counter-clockwise arcs are already taken.
fn directed_ring() -> NetworkState {
    let mut state = NetworkState::empty(Arc::new(Topology::ring(4, 1)));
    let ccw = |s, d, path: Vec<usize>| ActiveConnection { lightpath: Lightpath { source: s, destination: d, wavelength: 0, path }, expiry_stage: 9 };
    state.apply_provisioning(vec![ccw(0, 1, vec![7, 5, 3]), ccw(1, 0, vec![1])]).unwrap();
    state
}

#[test]
fn directed_ring_paths_overlap() {
    let state = directed_ring();
    let requests = [(0, 2), (1, 3)];
    let spec = FormulationSpec { state: state.clone(), ..deterministic(Problem::MaxRwa, Topology::ring(4, 1), demand(&requests)) };
    assert_eq!(optimum(&build_first_stage(&spec)), 1.0);
    assert_eq!(max_grant(spec.topology(), &free_of(&state), &requests), 1);
}

#[test]
fn minrwa_uses_shortest_paths() {
    let topo = Topology::ring(6, 2);
    let spec = deterministic(Problem::MinRwa, topo, DemandMatrix::from_pairs([((0, 3), 2), ((1, 2), 1)]));
    // Two 3-hop paths plus one 1-hop path.
    assert_eq!(optimum(&build_first_stage(&spec)), -7.0);
}

#[test]
fn recourse_examples() {
    let topo = Topology::ring(4, 1);
    let spec = FormulationSpec { relaxation: Relaxation::IpIp, ..deterministic(Problem::SmaxRwa, topo.clone(), DemandMatrix::new()) };
    let one_hop = DemandMatrix::from_pairs([((0, 1), 1)]);
    let zero = WavelinkUsage::zero(&topo);
    assert_eq!(optimum(&build_recourse(&spec, &zero, &one_hop).unwrap()), 1.0);

    let all: Vec<Lightpath> = (0..topo.num_arcs())
        .map(|a| Lightpath { source: topo.arc(a).tail, destination: topo.arc(a).head, wavelength: 0, path: vec![a] })
        .collect();
    let full = WavelinkUsage::from_lightpaths(&topo, &all);
    assert_eq!(optimum(&build_recourse(&spec, &full, &one_hop).unwrap()), 0.0);

    // Arc 0 (0→1) taken: 0→1 must go the long way round.
    let first = [Lightpath { source: 0, destination: 1, wavelength: 0, path: vec![0] }];
    let usage = WavelinkUsage::from_lightpaths(&topo, &first);
    let scen = [(0, 1), (3, 2)];
    let q = optimum(&build_recourse(&spec, &usage, &demand(&scen)).unwrap());
    assert_eq!(q, max_grant(&topo, &without(&all_free(&topo), &first), &scen) as f64);
}

#[test]
fn overused_wavelink_is_rejected() {
    let topo = Topology::ring(3, 1);
    let spec = deterministic(Problem::SmaxRwa, topo.clone(), DemandMatrix::new());
    let lp = Lightpath { source: 0, destination: 1, wavelength: 0, path: vec![0] };
    let usage = WavelinkUsage::from_lightpaths(&topo, &[lp.clone(), lp]);
    assert!(build_recourse(&spec, &usage, &DemandMatrix::from_pairs([((0, 1), 1)])).is_err());
}

#[test]
fn empty_first_stage_matches_maxrwa_on_the_scenario() {
    let mut rng = rng_from_seed(5);
    for _ in 0..10 {
        let topo = random_topology(&mut rng, 5, 0.3, 2);
        let scen = demand(&random_requests(&mut rng, 5, 4));
        let spec = stochastic_spec(Problem::SmaxRwa, Relaxation::IpIp, topo.clone(), DemandMatrix::new(), vec![scen.clone()]);
        let det = deterministic(Problem::MaxRwa, topo, scen.clone());
        let ext = optimum(&build_extensive(&spec).unwrap());
        assert!((ext - optimum(&build_first_stage(&det))).abs() < 1e-9);
        let twice = spec.with_scenarios(vec![scen.clone(), scen]);
        assert!((optimum(&build_extensive(&twice).unwrap()) - ext).abs() < 1e-9);
    }
}

#[test]
fn extensive_row_count_is_block_sum() {
    let mut rng = rng_from_seed(8);
    let topo = random_topology(&mut rng, 5, 0.4, 2);
    let scenarios: Vec<_> = (0..3).map(|_| demand(&random_requests(&mut rng, 5, 3))).collect();
    let spec = stochastic_spec(Problem::SmaxRwa, Relaxation::IpLp, topo.clone(), demand(&random_requests(&mut rng, 5, 3)), scenarios.clone());
    let ext = build_extensive(&spec).unwrap();
    let first = build_first_stage(&spec).num_rows();
    let zero = WavelinkUsage::zero(&topo);
    let blocks: usize = scenarios.iter().map(|s| build_recourse(&spec, &zero, s).unwrap().num_rows()).sum();
    // Plus one η row per scenario.
    assert_eq!(ext.num_rows(), first + blocks + scenarios.len());
}

#[test]
fn unknown_key_is_an_error() {
    let spec = deterministic(Problem::MaxRwa, Topology::ring(3, 1), DemandMatrix::from_pairs([((0, 1), 1)]));
    let m = build_first_stage(&spec);
    assert!(m.var_index(&VarKey::eta(0)).is_err());
    assert!(m.var_index(&VarKey::x((0, 1), 0, 3)).is_err());
}

#[test]
fn no_scenarios_reduces_to_maxrwa() {
    let topo = Topology::ring(5, 1);
    let dem = DemandMatrix::from_pairs([((0, 2), 1), ((1, 3), 1), ((2, 4), 1)]);
    let spec = stochastic_spec(Problem::SmaxRwa, Relaxation::IpLp, topo.clone(), dem.clone(), Vec::new());
    let r = benders::solve(&spec, &BendersConfig::default(), &solver(), &ReferenceBackend, &Execution::sequential()).unwrap();
    assert_eq!(r.objective, Some(max_grant(&topo, &all_free(&topo), &requests_of(&dem)) as f64));
}

fn small_instance() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 1usize..=3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn relaxations_are_ordered((seed, k) in small_instance()) {
        let mut rng = rng_from_seed(seed);
        let topo = random_topology(&mut rng, 5, 0.3, 2);
        let scenarios: Vec<_> = (0..k).map(|_| demand(&random_requests(&mut rng, 5, 3))).collect();
        let base = stochastic_spec(Problem::SmaxRwa, Relaxation::IpIp, topo, demand(&random_requests(&mut rng, 5, 3)), scenarios);
        let value = |r: Relaxation| {
            let m = build_extensive(&base.with_relaxation(r)).unwrap();
            solve_mip(&m.lp, &solver(), None).unwrap().objective.unwrap()
        };
        let (ll, il, ii) = (value(Relaxation::LpLp), value(Relaxation::IpLp), value(Relaxation::IpIp));
        prop_assert!(ll >= il - 1e-6 && il >= ii - 1e-6, "{ll} {il} {ii}");
    }

    #[test]
    fn integral_solutions_decode_to_valid_provisionings(seed in any::<u64>(), reroute in any::<bool>()) {
        let mut rng = rng_from_seed(seed);
        let topo = random_topology(&mut rng, 6, 0.3, 2);
        let requests = random_requests(&mut rng, 6, 4);
        let problem = if reroute { Problem::MinRwa } else { Problem::MaxRwa };
        let mut spec = deterministic(problem, topo.clone(), demand(&requests));
        if reroute {
            // Reroute a provisioning that is known to exist.
            let lps = rwa_core::sim::random_provisioning(&spec.state, &requests, &mut rng);
            spec.current_demand = DemandMatrix::from_pairs(lps.iter().map(|l| ((l.source, l.destination), 1)));
        }
        let m = build_first_stage(&spec);
        let sol = solve_mip(&m.lp, &solver(), None).unwrap();
        let paths = decode_first_stage(&spec, &m, sol.incumbent.as_ref().unwrap()).unwrap();
        if reroute {
            for (pair, r) in spec.current_demand.pairs() {
                prop_assert_eq!(paths.iter().filter(|l| (l.source, l.destination) == pair).count(), r as usize);
            }
        }
        let mut state = spec.state.clone();
        let conns = paths.into_iter().map(|lightpath| ActiveConnection { lightpath, expiry_stage: 1 }).collect();
        prop_assert!(state.apply_provisioning(conns).is_ok());
    }

    #[test]
    fn aggregated_recourse_relaxes_recourse(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let topo = random_topology(&mut rng, 5, 0.4, 2);
        let spec = stochastic_spec(Problem::SmaxRwa, Relaxation::IpLp, topo.clone(), DemandMatrix::new(), Vec::new());
        let first = rwa_core::sim::random_provisioning(&spec.state, &random_requests(&mut rng, 5, 3), &mut rng);
        let usage = WavelinkUsage::from_lightpaths(&topo, &first);
        let scen = demand(&random_requests(&mut rng, 5, 4));
        let q = solve_lp(&build_recourse(&spec, &usage, &scen).unwrap().lp, &solver()).unwrap().objective;
        let qbar = solve_lp(&build_aggregated_recourse(&spec, &usage.per_arc(), &scen).unwrap().lp, &solver()).unwrap().objective;
        prop_assert!(qbar >= q - 1e-7, "{qbar} < {q}");
    }
}

#[test]
fn aggregated_recourse_ignores_wavelength_conflicts() {
    // Path 0→1→2 with wavelength 0 taken on 0→1 and wavelength 1 taken on 1→2:
    // each arc keeps one free wavelength, but no single wavelength is free end to end.
    let topo = Topology::from_fibers(3, &[(0, 1), (1, 2)], 2).unwrap();
    let spec = stochastic_spec(Problem::SmaxRwa, Relaxation::IpLp, topo.clone(), DemandMatrix::new(), Vec::new());
    let first = [
        Lightpath { source: 0, destination: 1, wavelength: 0, path: vec![0] },
        Lightpath { source: 1, destination: 2, wavelength: 1, path: vec![2] },
    ];
    let usage = WavelinkUsage::from_lightpaths(&topo, &first);
    let scen = DemandMatrix::from_pairs([((0, 2), 1)]);
    let q = solve_lp(&build_recourse(&spec, &usage, &scen).unwrap().lp, &solver()).unwrap().objective;
    let qbar = solve_lp(&build_aggregated_recourse(&spec, &usage.per_arc(), &scen).unwrap().lp, &solver()).unwrap().objective;
    assert!(q.abs() < 1e-9, "{q}");
    assert!((qbar - 1.0).abs() < 1e-9, "{qbar}");
}

#[test]
fn extensive_method_matches_oracle_on_fixed_instance() {
    let topo = Topology::ring(4, 1);
    let new = [(0, 2)];
    let scenarios = [vec![(1, 3)], vec![(0, 1), (1, 2)]];
    let spec = stochastic_spec(
        Problem::SmaxRwa,
        Relaxation::IpIp,
        topo.clone(),
        demand(&new),
        scenarios.iter().map(|s| demand(s)).collect(),
    );
    let r = benders::solve(&spec, &BendersConfig::with_method(Method::Extensive), &solver(), &ReferenceBackend, &Execution::sequential()).unwrap();
    let oracle = smaxrwa_oracle(&topo, &all_free(&topo), &new, &scenarios);
    assert!((r.objective.unwrap() - oracle).abs() < 1e-6);
}
