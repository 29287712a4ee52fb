//! Brute-force oracles and random instance generators shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rwa_core::model::{FormulationSpec, Problem, Relaxation};
use rwa_core::topology::{Lightpath, NetworkState, Topology};
use rwa_core::traffic::{DemandMatrix, Rng64};
use rwa_core::solver::SolverConfig;

pub fn solver() -> SolverConfig {
    SolverConfig { time_limit: None, ..SolverConfig::default() }
}

/// Connected random graph: a random spanning tree plus each other fiber with probability `p`.
pub fn random_topology(rng: &mut Rng64, nodes: usize, p: f64, wavelengths: usize) -> Topology {
    let mut order: Vec<usize> = (0..nodes).collect();
    order.shuffle(rng);
    let mut fibers = Vec::new();
    for i in 1..nodes {
        let parent = order[rng.random_range(0..i)];
        fibers.push((parent.min(order[i]), parent.max(order[i])));
    }
    for u in 0..nodes {
        for v in u + 1..nodes {
            if !fibers.contains(&(u, v)) && rng.random_bool(p) {
                fibers.push((u, v));
            }
        }
    }
    fibers.sort_unstable();
    Topology::from_fibers(nodes, &fibers, wavelengths).unwrap()
}

pub fn random_requests(rng: &mut Rng64, nodes: usize, count: usize) -> Vec<(usize, usize)> {
    (0..count)
        .map(|_| {
            let s = rng.random_range(0..nodes);
            let mut d = rng.random_range(0..nodes - 1);
            if d >= s {
                d += 1;
            }
            (s, d)
        })
        .collect()
}

pub fn demand(requests: &[(usize, usize)]) -> DemandMatrix {
    DemandMatrix::from_pairs(requests.iter().map(|&p| (p, 1)))
}

pub fn requests_of(demand: &DemandMatrix) -> Vec<(usize, usize)> {
    demand.pairs().flat_map(|(p, c)| std::iter::repeat_n(p, c as usize)).collect()
}

pub fn stochastic_spec(problem: Problem, relaxation: Relaxation, topo: Topology, new: DemandMatrix, scenarios: Vec<DemandMatrix>) -> FormulationSpec {
    FormulationSpec {
        problem,
        relaxation,
        state: NetworkState::empty(Arc::new(topo)),
        current_demand: new.clone(),
        new_demand: new,
        scenarios,
    }
}

/// Every simple directed path from `s` to `d`.
pub fn simple_paths(topo: &Topology, s: usize, d: usize) -> Vec<Vec<usize>> {
    fn walk(topo: &Topology, at: usize, d: usize, seen: &mut Vec<bool>, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if at == d {
            out.push(path.clone());
            return;
        }
        for &a in topo.delta_out(at).unwrap() {
            let h = topo.arc(a).head;
            if seen[h] {
                continue;
            }
            seen[h] = true;
            path.push(a);
            walk(topo, h, d, seen, path, out);
            path.pop();
            seen[h] = false;
        }
    }
    let mut out = Vec::new();
    let mut seen = vec![false; topo.num_nodes()];
    seen[s] = true;
    walk(topo, s, d, &mut seen, &mut Vec::new(), &mut out);
    out
}

/// `free[w][arc]`
pub type Free = Vec<Vec<bool>>;

pub fn all_free(topo: &Topology) -> Free {
    vec![vec![true; topo.num_arcs()]; topo.wavelengths()]
}

pub fn free_of(state: &NetworkState) -> Free {
    let topo = state.topology();
    (0..topo.wavelengths()).map(|w| (0..topo.num_arcs()).map(|a| state.is_free(a, w)).collect()).collect()
}

/// Largest number of `requests` that can be given conflict-free lightpaths on `free`.
pub fn max_grant(topo: &Topology, free: &Free, requests: &[(usize, usize)]) -> usize {
    let paths: Vec<Vec<Vec<usize>>> = requests.iter().map(|&(s, d)| simple_paths(topo, s, d)).collect();
    let mut free = free.clone();
    let mut best = 0;
    grant_rec(&paths, 0, 0, &mut free, &mut best);
    best
}

fn grant_rec(paths: &[Vec<Vec<usize>>], i: usize, granted: usize, free: &mut Free, best: &mut usize) {
    if granted + (paths.len() - i) <= *best {
        return;
    }
    if i == paths.len() {
        *best = granted;
        return;
    }
    for w in 0..free.len() {
        for p in &paths[i] {
            if p.iter().all(|&a| free[w][a]) {
                p.iter().for_each(|&a| free[w][a] = false);
                grant_rec(paths, i + 1, granted + 1, free, best);
                p.iter().for_each(|&a| free[w][a] = true);
            }
        }
    }
    grant_rec(paths, i + 1, granted, free, best);
}

/// All conflict-free provisionings of subsets of `requests`, up to swapping
/// lightpaths between requests of the same pair.
pub fn provisionings(topo: &Topology, free: &Free, requests: &[(usize, usize)]) -> Vec<Vec<Lightpath>> {
    let paths: Vec<Vec<Vec<usize>>> = requests.iter().map(|&(s, d)| simple_paths(topo, s, d)).collect();
    let mut free = free.clone();
    let mut seen = BTreeSet::new();
    let mut current = Vec::new();
    prov_rec(requests, &paths, 0, &mut free, &mut current, &mut seen);
    seen.into_iter().collect()
}

fn prov_rec(
    requests: &[(usize, usize)],
    paths: &[Vec<Vec<usize>>],
    i: usize,
    free: &mut Free,
    current: &mut Vec<Lightpath>,
    seen: &mut BTreeSet<Vec<Lightpath>>,
) {
    if i == requests.len() {
        let mut key = current.clone();
        key.sort_by(|a, b| (a.source, a.destination, a.wavelength, &a.path).cmp(&(b.source, b.destination, b.wavelength, &b.path)));
        seen.insert(key);
        return;
    }
    prov_rec(requests, paths, i + 1, free, current, seen);
    let (s, d) = requests[i];
    for w in 0..free.len() {
        for p in &paths[i] {
            if p.iter().all(|&a| free[w][a]) {
                p.iter().for_each(|&a| free[w][a] = false);
                current.push(Lightpath { source: s, destination: d, wavelength: w, path: p.clone() });
                prov_rec(requests, paths, i + 1, free, current, seen);
                current.pop();
                p.iter().for_each(|&a| free[w][a] = true);
            }
        }
    }
}

pub fn without(free: &Free, lightpaths: &[Lightpath]) -> Free {
    let mut f = free.clone();
    for lp in lightpaths {
        for &a in &lp.path {
            f[lp.wavelength][a] = false;
        }
    }
    f
}

/// SmaxRWA with integer recourse by exhaustive search over first-stage provisionings.
pub fn smaxrwa_oracle(topo: &Topology, free: &Free, new: &[(usize, usize)], scenarios: &[Vec<(usize, usize)>]) -> f64 {
    provisionings(topo, free, new)
        .iter()
        .map(|p| {
            let rest = without(free, p);
            let mean = scenarios.iter().map(|r| max_grant(topo, &rest, r) as f64).sum::<f64>() / scenarios.len() as f64;
            p.len() as f64 + mean
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
