//! Best-bound branch-and-bound with lazy cuts.
//!
//! Node relaxations are warm started from the parent's final tableau. A
//! callback sees every node solution (with an integrality flag) and may
//! return rows; violated rows are added globally and the node is re-solved.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashSet};
use std::sync::Arc;
use std::time::Instant;

use crate::simplex::Tableau;
use crate::{LinearProgram, LpStatus, ObjectiveSense, Sense, SolverConfig, SolverError};

#[derive(Debug, Clone, PartialEq)]
pub struct CutRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    /// Free-form tag used for per-family cut counters.
    pub family: String,
}

impl CutRow {
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().map(|&(j, a)| a * values[j]).sum();
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// What a callback sees at a node.
#[derive(Debug)]
pub struct NodeContext<'a> {
    pub values: &'a [f64],
    pub objective: f64,
    /// All integer columns are integral within `tol_int`.
    pub integral: bool,
    pub node: usize,
    pub depth: usize,
}

/// Lazy-cut separator. Implementations must tolerate concurrent calls.
pub trait CutCallback: Sync {
    fn separate(&self, ctx: &NodeContext<'_>) -> Vec<CutRow>;
}

impl<F> CutCallback for F
where
    F: Fn(&NodeContext<'_>) -> Vec<CutRow> + Sync,
{
    fn separate(&self, ctx: &NodeContext<'_>) -> Vec<CutRow> {
        self(ctx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    NodeLimit,
}

#[derive(Debug, Clone)]
pub struct MipSolution {
    pub status: MipStatus,
    pub incumbent: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// Best dual bound in the user's objective sense.
    pub bound: f64,
    /// `|bound - incumbent| / max(1, |incumbent|)`; infinite without incumbent.
    pub gap: f64,
    pub node_count: usize,
    pub cut_counts: BTreeMap<String, usize>,
    /// Every lazy row accepted during the search, in insertion order.
    pub cuts: Vec<CutRow>,
    /// `(bound, incumbent)` after each processed node.
    pub trace: Vec<(f64, Option<f64>)>,
    pub elapsed_seconds: f64,
}

impl MipSolution {
    pub fn has_incumbent(&self) -> bool {
        self.incumbent.is_some()
    }
}

struct Node {
    /// Relaxation bound in internal (maximize) orientation.
    key: f64,
    id: usize,
    depth: usize,
    bounds: Vec<(usize, f64, f64)>,
    warm: Arc<Tableau>,
    /// Number of global cuts already present in `warm`.
    cuts_known: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

struct Search<'a> {
    lp: &'a LinearProgram,
    config: &'a SolverConfig,
    callback: Option<&'a dyn CutCallback>,
    /// +1 maximize, -1 minimize: internal keys are always maximized.
    orient: f64,
    cuts: Vec<CutRow>,
    seen_cuts: HashSet<Vec<u64>>,
    cut_counts: BTreeMap<String, usize>,
    incumbent: Option<(f64, Vec<f64>)>,
    started: Instant,
}

enum NodeOutcome {
    Pruned,
    Integral,
    Branch { tab: Tableau, col: usize, value: f64, key: f64 },
    Unbounded,
    TimeLimit,
}

fn cut_signature(c: &CutRow) -> Vec<u64> {
    let mut sig: Vec<u64> = Vec::with_capacity(2 * c.coeffs.len() + 3);
    let mut coeffs = c.coeffs.clone();
    coeffs.sort_by_key(|&(j, _)| j);
    for (j, a) in coeffs {
        sig.push(j as u64);
        sig.push(a.to_bits());
    }
    sig.push(c.rhs.to_bits());
    sig.push(c.sense as u64);
    sig
}

impl<'a> Search<'a> {
    fn timed_out(&self) -> bool {
        self.config.time_limit.is_some_and(|t| self.started.elapsed() >= t)
    }

    fn incumbent_key(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::NEG_INFINITY, |(k, _)| *k)
    }

    fn prune_tol(&self) -> f64 {
        let inc = self.incumbent_key();
        if inc.is_finite() {
            self.config.tol_obj * inc.abs().max(1.0)
        } else {
            0.0
        }
    }

    fn cold_tableau(&self, bounds: &[(usize, f64, f64)]) -> Tableau {
        let mut lp = self.lp.clone();
        for &(j, lo, up) in bounds {
            lp.columns[j].lower = lo;
            lp.columns[j].upper = up;
        }
        for c in &self.cuts {
            lp.rows.push(crate::Row::new(c.coeffs.clone(), c.sense, c.rhs));
        }
        let mut tab = Tableau::new(&lp, self.config);
        tab.deadline = self.deadline();
        tab
    }

    fn deadline(&self) -> Option<Instant> {
        self.config.time_limit.map(|t| self.started + t)
    }

    fn resolve(&self, tab: &mut Tableau, bounds: &[(usize, f64, f64)]) -> LpStatus {
        match tab.reoptimize() {
            Some(LpStatus::IterationLimit) | None => {
                *tab = self.cold_tableau(bounds);
                tab.optimize_cold()
            }
            Some(s) => s,
        }
    }

    fn integrality(&self, values: &[f64]) -> Option<(usize, f64)> {
        // Most fractional column; lowest index wins ties.
        let mut best: Option<(usize, f64)> = None;
        let mut best_frac = self.config.tol_int;
        for (j, c) in self.lp.columns.iter().enumerate() {
            if !c.integer {
                continue;
            }
            let v = values[j];
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > best_frac + 1e-12 {
                best_frac = frac;
                best = Some((j, v));
            }
        }
        best
    }

    fn process(&mut self, node: &Node, node_index: usize) -> Result<NodeOutcome, SolverError> {
        let mut tab = (*node.warm).clone();
        for c in &self.cuts[node.cuts_known..] {
            tab.add_row(&c.coeffs, c.sense, c.rhs);
        }
        for &(j, lo, up) in &node.bounds {
            if tab.bounds(j) != (lo, up) {
                tab.set_bounds(j, lo, up);
            }
        }
        let mut status = self.resolve(&mut tab, &node.bounds);
        loop {
            match status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => return Ok(NodeOutcome::Pruned),
                LpStatus::Unbounded => return Ok(NodeOutcome::Unbounded),
                LpStatus::TimeLimit => return Ok(NodeOutcome::TimeLimit),
                LpStatus::IterationLimit => {
                    return Err(SolverError::Numerical(
                        "node relaxation hit the iteration limit".into(),
                    ))
                }
            }
            let key = self.orient * tab.user_objective();
            if self.incumbent.is_some() && key <= self.incumbent_key() + self.prune_tol() {
                return Ok(NodeOutcome::Pruned);
            }
            let values = tab.primal_values();
            let frac = self.integrality(&values);
            let mut added = 0;
            if let Some(cb) = self.callback {
                let ctx = NodeContext {
                    values: &values,
                    objective: tab.user_objective(),
                    integral: frac.is_none(),
                    node: node_index,
                    depth: node.depth,
                };
                for cut in cb.separate(&ctx) {
                    if cut.violation(&values) <= self.config.tol_feas {
                        continue;
                    }
                    if !self.seen_cuts.insert(cut_signature(&cut)) {
                        continue;
                    }
                    tab.add_row(&cut.coeffs, cut.sense, cut.rhs);
                    *self.cut_counts.entry(cut.family.clone()).or_insert(0) += 1;
                    self.cuts.push(cut);
                    added += 1;
                }
            }
            if added > 0 {
                if self.timed_out() {
                    return Ok(NodeOutcome::TimeLimit);
                }
                status = self.resolve(&mut tab, &node.bounds);
                continue;
            }
            return Ok(match frac {
                None => {
                    let mut vals = values;
                    for (j, c) in self.lp.columns.iter().enumerate() {
                        if c.integer {
                            vals[j] = vals[j].round();
                        }
                    }
                    let obj = self.lp.objective_value(&vals);
                    if obj * self.orient > self.incumbent_key() {
                        self.incumbent = Some((obj * self.orient, vals));
                    }
                    NodeOutcome::Integral
                }
                Some((col, value)) => NodeOutcome::Branch { tab, col, value, key },
            });
        }
    }
}

/// Branch-and-bound over LP relaxations, calling `callback` at every node.
pub fn solve_mip(
    lp: &LinearProgram,
    config: &SolverConfig,
    callback: Option<&dyn CutCallback>,
) -> Result<MipSolution, SolverError> {
    lp.validate()?;
    config.validate()?;
    let orient = match lp.objective {
        ObjectiveSense::Maximize => 1.0,
        ObjectiveSense::Minimize => -1.0,
    };
    let mut search = Search {
        lp,
        config,
        callback,
        orient,
        cuts: Vec::new(),
        seen_cuts: HashSet::new(),
        cut_counts: BTreeMap::new(),
        incumbent: None,
        started: Instant::now(),
    };
    let mut root = Tableau::new(lp, config);
    root.deadline = search.deadline();
    let root_status = root.optimize_cold();
    let mut heap = BinaryHeap::new();
    let mut trace = Vec::new();
    let mut status = MipStatus::Optimal;
    let mut bound = f64::INFINITY;
    let mut nodes = 0usize;
    let mut next_id = 1usize;
    match root_status {
        LpStatus::Infeasible => status = MipStatus::Infeasible,
        LpStatus::Unbounded => status = MipStatus::Unbounded,
        LpStatus::TimeLimit => status = MipStatus::TimeLimit,
        LpStatus::IterationLimit => {
            return Err(SolverError::Numerical("root relaxation hit the iteration limit".into()))
        }
        LpStatus::Optimal => heap.push(Node {
            key: orient * root.user_objective(),
            id: 0,
            depth: 0,
            bounds: Vec::new(),
            warm: Arc::new(root),
            cuts_known: 0,
        }),
    }
    while let Some(node) = heap.pop() {
        bound = bound.min(node.key);
        let inc = search.incumbent_key();
        if search.incumbent.is_some() && node.key <= inc + search.prune_tol() {
            // Best-bound order: nothing left can improve the incumbent.
            bound = bound.min(inc.max(node.key));
            heap.clear();
            break;
        }
        if search.timed_out() {
            status = MipStatus::TimeLimit;
            heap.push(node);
            break;
        }
        if config.node_limit.is_some_and(|l| nodes >= l) {
            status = MipStatus::NodeLimit;
            heap.push(node);
            break;
        }
        nodes += 1;
        match search.process(&node, nodes - 1)? {
            NodeOutcome::Pruned | NodeOutcome::Integral => {}
            NodeOutcome::Unbounded => {
                status = MipStatus::Unbounded;
                break;
            }
            NodeOutcome::TimeLimit => {
                status = MipStatus::TimeLimit;
                heap.push(node);
                break;
            }
            NodeOutcome::Branch { tab, col, value, key } => {
                let warm = Arc::new(tab);
                let cuts_known = search.cuts.len();
                let (lo, up) = warm.bounds(col);
                let child = |bounds: Vec<(usize, f64, f64)>, id: usize| Node {
                    key: key.min(node.key),
                    id,
                    depth: node.depth + 1,
                    bounds,
                    warm: Arc::clone(&warm),
                    cuts_known,
                };
                let mut down = node.bounds.clone();
                down.retain(|&(j, _, _)| j != col);
                let mut upb = down.clone();
                down.push((col, lo, value.floor()));
                upb.push((col, value.ceil(), up));
                heap.push(child(upb, next_id));
                heap.push(child(down, next_id + 1));
                next_id += 2;
            }
        }
        let open = heap.peek().map_or(f64::NEG_INFINITY, |n| n.key);
        let current = open.max(search.incumbent_key());
        if current < bound {
            bound = current;
        }
        trace.push((orient * bound, search.incumbent.as_ref().map(|(k, _)| orient * k)));
    }
    if let Some(top) = heap.peek() {
        bound = bound.min(top.key.max(search.incumbent_key()));
    } else if status == MipStatus::Optimal {
        if let Some((k, _)) = &search.incumbent {
            bound = *k;
        }
    }
    let (objective, incumbent) = match search.incumbent.take() {
        Some((k, v)) => (Some(orient * k), Some(v)),
        None => (None, None),
    };
    if status == MipStatus::Optimal && incumbent.is_none() {
        status = MipStatus::Infeasible;
    }
    let user_bound = orient * bound;
    let gap = match objective {
        Some(obj) if user_bound.is_finite() => (user_bound - obj).abs() / obj.abs().max(1.0),
        _ => f64::INFINITY,
    };
    Ok(MipSolution {
        status,
        incumbent,
        objective,
        bound: user_bound,
        gap,
        node_count: nodes,
        cut_counts: search.cut_counts,
        cuts: search.cuts,
        trace,
        elapsed_seconds: search.started.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_binaries_fractional_cap() {
        // max x1 + x2 s.t. x1 + x2 <= 1.5, binaries
        let mut lp = LinearProgram::new(ObjectiveSense::Maximize);
        lp.add_column(0.0, 1.0, 1.0, true);
        lp.add_column(0.0, 1.0, 1.0, true);
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.5);
        let sol = solve_mip(&lp, &SolverConfig::default(), None).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        assert_eq!(sol.objective, Some(1.0));
        assert!(sol.gap <= 1e-6);
    }

    #[test]
    fn knapsack_minimize() {
        // min 3a + 2b + 4c s.t. 2a + b + 3c >= 4, binaries -> a + c (7) or a+b? 2+1=3 <4; b+c=4 -> 6
        let mut lp = LinearProgram::new(ObjectiveSense::Minimize);
        lp.add_column(0.0, 1.0, 3.0, true);
        lp.add_column(0.0, 1.0, 2.0, true);
        lp.add_column(0.0, 1.0, 4.0, true);
        lp.add_row(vec![(0, 2.0), (1, 1.0), (2, 3.0)], Sense::Ge, 4.0);
        let sol = solve_mip(&lp, &SolverConfig::default(), None).unwrap();
        assert_eq!(sol.status, MipStatus::Optimal);
        assert!((sol.objective.unwrap() - 6.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_integer_program() {
        let mut lp = LinearProgram::new(ObjectiveSense::Maximize);
        lp.add_column(0.0, 1.0, 1.0, true);
        lp.add_row(vec![(0, 2.0)], Sense::Eq, 1.0);
        let sol = solve_mip(&lp, &SolverConfig::default(), None).unwrap();
        assert_eq!(sol.status, MipStatus::Infeasible);
        assert!(sol.incumbent.is_none());
    }

    #[test]
    fn lazy_cut_tightens_integral_point() {
        // max x + y, binaries, lazily enforce x + y <= 1.
        let mut lp = LinearProgram::new(ObjectiveSense::Maximize);
        lp.add_column(0.0, 1.0, 1.0, true);
        lp.add_column(0.0, 1.0, 1.0, true);
        let cb = |ctx: &NodeContext<'_>| {
            if ctx.values[0] + ctx.values[1] > 1.0 + 1e-9 {
                vec![CutRow {
                    coeffs: vec![(0, 1.0), (1, 1.0)],
                    sense: Sense::Le,
                    rhs: 1.0,
                    family: "pair".into(),
                }]
            } else {
                Vec::new()
            }
        };
        let sol = solve_mip(&lp, &SolverConfig::default(), Some(&cb)).unwrap();
        assert_eq!(sol.objective, Some(1.0));
        assert_eq!(sol.cut_counts.get("pair"), Some(&1));
    }

    #[test]
    fn continuous_model_runs_callback_at_root() {
        let mut lp = LinearProgram::new(ObjectiveSense::Maximize);
        lp.add_column(0.0, 10.0, 1.0, false);
        let cb = |ctx: &NodeContext<'_>| {
            assert!(ctx.integral);
            if ctx.values[0] > 3.0 + 1e-9 {
                vec![CutRow { coeffs: vec![(0, 1.0)], sense: Sense::Le, rhs: 3.0, family: "c".into() }]
            } else {
                Vec::new()
            }
        };
        let sol = solve_mip(&lp, &SolverConfig::default(), Some(&cb)).unwrap();
        assert_eq!(sol.node_count, 1);
        assert!((sol.objective.unwrap() - 3.0).abs() < 1e-9);
    }
}
