//! Link-based flow formulations: deterministic maxRWA/minRWA, the first and
//! second stages of SmaxRWA/SmaxLR, extensive forms and Benders pieces.
//!
//! Loop elimination is done by never creating columns for arcs entering a
//! pair's source or leaving its destination.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use rwa_solver::{LinearProgram, ObjectiveSense, Sense};
use serde::{Deserialize, Serialize};

use crate::topology::{Lightpath, NetworkState, Topology};
use crate::traffic::DemandMatrix;
use crate::Error;

/// First-stage usage within this much of 1 on a wavelink is treated as full.
const USAGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Problem {
    #[serde(rename = "maxrwa")]
    MaxRwa,
    #[serde(rename = "minrwa")]
    MinRwa,
    #[serde(rename = "smaxrwa")]
    SmaxRwa,
    #[serde(rename = "smaxlr")]
    SmaxLr,
}

impl Problem {
    pub fn is_stochastic(self) -> bool {
        matches!(self, Problem::SmaxRwa | Problem::SmaxLr)
    }

    /// Whether the first stage reroutes the current connections over the whole network.
    pub fn reroutes(self) -> bool {
        matches!(self, Problem::MinRwa | Problem::SmaxLr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relaxation {
    #[serde(rename = "ip-ip")]
    IpIp,
    #[serde(rename = "ip-lp")]
    IpLp,
    #[serde(rename = "lp-lp")]
    LpLp,
}

impl Relaxation {
    pub fn integer_first_stage(self) -> bool {
        !matches!(self, Relaxation::LpLp)
    }

    pub fn integer_recourse(self) -> bool {
        matches!(self, Relaxation::IpIp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    X,
    Y,
    Z,
    Eta,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarKey {
    pub kind: VarKind,
    pub pair: Option<(usize, usize)>,
    pub arc: Option<usize>,
    pub wavelength: Option<usize>,
    pub scenario: Option<usize>,
}

impl VarKey {
    pub fn x(pair: (usize, usize), arc: usize, wavelength: usize) -> Self {
        Self { kind: VarKind::X, pair: Some(pair), arc: Some(arc), wavelength: Some(wavelength), scenario: None }
    }

    pub fn y(pair: (usize, usize), arc: usize, wavelength: usize, scenario: usize) -> Self {
        Self { kind: VarKind::Y, pair: Some(pair), arc: Some(arc), wavelength: Some(wavelength), scenario: Some(scenario) }
    }

    pub fn z(pair: (usize, usize), scenario: usize) -> Self {
        Self { kind: VarKind::Z, pair: Some(pair), arc: None, wavelength: None, scenario: Some(scenario) }
    }

    pub fn eta(scenario: usize) -> Self {
        Self { kind: VarKind::Eta, pair: None, arc: None, wavelength: None, scenario: Some(scenario) }
    }

    pub fn beta(arc: usize) -> Self {
        Self { kind: VarKind::Beta, pair: None, arc: Some(arc), wavelength: None, scenario: None }
    }
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            VarKind::X => "x",
            VarKind::Y => "y",
            VarKind::Z => "z",
            VarKind::Eta => "eta",
            VarKind::Beta => "beta",
        };
        f.write_str(kind)?;
        if let Some((s, d)) = self.pair {
            write!(f, "_{s}_{d}")?;
        }
        if let Some(a) = self.arc {
            write!(f, "_a{a}")?;
        }
        if let Some(w) = self.wavelength {
            write!(f, "_w{w}")?;
        }
        if let Some(k) = self.scenario {
            write!(f, "_k{k}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowKind {
    /// First-stage wavelink conflict.
    Conflict,
    Flow,
    /// First-stage demand bound or equality.
    Demand,
    /// Recourse wavelink capacity.
    Capacity,
    /// Recourse demand bound on granted requests.
    RecourseDemand,
    /// `z` equals the flow leaving the source.
    Granted,
    /// `η ≤ Σ z` in the extensive form.
    Eta,
    /// `β` equals the first-stage usage of an arc.
    BetaDef,
    /// Per-arc capacity summed over wavelengths.
    AggregatedCapacity,
    /// Per-wavelink unit bound of the aggregated recourse.
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RowTag {
    pub kind: RowKind,
    pub pair: Option<(usize, usize)>,
    pub arc: Option<usize>,
    pub wavelength: Option<usize>,
    pub node: Option<usize>,
    pub scenario: Option<usize>,
}

impl RowTag {
    fn new(kind: RowKind) -> Self {
        Self { kind, pair: None, arc: None, wavelength: None, node: None, scenario: None }
    }
}

/// A linear program whose columns and rows carry their meaning.
#[derive(Debug, Clone)]
pub struct Model {
    pub lp: LinearProgram,
    keys: Vec<VarKey>,
    index: HashMap<VarKey, usize>,
    row_tags: Vec<RowTag>,
}

impl Model {
    fn new(objective: ObjectiveSense) -> Self {
        Self { lp: LinearProgram::new(objective), keys: Vec::new(), index: HashMap::new(), row_tags: Vec::new() }
    }

    fn add_var(&mut self, key: VarKey, lower: f64, upper: f64, cost: f64, integer: bool) -> usize {
        let j = self.lp.add_column(lower, upper, cost, integer);
        let previous = self.index.insert(key, j);
        debug_assert!(previous.is_none(), "duplicate variable {key}");
        self.keys.push(key);
        j
    }

    fn add_row(&mut self, tag: RowTag, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.row_tags.push(tag);
        self.lp.add_row(coeffs, sense, rhs)
    }

    pub fn var_index(&self, key: &VarKey) -> Result<usize, Error> {
        self.index.get(key).copied().ok_or_else(|| Error::UnknownVariable(key.to_string()))
    }

    pub fn key(&self, column: usize) -> Option<&VarKey> {
        self.keys.get(column)
    }

    pub fn keys(&self) -> &[VarKey] {
        &self.keys
    }

    pub fn row_tags(&self) -> &[RowTag] {
        &self.row_tags
    }

    pub fn num_vars(&self) -> usize {
        self.keys.len()
    }

    pub fn num_rows(&self) -> usize {
        self.row_tags.len()
    }

    /// Columns of the given kind, in declaration order.
    pub fn columns_of(&self, kind: VarKind) -> impl Iterator<Item = (usize, &VarKey)> + '_ {
        self.keys.iter().enumerate().filter(move |(_, k)| k.kind == kind)
    }

    /// Write the model in the CPLEX LP text format.
    pub fn write_lp<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let name = |j: usize| self.keys[j].to_string();
        let term = |a: f64, j: usize, first: bool| {
            let sign = if a < 0.0 { "-" } else if first { "" } else { "+" };
            let mag = a.abs();
            if (mag - 1.0).abs() < 1e-15 {
                format!("{sign} {}", name(j))
            } else {
                format!("{sign} {mag} {}", name(j))
            }
        };
        writeln!(out, "{}", if self.lp.objective == ObjectiveSense::Maximize { "Maximize" } else { "Minimize" })?;
        let obj: Vec<String> = self
            .lp
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.cost != 0.0)
            .enumerate()
            .map(|(k, (j, c))| term(c.cost, j, k == 0))
            .collect();
        writeln!(out, " obj: {}", if obj.is_empty() { "0".to_string() } else { obj.join(" ") })?;
        writeln!(out, "Subject To")?;
        for (i, row) in self.lp.rows.iter().enumerate() {
            if row.coeffs.is_empty() {
                continue;
            }
            let lhs: Vec<String> = row.coeffs.iter().enumerate().map(|(k, &(j, a))| term(a, j, k == 0)).collect();
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            writeln!(out, " r{i}: {} {op} {}", lhs.join(" "), row.rhs)?;
        }
        writeln!(out, "Bounds")?;
        for (j, c) in self.lp.columns.iter().enumerate() {
            let up = if c.upper.is_finite() { c.upper.to_string() } else { "+inf".into() };
            let lo = if c.lower.is_finite() { c.lower.to_string() } else { "-inf".into() };
            writeln!(out, " {lo} <= {} <= {up}", name(j))?;
        }
        let ints: Vec<String> = (0..self.num_vars()).filter(|&j| self.lp.columns[j].integer).map(name).collect();
        if !ints.is_empty() {
            writeln!(out, "General")?;
            for chunk in ints.chunks(8) {
                writeln!(out, " {}", chunk.join(" "))?;
            }
        }
        writeln!(out, "End")
    }
}

/// Everything needed to build a formulation.
#[derive(Debug, Clone)]
pub struct FormulationSpec {
    pub problem: Problem,
    pub relaxation: Relaxation,
    pub state: NetworkState,
    /// Requests to grant now (maxRWA, SmaxRWA).
    pub new_demand: DemandMatrix,
    /// Connections to reroute (minRWA, SmaxLR).
    pub current_demand: DemandMatrix,
    pub scenarios: Vec<DemandMatrix>,
}

impl FormulationSpec {
    pub fn topology(&self) -> &Topology {
        self.state.topology()
    }

    /// First-stage pairs with positive demand.
    pub fn first_stage_demand(&self) -> &DemandMatrix {
        if self.problem.reroutes() {
            &self.current_demand
        } else {
            &self.new_demand
        }
    }

    pub fn first_stage_available(&self, arc: usize, wavelength: usize) -> bool {
        self.problem.reroutes() || self.state.is_free(arc, wavelength)
    }

    pub fn second_stage_available(&self, arc: usize, wavelength: usize) -> bool {
        self.problem == Problem::SmaxLr || self.state.is_free(arc, wavelength)
    }

    /// Number of wavelengths on which `arc` can carry second-stage traffic.
    pub fn second_stage_free_count(&self, arc: usize) -> usize {
        (0..self.topology().wavelengths()).filter(|&w| self.second_stage_available(arc, w)).count()
    }

    pub fn with_scenarios(&self, scenarios: Vec<DemandMatrix>) -> Self {
        Self { scenarios, ..self.clone() }
    }

    pub fn with_relaxation(&self, relaxation: Relaxation) -> Self {
        Self { relaxation, ..self.clone() }
    }

    /// Objective contribution of a decoded first-stage provisioning.
    pub fn first_stage_value(&self, lightpaths: &[Lightpath]) -> f64 {
        match self.problem {
            Problem::MaxRwa | Problem::SmaxRwa => lightpaths.len() as f64,
            Problem::SmaxLr => 0.0,
            Problem::MinRwa => -(lightpaths.iter().map(|l| l.path.len()).sum::<usize>() as f64),
        }
    }
}

/// Whether the pair may use the arc at all (loop elimination).
fn arc_allowed(topo: &Topology, pair: (usize, usize), arc: usize) -> bool {
    let a = topo.arc(arc);
    a.head != pair.0 && a.tail != pair.1
}

/// Flow conservation rows for one pair on one wavelength. `cols` maps arcs to columns.
fn flow_rows(
    m: &mut Model,
    topo: &Topology,
    pair: (usize, usize),
    wavelength: usize,
    scenario: Option<usize>,
    cols: &HashMap<usize, usize>,
) {
    for v in 0..topo.num_nodes() {
        if v == pair.0 || v == pair.1 {
            continue;
        }
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        coeffs.extend(topo.out_of(v).iter().filter_map(|a| cols.get(a)).map(|&j| (j, 1.0)));
        coeffs.extend(topo.arcs_into(v).iter().filter_map(|a| cols.get(a)).map(|&j| (j, -1.0)));
        if coeffs.is_empty() {
            continue;
        }
        let tag = RowTag { pair: Some(pair), wavelength: Some(wavelength), node: Some(v), scenario, ..RowTag::new(RowKind::Flow) };
        m.add_row(tag, coeffs, Sense::Eq, 0.0);
    }
}

/// Adds x columns and the first-stage rows. Returns the x columns per wavelink.
fn add_first_stage(m: &mut Model, spec: &FormulationSpec) -> BTreeMap<(usize, usize), Vec<usize>> {
    let topo = spec.topology();
    let integer = spec.relaxation.integer_first_stage();
    let mut by_wavelink: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let demand = spec.first_stage_demand();
    for (pair, r) in demand.pairs() {
        let mut out_of_source = Vec::new();
        for w in 0..topo.wavelengths() {
            let mut cols = HashMap::new();
            for arc in 0..topo.num_arcs() {
                if !spec.first_stage_available(arc, w) || !arc_allowed(topo, pair, arc) {
                    continue;
                }
                let from_source = topo.arc(arc).tail == pair.0;
                let cost = match spec.problem {
                    Problem::MaxRwa | Problem::SmaxRwa if from_source => 1.0,
                    Problem::MinRwa => -1.0,
                    _ => 0.0,
                };
                let j = m.add_var(VarKey::x(pair, arc, w), 0.0, 1.0, cost, integer);
                cols.insert(arc, j);
                by_wavelink.entry((arc, w)).or_default().push(j);
                if from_source {
                    out_of_source.push(j);
                }
            }
            flow_rows(m, topo, pair, w, None, &cols);
        }
        let sense = if spec.problem.reroutes() { Sense::Eq } else { Sense::Le };
        let coeffs = out_of_source.iter().map(|&j| (j, 1.0)).collect();
        m.add_row(RowTag { pair: Some(pair), ..RowTag::new(RowKind::Demand) }, coeffs, sense, r as f64);
    }
    for (&(arc, w), cols) in &by_wavelink {
        if cols.len() < 2 {
            continue;
        }
        let tag = RowTag { arc: Some(arc), wavelength: Some(w), ..RowTag::new(RowKind::Conflict) };
        m.add_row(tag, cols.iter().map(|&j| (j, 1.0)).collect(), Sense::Le, 1.0);
    }
    by_wavelink
}

/// How recourse capacity rows see the first stage.
enum Capacity<'a> {
    /// Rows `Σy + Σx ≤ 1` against x columns of the same model.
    Coupled(&'a BTreeMap<(usize, usize), Vec<usize>>),
    /// Rows `Σy ≤ 1 − usage[ω][ℓ]`.
    Fixed(&'a WavelinkUsage),
    /// Per-arc `ΣωΣy ≤ free(ℓ) − β̂ℓ` plus per-wavelink `Σy ≤ 1`.
    Aggregated(&'a [f64]),
    /// As `Aggregated` with β given by columns of the same model.
    AggregatedCoupled(&'a [usize]),
}

/// Adds y, z columns and the recourse rows for one scenario. Returns the z columns.
fn add_recourse(
    m: &mut Model,
    spec: &FormulationSpec,
    scenario: usize,
    demand: &DemandMatrix,
    z_cost: f64,
    capacity: Capacity<'_>,
) -> Result<Vec<usize>, Error> {
    let topo = spec.topology();
    let integer = spec.relaxation.integer_recourse();
    let y_upper = if integer { 1.0 } else { f64::INFINITY };
    let mut by_wavelink: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    let mut zs = Vec::new();
    for (pair, r) in demand.pairs() {
        let mut out_of_source = Vec::new();
        for w in 0..topo.wavelengths() {
            let mut cols = HashMap::new();
            for arc in 0..topo.num_arcs() {
                if !spec.second_stage_available(arc, w) || !arc_allowed(topo, pair, arc) {
                    continue;
                }
                let j = m.add_var(VarKey::y(pair, arc, w, scenario), 0.0, y_upper, 0.0, integer);
                cols.insert(arc, j);
                by_wavelink.entry((arc, w)).or_default().push(j);
                if topo.arc(arc).tail == pair.0 {
                    out_of_source.push(j);
                }
            }
            flow_rows(m, topo, pair, w, Some(scenario), &cols);
        }
        let z_upper = if integer { r as f64 } else { f64::INFINITY };
        let z = m.add_var(VarKey::z(pair, scenario), 0.0, z_upper, z_cost, integer);
        zs.push(z);
        let mut link: Vec<(usize, f64)> = vec![(z, 1.0)];
        link.extend(out_of_source.iter().map(|&j| (j, -1.0)));
        let tag = RowTag { pair: Some(pair), scenario: Some(scenario), ..RowTag::new(RowKind::Granted) };
        m.add_row(tag, link, Sense::Eq, 0.0);
        let tag = RowTag { pair: Some(pair), scenario: Some(scenario), ..RowTag::new(RowKind::RecourseDemand) };
        m.add_row(tag, out_of_source.iter().map(|&j| (j, 1.0)).collect(), Sense::Le, r as f64);
    }
    match capacity {
        Capacity::Coupled(x_cols) => {
            for (&(arc, w), ys) in &by_wavelink {
                let mut coeffs: Vec<(usize, f64)> = ys.iter().map(|&j| (j, 1.0)).collect();
                if let Some(xs) = x_cols.get(&(arc, w)) {
                    coeffs.extend(xs.iter().map(|&j| (j, 1.0)));
                }
                let tag = RowTag { arc: Some(arc), wavelength: Some(w), scenario: Some(scenario), ..RowTag::new(RowKind::Capacity) };
                m.add_row(tag, coeffs, Sense::Le, 1.0);
            }
        }
        Capacity::Fixed(usage) => {
            for (&(arc, w), ys) in &by_wavelink {
                let used = usage.get(arc, w);
                if used > 1.0 + USAGE_TOL {
                    return Err(Error::Model(format!("wavelink (arc {arc}, wavelength {w}) is used {used} times")));
                }
                let tag = RowTag { arc: Some(arc), wavelength: Some(w), scenario: Some(scenario), ..RowTag::new(RowKind::Capacity) };
                m.add_row(tag, ys.iter().map(|&j| (j, 1.0)).collect(), Sense::Le, (1.0 - used).max(0.0));
            }
        }
        Capacity::Aggregated(_) | Capacity::AggregatedCoupled(_) => {
            let mut by_arc: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (&(arc, _), ys) in &by_wavelink {
                by_arc.entry(arc).or_default().extend(ys);
            }
            for (&arc, ys) in &by_arc {
                let free = spec.second_stage_free_count(arc) as f64;
                let mut coeffs: Vec<(usize, f64)> = ys.iter().map(|&j| (j, 1.0)).collect();
                let rhs = match capacity {
                    Capacity::AggregatedCoupled(beta) => {
                        coeffs.push((beta[arc], 1.0));
                        free
                    }
                    Capacity::Aggregated(beta) => (free - beta[arc]).max(0.0),
                    _ => unreachable!(),
                };
                let tag = RowTag { arc: Some(arc), scenario: Some(scenario), ..RowTag::new(RowKind::AggregatedCapacity) };
                m.add_row(tag, coeffs, Sense::Le, rhs);
            }
            for (&(arc, w), ys) in &by_wavelink {
                let tag = RowTag { arc: Some(arc), wavelength: Some(w), scenario: Some(scenario), ..RowTag::new(RowKind::Unit) };
                m.add_row(tag, ys.iter().map(|&j| (j, 1.0)).collect(), Sense::Le, 1.0);
            }
        }
    }
    Ok(zs)
}

/// First-stage model. For the deterministic problems this is the complete
/// model; for minRWA the objective is `−Σx` under maximization.
pub fn build_first_stage(spec: &FormulationSpec) -> Model {
    let mut m = Model::new(ObjectiveSense::Maximize);
    add_first_stage(&mut m, spec);
    m
}

/// First-stage usage per wavelink.
#[derive(Debug, Clone, PartialEq)]
pub struct WavelinkUsage {
    /// `usage[ω][ℓ]`
    usage: Vec<Vec<f64>>,
}

impl WavelinkUsage {
    pub fn zero(topo: &Topology) -> Self {
        Self { usage: vec![vec![0.0; topo.num_arcs()]; topo.wavelengths()] }
    }

    /// Sum x values of a model per wavelink.
    pub fn from_solution(topo: &Topology, model: &Model, values: &[f64]) -> Self {
        let mut u = Self::zero(topo);
        for (j, key) in model.columns_of(VarKind::X) {
            u.usage[key.wavelength.unwrap()][key.arc.unwrap()] += values[j];
        }
        u
    }

    pub fn from_lightpaths(topo: &Topology, lightpaths: &[Lightpath]) -> Self {
        let mut u = Self::zero(topo);
        for lp in lightpaths {
            for &a in &lp.path {
                u.usage[lp.wavelength][a] += 1.0;
            }
        }
        u
    }

    pub fn get(&self, arc: usize, wavelength: usize) -> f64 {
        self.usage[wavelength][arc]
    }

    /// Usage summed over wavelengths per arc (the β values).
    pub fn per_arc(&self) -> Vec<f64> {
        let arcs = self.usage.first().map_or(0, Vec::len);
        (0..arcs).map(|a| self.usage.iter().map(|u| u[a]).sum()).collect()
    }
}

/// Recourse model `Q(x̂, ξ)` with the first stage fixed through `usage`.
pub fn build_recourse(spec: &FormulationSpec, usage: &WavelinkUsage, demand: &DemandMatrix) -> Result<Model, Error> {
    let mut m = Model::new(ObjectiveSense::Maximize);
    add_recourse(&mut m, spec, 0, demand, 1.0, Capacity::Fixed(usage))?;
    Ok(m)
}

/// Relaxed recourse where wavelink capacity is only enforced per arc in aggregate.
pub fn build_aggregated_recourse(spec: &FormulationSpec, beta: &[f64], demand: &DemandMatrix) -> Result<Model, Error> {
    let mut m = Model::new(ObjectiveSense::Maximize);
    add_recourse(&mut m, spec, 0, demand, 1.0, Capacity::Aggregated(beta))?;
    Ok(m)
}

fn add_etas(m: &mut Model, spec: &FormulationSpec) -> Vec<usize> {
    let weight = 1.0 / spec.scenarios.len() as f64;
    spec.scenarios
        .iter()
        .enumerate()
        .map(|(k, dem)| m.add_var(VarKey::eta(k), 0.0, dem.total() as f64, weight, false))
        .collect()
}

/// Deterministic equivalent with one recourse copy per scenario.
pub fn build_extensive(spec: &FormulationSpec) -> Result<Model, Error> {
    let mut m = Model::new(ObjectiveSense::Maximize);
    let x_cols = add_first_stage(&mut m, spec);
    let etas = add_etas(&mut m, spec);
    for (k, dem) in spec.scenarios.iter().enumerate() {
        let zs = add_recourse(&mut m, spec, k, dem, 0.0, Capacity::Coupled(&x_cols))?;
        let mut coeffs = vec![(etas[k], 1.0)];
        coeffs.extend(zs.iter().map(|&z| (z, -1.0)));
        let tag = RowTag { scenario: Some(k), ..RowTag::new(RowKind::Eta) };
        m.add_row(tag, coeffs, Sense::Le, 0.0);
    }
    Ok(m)
}

/// β columns with rows `β_ℓ = Σ x` over the arc. Returns the β column per arc.
fn add_betas(m: &mut Model, spec: &FormulationSpec) -> Vec<usize> {
    let topo = spec.topology();
    let mut per_arc: Vec<Vec<usize>> = vec![Vec::new(); topo.num_arcs()];
    for (j, key) in m.columns_of(VarKind::X) {
        per_arc[key.arc.unwrap()].push(j);
    }
    per_arc
        .into_iter()
        .enumerate()
        .map(|(arc, xs)| {
            let b = m.add_var(VarKey::beta(arc), 0.0, f64::INFINITY, 0.0, false);
            let mut coeffs = vec![(b, 1.0)];
            coeffs.extend(xs.iter().map(|&j| (j, -1.0)));
            m.add_row(RowTag { arc: Some(arc), ..RowTag::new(RowKind::BetaDef) }, coeffs, Sense::Eq, 0.0);
            b
        })
        .collect()
}

/// Benders master: first stage, one η per scenario and optionally β columns.
pub fn build_master(spec: &FormulationSpec, with_beta: bool) -> Model {
    let mut m = Model::new(ObjectiveSense::Maximize);
    add_first_stage(&mut m, spec);
    add_etas(&mut m, spec);
    if with_beta {
        add_betas(&mut m, spec);
    }
    m
}

/// Extensive form of the β master: every scenario block sees the first
/// stage only through per-arc usage, with capacity aggregated per arc.
pub fn build_aggregated_extensive(spec: &FormulationSpec) -> Result<Model, Error> {
    let mut m = Model::new(ObjectiveSense::Maximize);
    add_first_stage(&mut m, spec);
    let etas = add_etas(&mut m, spec);
    let betas = add_betas(&mut m, spec);
    for (k, dem) in spec.scenarios.iter().enumerate() {
        let zs = add_recourse(&mut m, spec, k, dem, 0.0, Capacity::AggregatedCoupled(&betas))?;
        let mut coeffs = vec![(etas[k], 1.0)];
        coeffs.extend(zs.iter().map(|&z| (z, -1.0)));
        let tag = RowTag { scenario: Some(k), ..RowTag::new(RowKind::Eta) };
        m.add_row(tag, coeffs, Sense::Le, 0.0);
    }
    Ok(m)
}

/// Column values of `model` representing the given first-stage lightpaths:
/// x columns on their wavelinks and, if present, β as per-arc usage. Every
/// other column is zero.
pub fn encode_first_stage(model: &Model, lightpaths: &[Lightpath]) -> Result<Vec<f64>, Error> {
    let mut values = vec![0.0; model.num_vars()];
    for lp in lightpaths {
        for &arc in &lp.path {
            let j = model.var_index(&VarKey::x((lp.source, lp.destination), arc, lp.wavelength))?;
            values[j] += 1.0;
            if let Ok(b) = model.var_index(&VarKey::beta(arc)) {
                values[b] += 1.0;
            }
        }
    }
    Ok(values)
}

/// Split integral first-stage flows into lightpaths. Per pair and wavelength,
/// paths are extracted greedily from the source following the lowest arc id
/// with remaining flow; closed walks met on the way are discarded.
pub fn decode_first_stage(spec: &FormulationSpec, model: &Model, values: &[f64]) -> Result<Vec<Lightpath>, Error> {
    let topo = spec.topology();
    let mut flows: BTreeMap<((usize, usize), usize), BTreeMap<usize, u32>> = BTreeMap::new();
    for (j, key) in model.columns_of(VarKind::X) {
        let v = values[j];
        if (v - v.round()).abs() > 1e-4 {
            return Err(Error::Model(format!("cannot decode fractional value {v} of {key}")));
        }
        if v.round() >= 1.0 {
            let arcs = flows.entry((key.pair.unwrap(), key.wavelength.unwrap())).or_default();
            arcs.insert(key.arc.unwrap(), v.round() as u32);
        }
    }
    let mut out = Vec::new();
    for (((s, d), w), mut flow) in flows {
        let starts: u32 = topo.out_of(s).iter().filter_map(|a| flow.get(a)).sum();
        for _ in 0..starts {
            let mut walk: Vec<usize> = Vec::new();
            let mut nodes = vec![s];
            let mut at = s;
            while at != d {
                let next = topo.out_of(at).iter().copied().filter(|a| flow.get(a).is_some_and(|&f| f > 0)).min();
                let Some(arc) = next else {
                    return Err(Error::Model(format!("flow for ({s},{d}) on wavelength {w} does not reach {d}")));
                };
                *flow.get_mut(&arc).unwrap() -= 1;
                let head = topo.arc(arc).head;
                if let Some(pos) = nodes.iter().position(|&n| n == head) {
                    walk.truncate(pos);
                    nodes.truncate(pos + 1);
                } else {
                    walk.push(arc);
                    nodes.push(head);
                }
                at = head;
            }
            out.push(Lightpath { source: s, destination: d, wavelength: w, path: walk });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn spec(problem: Problem, topo: Topology, demand: DemandMatrix) -> FormulationSpec {
        FormulationSpec {
            problem,
            relaxation: Relaxation::IpIp,
            state: NetworkState::empty(Arc::new(topo)),
            new_demand: demand.clone(),
            current_demand: demand,
            scenarios: Vec::new(),
        }
    }

    #[test]
    fn loop_elimination_drops_columns() {
        let t = Topology::from_fibers(2, &[(0, 1)], 1).unwrap();
        let s = spec(Problem::MaxRwa, t, DemandMatrix::from_pairs([((0, 1), 1)]));
        let m = build_first_stage(&s);
        // Arc 1 (1→0) enters the source and leaves the destination.
        assert_eq!(m.num_vars(), 1);
        assert_eq!(m.var_index(&VarKey::x((0, 1), 0, 0)).unwrap(), 0);
        assert!(m.var_index(&VarKey::x((0, 1), 1, 0)).is_err());
    }

    #[test]
    fn var_index_round_trip() {
        let t = Topology::ring(4, 2);
        let mut s = spec(Problem::SmaxRwa, t, DemandMatrix::from_pairs([((0, 2), 1)]));
        s.relaxation = Relaxation::IpLp;
        s.scenarios = vec![DemandMatrix::from_pairs([((1, 3), 2)])];
        let m = build_extensive(&s).unwrap();
        for (j, key) in m.keys().iter().enumerate() {
            assert_eq!(m.var_index(key).unwrap(), j);
        }
        assert_eq!(m.num_vars(), m.lp.num_columns());
    }

    #[test]
    fn decode_discards_closed_walks() {
        let t = Topology::ring(4, 1);
        let s = spec(Problem::MaxRwa, t, DemandMatrix::from_pairs([((0, 1), 1)]));
        let m = build_first_stage(&s);
        let mut values = vec![0.0; m.num_vars()];
        // 0→1 directly, plus a spurious 2→3→2 circulation.
        for key in [VarKey::x((0, 1), 0, 0), VarKey::x((0, 1), 4, 0), VarKey::x((0, 1), 5, 0)] {
            values[m.var_index(&key).unwrap()] = 1.0;
        }
        let paths = decode_first_stage(&s, &m, &values).unwrap();
        assert_eq!(paths, vec![Lightpath { source: 0, destination: 1, wavelength: 0, path: vec![0] }]);
    }

    #[test]
    fn lp_export_mentions_every_variable() {
        let t = Topology::ring(3, 1);
        let s = spec(Problem::MinRwa, t, DemandMatrix::from_pairs([((0, 1), 1)]));
        let m = build_first_stage(&s);
        let mut buf = Vec::new();
        m.write_lp(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("Maximize"));
        for key in m.keys() {
            assert!(text.contains(&key.to_string()));
        }
        assert!(text.contains("General"));
    }
}
