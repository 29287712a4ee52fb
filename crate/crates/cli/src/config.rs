//! Experiment configuration: one TOML file, strict schema, `--set` overrides.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use rwa_core::benders::BendersConfig;
use rwa_core::model::{Problem, Relaxation};
use rwa_core::sim::Policy;
use rwa_core::solver::SolverConfig;
use rwa_core::topology::{Network, Topology};
use rwa_core::traffic::{DemandMatrix, TrafficParams};
use serde::{Deserialize, Serialize};

pub const DATA_DIR_ENV: &str = "SRWA_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Where results go; `--output` overrides it.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub topology: TopologySection,
    #[serde(default)]
    pub traffic: TrafficSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub benders: BendersConfig,
    #[serde(default)]
    pub instance: InstanceSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub saa: SaaSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    /// Bundled network name (abilene, cost239, nsf, atlanta, usa, brazil).
    #[serde(default)]
    pub network: Option<String>,
    /// Edge-list file, instead of `network`.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default = "default_wavelengths")]
    pub wavelengths: usize,
}

fn default_wavelengths() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficSection {
    pub arrival_rate: f64,
    /// Mean holding time in stages.
    pub mean_holding: f64,
}

impl Default for TrafficSection {
    fn default() -> Self {
        Self { arrival_rate: 3.0, mean_holding: 26.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol_feas: f64,
    pub tol_int: f64,
    pub tol_obj: f64,
    /// Per MIP solve; 0 disables the limit.
    pub time_limit_seconds: f64,
    pub max_iterations: usize,
    /// 0 disables the limit.
    pub node_limit: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            tol_feas: d.tol_feas,
            tol_int: d.tol_int,
            tol_obj: d.tol_obj,
            time_limit_seconds: d.time_limit.map_or(0.0, |t| t.as_secs_f64()),
            max_iterations: d.max_iterations,
            node_limit: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceSection {
    pub problem: Problem,
    pub relaxation: Relaxation,
    /// Explicit new requests as `"s,d" = count`; sampled from `traffic` when absent.
    pub demand: Option<DemandMatrix>,
    pub scenarios: usize,
    /// Connections already in the network. For smaxlr and minrwa these are the
    /// connections to reroute.
    pub initial_requests: usize,
    pub seed: u64,
}

impl Default for InstanceSection {
    fn default() -> Self {
        Self {
            problem: Problem::SmaxRwa,
            relaxation: Relaxation::IpLp,
            demand: None,
            scenarios: 10,
            initial_requests: 0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub horizon: usize,
    pub repetitions: usize,
    /// One or two policies; with two, the first is compared against the second.
    pub policies: Vec<Policy>,
    pub scenario_count: usize,
    pub initial_requests: usize,
    pub seed: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            horizon: 52,
            repetitions: 50,
            policies: vec![Policy::SmaxRwa, Policy::MaxRwa],
            scenario_count: 10,
            initial_requests: 0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SaaSection {
    pub levels: Vec<usize>,
    pub repetitions: usize,
    pub evaluation_size: usize,
    /// Evaluate candidates with integer recourse.
    pub exact_recourse: bool,
    pub seed: u64,
}

impl Default for SaaSection {
    fn default() -> Self {
        Self { levels: vec![5, 10, 20], repetitions: 10, evaluation_size: 1000, exact_recourse: false, seed: 1 }
    }
}

impl ExperimentConfig {
    /// Parse `text`, apply `a.b=c` overrides, and check the result.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut tree: toml::Table = toml::from_str(text).context("invalid config")?;
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let config: Self = toml::Value::Table(tree).try_into().context("invalid config")?;
        config.validate()?;
        Ok(config)
    }

    /// Read a config file; a relative `topology.path` is taken relative to the file.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut config = Self::parse(&text, overrides).with_context(|| format!("in {}", path.display()))?;
        if let (Some(edges), Some(dir)) = (&config.topology.path, path.parent()) {
            if edges.is_relative() {
                config.topology.path = Some(dir.join(edges));
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.topology.network, &self.topology.path) {
            (Some(_), Some(_)) => bail!("topology: give either `network` or `path`, not both"),
            (None, None) => bail!("topology: one of `network` or `path` is required"),
            (Some(name), None) if Network::from_name(name).is_none() => bail!("topology: unknown network `{name}`"),
            _ => {}
        }
        if self.topology.wavelengths == 0 {
            bail!("topology: wavelengths must be at least 1");
        }
        self.traffic()?;
        self.solver().validate()?;
        self.benders.validate()?;
        let sim = &self.simulation;
        if sim.policies.is_empty() || sim.policies.len() > 2 {
            bail!("simulation: list one or two policies");
        }
        if sim.policies.len() == 2 && sim.policies[0].is_defrag() != sim.policies[1].is_defrag() {
            bail!("simulation: cannot compare a provisioning policy with a defragmentation policy");
        }
        if self.saa.levels.is_empty() {
            bail!("saa: levels must not be empty");
        }
        Ok(())
    }

    pub fn traffic(&self) -> Result<TrafficParams> {
        Ok(TrafficParams::new(self.traffic.arrival_rate, self.traffic.mean_holding)?)
    }

    pub fn solver(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            tol_feas: s.tol_feas,
            tol_int: s.tol_int,
            tol_obj: s.tol_obj,
            time_limit: (s.time_limit_seconds > 0.0).then(|| Duration::from_secs_f64(s.time_limit_seconds)),
            max_iterations: s.max_iterations,
            node_limit: (s.node_limit > 0).then_some(s.node_limit),
            collect_diagnostics: false,
        }
    }

    /// Load the topology; named networks come from `$SRWA_DATA_DIR` when set.
    pub fn load_topology(&self) -> Result<Topology> {
        let w = self.topology.wavelengths;
        if let Some(path) = &self.topology.path {
            return Ok(Topology::from_file(path, w)?);
        }
        let name = self.topology.network.as_deref().expect("validated");
        let network = Network::from_name(name).expect("validated");
        let dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
        let topo = network.load(dir.as_deref(), w)?;
        network.validate(&topo)?;
        Ok(topo)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// `a.b.c=value`; the value is read as a TOML value, or as a string if that fails.
fn apply_override(tree: &mut toml::Table, assignment: &str) -> Result<()> {
    let Some((key, raw)) = assignment.split_once('=') else {
        bail!("override `{assignment}` is not of the form key=value");
    };
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override `{assignment}` has an empty key segment");
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut table = tree;
    for p in parents {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("override `{assignment}`: `{p}` is not a table"),
        };
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[topology]\nnetwork = \"abilene\"\n";

    #[test]
    fn defaults_fill_missing_sections() {
        let c = ExperimentConfig::parse(MINIMAL, &[]).unwrap();
        assert_eq!(c.topology.wavelengths, 4);
        assert_eq!(c.simulation.repetitions, 50);
        assert_eq!(c.solver().time_limit, Some(Duration::from_secs(600)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::parse(&format!("{MINIMAL}[traffic]\narival_rate = 2.0\n"), &[]).unwrap_err();
        assert!(format!("{err:#}").contains("arival_rate"), "{err:#}");
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}colour = 1\n"), &[]).is_err());
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let sets = ["topology.wavelengths=8", "benders.method=benders-x", "simulation.policies=[\"maxrwa\"]", "solver.time_limit_seconds=0"]
            .map(String::from);
        let c = ExperimentConfig::parse(MINIMAL, &sets).unwrap();
        assert_eq!(c.topology.wavelengths, 8);
        assert_eq!(c.benders.method, rwa_core::benders::Method::BendersX);
        assert_eq!(c.simulation.policies, vec![Policy::MaxRwa]);
        assert_eq!(c.solver().time_limit, None);
        assert!(ExperimentConfig::parse(MINIMAL, &["topology.wavelengths".into()]).is_err());
        assert!(ExperimentConfig::parse(MINIMAL, &["topology.wavelenghts=3".into()]).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::parse(&format!("{MINIMAL}[instance]\ndemand = {{ \"0,3\" = 2 }}\n"), &[]).unwrap();
        let again = ExperimentConfig::parse(&c.to_toml().unwrap(), &[]).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn topology_source_must_be_unique() {
        assert!(ExperimentConfig::parse("[topology]\n", &[]).is_err());
        assert!(ExperimentConfig::parse("[topology]\nnetwork = \"abilene\"\npath = \"x\"\n", &[]).is_err());
        assert!(ExperimentConfig::parse("[topology]\nnetwork = \"arpanet\"\n", &[]).is_err());
    }
}
