//! Physical network, wavelink occupancy and bundled standard topologies.

use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::sync::Arc as Shared;

use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    pub id: usize,
    pub tail: usize,
    pub head: usize,
}

/// Directed multigraph where every fiber contributes two opposite arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    num_nodes: usize,
    arcs: Vec<Arc>,
    wavelengths: usize,
    out_arcs: Vec<Vec<usize>>,
    in_arcs: Vec<Vec<usize>>,
}

impl Topology {
    /// Build from undirected fibers; fiber `k` becomes arcs `2k` (u→v) and `2k+1` (v→u).
    pub fn from_fibers(num_nodes: usize, fibers: &[(usize, usize)], wavelengths: usize) -> Result<Self, Error> {
        let mut arcs = Vec::with_capacity(2 * fibers.len());
        for (k, &(u, v)) in fibers.iter().enumerate() {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Topology(format!("fiber {k} ({u},{v}) references a node >= {num_nodes}")));
            }
            if u == v {
                return Err(Error::Topology(format!("fiber {k} is a self-loop at node {u}")));
            }
            arcs.push(Arc { id: arcs.len(), tail: u, head: v });
            arcs.push(Arc { id: arcs.len(), tail: v, head: u });
        }
        let mut out_arcs = vec![Vec::new(); num_nodes];
        let mut in_arcs = vec![Vec::new(); num_nodes];
        for a in &arcs {
            out_arcs[a.tail].push(a.id);
            in_arcs[a.head].push(a.id);
        }
        Ok(Self { num_nodes, arcs, wavelengths, out_arcs, in_arcs })
    }

    /// Bidirectional ring 0–1–…–(n−1)–0.
    pub fn ring(num_nodes: usize, wavelengths: usize) -> Self {
        let fibers: Vec<_> = (0..num_nodes).map(|i| (i, (i + 1) % num_nodes)).collect();
        Self::from_fibers(num_nodes, &fibers, wavelengths).expect("ring needs at least two nodes")
    }

    /// Parse the edge-list format: a `nodes <n>` header followed by
    /// `edge <u> <v> [multiplicity]` lines. `#` starts a comment.
    pub fn from_edge_list<R: BufRead>(reader: R, wavelengths: usize) -> Result<Self, Error> {
        let mut num_nodes: Option<usize> = None;
        let mut fibers = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::Topology(format!("line {lineno}: {e}")))?;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Topology(format!("line {lineno}: {msg}: `{content}`"));
            let fields: Vec<&str> = content.split_whitespace().collect();
            let num = |s: &str| s.parse::<usize>().map_err(|_| bad("expected a nonnegative integer"));
            match fields[0] {
                "nodes" => {
                    if fields.len() != 2 || num_nodes.is_some() {
                        return Err(bad("malformed or repeated nodes header"));
                    }
                    num_nodes = Some(num(fields[1])?);
                }
                "edge" => {
                    let n = num_nodes.ok_or_else(|| bad("edge before nodes header"))?;
                    if !(3..=4).contains(&fields.len()) {
                        return Err(bad("expected `edge u v [multiplicity]`"));
                    }
                    let (u, v) = (num(fields[1])?, num(fields[2])?);
                    let mult = if fields.len() == 4 { num(fields[3])? } else { 1 };
                    if u >= n || v >= n {
                        return Err(bad("node id out of range"));
                    }
                    if u == v {
                        return Err(bad("self-loop"));
                    }
                    if mult == 0 {
                        return Err(bad("multiplicity must be positive"));
                    }
                    fibers.extend(std::iter::repeat_n((u, v), mult));
                }
                _ => return Err(bad("unknown directive")),
            }
        }
        let n = num_nodes.ok_or_else(|| Error::Topology("missing `nodes` header".into()))?;
        Self::from_fibers(n, &fibers, wavelengths)
    }

    pub fn from_file(path: &Path, wavelengths: usize) -> Result<Self, Error> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Topology(format!("{}: {e}", path.display())))?;
        Self::from_edge_list(std::io::BufReader::new(file), wavelengths)
    }

    pub fn with_wavelengths(&self, wavelengths: usize) -> Self {
        Self { wavelengths, ..self.clone() }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn wavelengths(&self) -> usize {
        self.wavelengths
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc(&self, id: usize) -> Arc {
        self.arcs[id]
    }

    pub fn delta_out(&self, v: usize) -> Result<&[usize], Error> {
        self.out_arcs.get(v).map(Vec::as_slice).ok_or(Error::UnknownNode(v))
    }

    pub fn delta_in(&self, v: usize) -> Result<&[usize], Error> {
        self.in_arcs.get(v).map(Vec::as_slice).ok_or(Error::UnknownNode(v))
    }

    pub(crate) fn out_of(&self, v: usize) -> &[usize] {
        &self.out_arcs[v]
    }

    pub(crate) fn arcs_into(&self, v: usize) -> &[usize] {
        &self.in_arcs[v]
    }

    /// Whether `path` is a simple directed path from `s` to `d`.
    pub fn is_simple_path(&self, s: usize, d: usize, path: &[usize]) -> bool {
        if path.is_empty() || s == d {
            return false;
        }
        let mut seen = BTreeSet::from([s]);
        let mut at = s;
        for &a in path {
            let Some(arc) = self.arcs.get(a) else { return false };
            if arc.tail != at || !seen.insert(arc.head) {
                return false;
            }
            at = arc.head;
        }
        at == d
    }
}

/// The six bundled networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Network {
    Abilene,
    Cost239,
    Nsf,
    Atlanta,
    Usa,
    Brazil,
}

impl Network {
    pub const ALL: [Network; 6] =
        [Network::Abilene, Network::Cost239, Network::Nsf, Network::Atlanta, Network::Usa, Network::Brazil];

    pub fn name(self) -> &'static str {
        match self {
            Network::Abilene => "abilene",
            Network::Cost239 => "cost239",
            Network::Nsf => "nsf",
            Network::Atlanta => "atlanta",
            Network::Usa => "usa",
            Network::Brazil => "brazil",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.edges", self.name())
    }

    /// Published (node count, directed arc count).
    pub fn expected_size(self) -> (usize, usize) {
        match self {
            Network::Abilene => (12, 30),
            Network::Cost239 => (11, 50),
            Network::Nsf => (14, 42),
            Network::Atlanta => (15, 44),
            Network::Usa => (24, 88),
            Network::Brazil => (27, 140),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.name().eq_ignore_ascii_case(name))
    }

    fn embedded(self) -> &'static str {
        match self {
            Network::Abilene => include_str!("../data/abilene.edges"),
            Network::Cost239 => include_str!("../data/cost239.edges"),
            Network::Nsf => include_str!("../data/nsf.edges"),
            Network::Atlanta => include_str!("../data/atlanta.edges"),
            Network::Usa => include_str!("../data/usa.edges"),
            Network::Brazil => include_str!("../data/brazil.edges"),
        }
    }

    /// Load from `data_dir` when given, otherwise from the copy compiled into the crate.
    pub fn load(self, data_dir: Option<&Path>, wavelengths: usize) -> Result<Topology, Error> {
        match data_dir {
            Some(dir) => Topology::from_file(&dir.join(self.file_name()), wavelengths),
            None => Topology::from_edge_list(self.embedded().as_bytes(), wavelengths),
        }
    }

    /// Check node and arc counts against the published sizes.
    pub fn validate(self, topo: &Topology) -> Result<(), Error> {
        let expected = self.expected_size();
        let got = (topo.num_nodes(), topo.num_arcs());
        if got != expected {
            return Err(Error::Topology(format!(
                "{}: expected {:?} (nodes, arcs), found {:?}",
                self.name(),
                expected,
                got
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A path on a single wavelength between two nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Lightpath {
    pub source: usize,
    pub destination: usize,
    pub wavelength: usize,
    pub path: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveConnection {
    pub lightpath: Lightpath,
    /// The connection leaves once the stage counter reaches this value.
    pub expiry_stage: usize,
}

/// Wavelink occupancy plus the connections responsible for it.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    topology: Shared<Topology>,
    /// `occupied[ω][ℓ]`
    occupied: Vec<Vec<bool>>,
    connections: Vec<ActiveConnection>,
}

impl NetworkState {
    pub fn empty(topology: Shared<Topology>) -> Self {
        let occupied = vec![vec![false; topology.num_arcs()]; topology.wavelengths()];
        Self { topology, occupied, connections: Vec::new() }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn shared_topology(&self) -> Shared<Topology> {
        Shared::clone(&self.topology)
    }

    pub fn connections(&self) -> &[ActiveConnection] {
        &self.connections
    }

    pub fn is_free(&self, arc: usize, wavelength: usize) -> bool {
        !self.occupied[wavelength][arc]
    }

    /// Number of wavelengths on which `arc` is free.
    pub fn free_wavelengths(&self, arc: usize) -> usize {
        self.occupied.iter().filter(|occ| !occ[arc]).count()
    }

    pub fn occupied_count(&self, wavelength: usize) -> usize {
        self.occupied[wavelength].iter().filter(|&&o| o).count()
    }

    /// Total occupied wavelinks.
    pub fn spectrum_usage(&self) -> usize {
        (0..self.occupied.len()).map(|w| self.occupied_count(w)).sum()
    }

    fn check(&self, lp: &Lightpath) -> Result<(), Error> {
        if lp.wavelength >= self.topology.wavelengths() {
            return Err(Error::State(format!("wavelength {} does not exist", lp.wavelength)));
        }
        if !self.topology.is_simple_path(lp.source, lp.destination, &lp.path) {
            return Err(Error::State(format!(
                "path {:?} is not a simple path from {} to {}",
                lp.path, lp.source, lp.destination
            )));
        }
        Ok(())
    }

    /// Add connections; fails without modifying `self` on any wavelength conflict.
    pub fn apply_provisioning(&mut self, assignment: Vec<ActiveConnection>) -> Result<(), Error> {
        let mut claimed = BTreeSet::new();
        for c in &assignment {
            self.check(&c.lightpath)?;
            let w = c.lightpath.wavelength;
            for &a in &c.lightpath.path {
                if self.occupied[w][a] || !claimed.insert((a, w)) {
                    return Err(Error::WavelengthConflict { arc: a, wavelength: w });
                }
            }
        }
        for c in assignment {
            for &a in &c.lightpath.path {
                self.occupied[c.lightpath.wavelength][a] = true;
            }
            self.connections.push(c);
        }
        Ok(())
    }

    /// Remove every connection whose expiry stage is `<= stage`. Returns how many left.
    pub fn drop_expired(&mut self, stage: usize) -> usize {
        let before = self.connections.len();
        let occupied = &mut self.occupied;
        self.connections.retain(|c| {
            if c.expiry_stage <= stage {
                for &a in &c.lightpath.path {
                    occupied[c.lightpath.wavelength][a] = false;
                }
                false
            } else {
                true
            }
        });
        before - self.connections.len()
    }

    /// Swap the whole provisioning for `connections` (a rerouting target).
    pub fn replace_connections(&mut self, connections: Vec<ActiveConnection>) -> Result<(), Error> {
        let mut fresh = Self::empty(Shared::clone(&self.topology));
        fresh.apply_provisioning(connections)?;
        *self = fresh;
        Ok(())
    }
}
