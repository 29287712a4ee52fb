//! Random traffic: Poisson batches over uniform ordered pairs, ceil-exponential
//! holding times and i.i.d. scenario samples.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::Error;

pub type Rng64 = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mix a base seed with stream identifiers (splitmix64 finalizer per word).
pub fn derive_seed(base: u64, stream: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    stream.iter().fold(mix(base), |acc, &s| mix(acc ^ mix(s)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficParams {
    /// Mean batch size per stage.
    pub arrival_rate: f64,
    /// Mean holding time in stages.
    pub mean_holding: f64,
}

impl TrafficParams {
    pub fn new(arrival_rate: f64, mean_holding: f64) -> Result<Self, Error> {
        let p = Self { arrival_rate, mean_holding };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.arrival_rate > 0.0 && self.arrival_rate.is_finite()) {
            return Err(Error::Config(format!("arrival_rate must be positive, got {}", self.arrival_rate)));
        }
        if !(self.mean_holding > 0.0 && self.mean_holding.is_finite()) {
            return Err(Error::Config(format!("mean_holding must be positive, got {}", self.mean_holding)));
        }
        Ok(())
    }
}

/// Requested lightpath counts per ordered node pair. Zero counts are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "BTreeMap<String, u32>", try_from = "BTreeMap<String, u32>")]
pub struct DemandMatrix {
    counts: BTreeMap<(usize, usize), u32>,
}

impl DemandMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = ((usize, usize), u32)>>(pairs: I) -> Self {
        let mut m = Self::new();
        for (p, c) in pairs {
            m.add(p, c);
        }
        m
    }

    pub fn add(&mut self, pair: (usize, usize), count: u32) {
        if count > 0 {
            *self.counts.entry(pair).or_insert(0) += count;
        }
    }

    pub fn get(&self, pair: (usize, usize)) -> u32 {
        self.counts.get(&pair).copied().unwrap_or(0)
    }

    /// Pairs with positive demand, in ascending order.
    pub fn pairs(&self) -> impl Iterator<Item = ((usize, usize), u32)> + '_ {
        self.counts.iter().map(|(&p, &c)| (p, c))
    }

    pub fn num_pairs(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u32 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

impl From<DemandMatrix> for BTreeMap<String, u32> {
    fn from(m: DemandMatrix) -> Self {
        m.counts.into_iter().map(|((s, d), c)| (format!("{s},{d}"), c)).collect()
    }
}

impl TryFrom<BTreeMap<String, u32>> for DemandMatrix {
    type Error = String;

    fn try_from(map: BTreeMap<String, u32>) -> Result<Self, String> {
        let mut m = DemandMatrix::new();
        for (k, c) in map {
            let (s, d) = k.split_once(',').ok_or_else(|| format!("bad pair key `{k}`"))?;
            let s = s.trim().parse().map_err(|_| format!("bad pair key `{k}`"))?;
            let d = d.trim().parse().map_err(|_| format!("bad pair key `{k}`"))?;
            if s == d {
                return Err(format!("pair `{k}` has equal endpoints"));
            }
            m.add((s, d), c);
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSample {
    pub seed: u64,
    pub scenarios: Vec<DemandMatrix>,
}

impl ScenarioSample {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

/// One request of a batch, in arrival order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Request {
    pub pair: (usize, usize),
    pub holding: usize,
}

/// Uniform ordered pair `s != d`.
pub fn sample_pair<R: Rng + ?Sized>(num_nodes: usize, rng: &mut R) -> (usize, usize) {
    let k = rng.random_range(0..num_nodes * (num_nodes - 1));
    let s = k / (num_nodes - 1);
    let mut d = k % (num_nodes - 1);
    if d >= s {
        d += 1;
    }
    (s, d)
}

fn batch_size<R: Rng + ?Sized>(params: &TrafficParams, rng: &mut R) -> usize {
    let dist = Poisson::new(params.arrival_rate).expect("validated arrival rate");
    dist.sample(rng) as usize
}

pub fn sample_batch<R: Rng + ?Sized>(params: &TrafficParams, num_nodes: usize, rng: &mut R) -> DemandMatrix {
    assert!(num_nodes >= 2, "traffic needs at least two nodes");
    let n = batch_size(params, rng);
    let mut m = DemandMatrix::new();
    for _ in 0..n {
        m.add(sample_pair(num_nodes, rng), 1);
    }
    m
}

/// Ceil of an exponential draw with the configured mean, at least 1.
pub fn sample_holding<R: Rng + ?Sized>(params: &TrafficParams, rng: &mut R) -> usize {
    let dist = Exp::new(1.0 / params.mean_holding).expect("validated holding mean");
    let h: f64 = dist.sample(rng);
    (h.ceil() as usize).max(1)
}

/// A batch with per-request holding times, for simulation sample paths.
pub fn sample_requests<R: Rng + ?Sized>(params: &TrafficParams, num_nodes: usize, rng: &mut R) -> Vec<Request> {
    let n = batch_size(params, rng);
    (0..n)
        .map(|_| {
            let pair = sample_pair(num_nodes, rng);
            Request { pair, holding: sample_holding(params, rng) }
        })
        .collect()
}

pub fn sample_scenarios(params: &TrafficParams, num_nodes: usize, count: usize, seed: u64) -> ScenarioSample {
    let mut rng = rng_from_seed(seed);
    let scenarios = (0..count).map(|_| sample_batch(params, num_nodes, &mut rng)).collect();
    ScenarioSample { seed, scenarios }
}

/// Closed-form mean of `ceil(Exp(rate))`: `1 / (1 - e^{-rate})`.
pub fn ceil_exponential_mean(rate: f64) -> f64 {
    1.0 / (1.0 - (-rate).exp())
}
