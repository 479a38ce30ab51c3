//! Seeded random networks in the shape of the usual benchmark families, with
//! MAP variables added as uniform roots above the base network's extreme
//! nodes.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Instantiation, Network, NetworkBuilder, Query};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Family {
    /// Random tree, randomly oriented.
    Poly,
    /// Each node draws up to three earlier parents.
    Rand,
    /// Subgraph of a random k-tree, edges oriented by id.
    RandTw(usize),
    /// 37 nodes, 46 edges, at most 4 parents.
    AlarmLike,
    /// 27 nodes, 52 edges, at most 3 parents.
    InsuranceLike,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poly" => Ok(Family::Poly),
            "rand" => Ok(Family::Rand),
            "alarm-like" => Ok(Family::AlarmLike),
            "insurance-like" => Ok(Family::InsuranceLike),
            _ => s
                .strip_prefix("rand-tw")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(Family::RandTw)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown family `{s}`"))),
        }
    }
}

impl TryFrom<String> for Family {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Family> for String {
    fn from(f: Family) -> String {
        f.to_string()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Poly => f.write_str("poly"),
            Family::Rand => f.write_str("rand"),
            Family::RandTw(k) => write!(f, "rand-tw{k}"),
            Family::AlarmLike => f.write_str("alarm-like"),
            Family::InsuranceLike => f.write_str("insurance-like"),
        }
    }
}

/// Half-open range `[lo, hi)` of log2 search-space sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Bucket {
    pub lo: f64,
    pub hi: Option<f64>,
}

impl Bucket {
    pub const STANDARD: [Bucket; 4] = [
        Bucket { lo: 0.0, hi: Some(10.0) },
        Bucket { lo: 10.0, hi: Some(20.0) },
        Bucket { lo: 20.0, hi: Some(40.0) },
        Bucket { lo: 40.0, hi: None },
    ];

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && self.hi.map_or(true, |h| x < h)
    }

    /// The standard bucket holding `x`.
    pub fn standard_for(x: f64) -> Bucket {
        Self::STANDARD.into_iter().find(|b| b.contains(x)).unwrap_or(Self::STANDARD[0])
    }
}

impl FromStr for Bucket {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad bucket `{s}`, expected `a-b` or `a+`"));
        if let Some(lo) = s.strip_suffix('+') {
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            return Ok(Bucket { lo, hi: None });
        }
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        let lo: f64 = a.trim().parse().map_err(|_| bad())?;
        let hi: f64 = b.trim().parse().map_err(|_| bad())?;
        if !(lo >= 0.0 && hi > lo) {
            return Err(bad());
        }
        Ok(Bucket { lo, hi: Some(hi) })
    }
}

impl TryFrom<String> for Bucket {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Bucket> for String {
    fn from(b: Bucket) -> String {
        b.to_string()
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(h) => write!(f, "{}-{}", self.lo, h),
            None => write!(f, "{}+", self.lo),
        }
    }
}

fn default_queries() -> usize {
    10
}

fn default_evidence() -> f64 {
    0.5
}

fn default_max_card() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub name: String,
    pub family: Family,
    /// Nodes before MAP augmentation; fixed for the named topologies.
    #[serde(default)]
    pub base_size: usize,
    #[serde(default = "default_max_card")]
    pub max_card: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_queries")]
    pub queries: usize,
    pub bucket: Bucket,
    /// Chance that each leaf is observed.
    #[serde(default = "default_evidence")]
    pub evidence: f64,
}

impl SuiteSpec {
    pub fn validate(&self) -> Result<()> {
        if !(2..=5).contains(&self.max_card) {
            return Err(Error::InvalidArgument(format!("max_card {} outside 2..=5", self.max_card)));
        }
        if !(0.0..=1.0).contains(&self.evidence) {
            return Err(Error::InvalidArgument(format!("evidence rate {} outside [0, 1]", self.evidence)));
        }
        let fixed = matches!(self.family, Family::AlarmLike | Family::InsuranceLike);
        if !fixed && self.base_size < 2 {
            return Err(Error::InvalidArgument("base_size must be at least 2".into()));
        }
        if let Family::RandTw(k) = self.family {
            if self.base_size <= k {
                return Err(Error::InvalidArgument(format!("rand-tw{k} needs more than {k} nodes")));
            }
        }
        Ok(())
    }
}

/// Parent lists of a DAG over `0..n`.
type Dag = Vec<Vec<usize>>;

fn random_tree(n: usize, max_parents: usize, rng: &mut ChaCha8Rng) -> Dag {
    let mut parents = vec![Vec::new(); n];
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let (child, parent) = if rng.gen_bool(0.5) { (i, j) } else { (j, i) };
        if parents[child].len() < max_parents {
            parents[child].push(parent);
        } else {
            parents[parent].push(child);
        }
    }
    parents
}

fn random_dag(n: usize, max_parents: usize, rng: &mut ChaCha8Rng) -> Dag {
    (0..n)
        .map(|i| {
            if i == 0 {
                return Vec::new();
            }
            let k = rng.gen_range(1..=max_parents.min(i));
            let mut ps: Vec<usize> = rand::seq::index::sample(rng, i, k).into_iter().collect();
            ps.sort_unstable();
            ps
        })
        .collect()
}

/// Every edge of a random k-tree kept with probability 0.8, plus the edge
/// that keeps each node attached. Parents of a node lie in one clique, so the
/// moral graph stays inside the k-tree.
fn random_partial_ktree(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Dag {
    let mut parents: Dag = vec![Vec::new(); n];
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    for i in 1..=k.min(n - 1) {
        parents[i] = (0..i).collect();
    }
    if n > k {
        cliques.push((0..=k).collect());
    }
    for v in k + 1..n {
        let base = cliques.choose(rng).expect("seed clique").clone();
        let drop = rng.gen_range(0..base.len());
        let attach: Vec<usize> = base.iter().enumerate().filter(|&(i, _)| i != drop).map(|(_, &u)| u).collect();
        let mut ps: Vec<usize> = attach.iter().copied().filter(|_| rng.gen_bool(0.8)).collect();
        if ps.is_empty() {
            ps.push(*attach.choose(rng).expect("k >= 1"));
        }
        ps.sort_unstable();
        parents[v] = ps;
        let mut c = attach;
        c.push(v);
        cliques.push(c);
    }
    parents
}

/// Spanning tree over a random order, then extra forward edges up to `edges`.
fn shaped_dag(n: usize, edges: usize, max_parents: usize, rng: &mut ChaCha8Rng) -> Dag {
    let mut parents: Dag = vec![Vec::new(); n];
    for i in 1..n {
        // favour nearby nodes so the graph has some locality
        let lo = i.saturating_sub(8);
        parents[i].push(rng.gen_range(lo..i));
    }
    let mut count = n - 1;
    let mut attempts = 0;
    while count < edges && attempts < 100_000 {
        attempts += 1;
        let i = rng.gen_range(1..n);
        let j = rng.gen_range(i.saturating_sub(12)..i);
        if parents[i].len() < max_parents && !parents[i].contains(&j) {
            parents[i].push(j);
            count += 1;
        }
    }
    for ps in &mut parents {
        ps.sort_unstable();
    }
    parents
}

fn base_dag(spec: &SuiteSpec, rng: &mut ChaCha8Rng) -> Dag {
    match spec.family {
        Family::Poly => random_tree(spec.base_size, 3, rng),
        Family::Rand => random_dag(spec.base_size, 3, rng),
        Family::RandTw(k) => random_partial_ktree(spec.base_size, k, rng),
        Family::AlarmLike => shaped_dag(37, 46, 4, rng),
        Family::InsuranceLike => shaped_dag(27, 52, 3, rng),
    }
}

/// A uniform draw from the probability simplex.
fn simplex_row(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter().map(|x| x / total).collect()
    } else {
        vec![1.0 / k as f64; k]
    }
}

const ATTEMPTS: u64 = 64;

/// The `index`-th instance of a suite; identical for identical inputs.
pub fn gen_random_instance(spec: &SuiteSpec, index: usize) -> Result<(Network, Query)> {
    spec.validate()?;
    let mut best: Option<(f64, (Network, Query))> = None;
    for attempt in 0..ATTEMPTS {
        let seed = spec.seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ attempt.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, query) = build_instance(spec, &mut rng)?;
        let ss = query.search_space_log2(&net);
        if spec.bucket.contains(ss) {
            return Ok((net, query));
        }
        let miss = if ss < spec.bucket.lo { spec.bucket.lo - ss } else { ss - spec.bucket.hi.unwrap_or(ss) };
        if best.as_ref().map_or(true, |(m, _)| miss < *m) {
            best = Some((miss, (net, query)));
        }
    }
    Ok(best.expect("at least one attempt").1)
}

fn build_instance(spec: &SuiteSpec, rng: &mut ChaCha8Rng) -> Result<(Network, Query)> {
    let mut parents = base_dag(spec, rng);
    let n = parents.len();
    let mut cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=spec.max_card)).collect();
    let mut has_child = vec![false; n];
    for ps in &parents {
        for &p in ps {
            has_child[p] = true;
        }
    }
    let mut extreme: Vec<usize> = (0..n).filter(|&v| parents[v].is_empty() || !has_child[v]).collect();
    extreme.shuffle(rng);

    // k-tree shapes take one MAP parent per node so the width grows by at most one
    let per_node = if matches!(spec.family, Family::RandTw(_)) { 1 } else { 2 };
    let mut slots: Vec<usize> = (0..per_node).flat_map(|_| extreme.iter().copied()).collect();
    slots.truncate(n);
    let mut ss = 0.0;
    let mut map_vars = Vec::new();
    for target in slots {
        if ss >= spec.bucket.lo && !map_vars.is_empty() {
            break;
        }
        let card = rng.gen_range(2..=spec.max_card);
        let id = parents.len();
        parents.push(Vec::new());
        cards.push(card);
        has_child.push(true);
        parents[target].push(id);
        map_vars.push(id);
        ss += (card as f64).log2();
    }

    let mut nb = NetworkBuilder::new();
    for (v, &c) in cards.iter().enumerate() {
        let name = if v < n { format!("B{v}") } else { format!("M{}", v - n) };
        nb.var(name, c);
    }
    let mut tables = Vec::with_capacity(cards.len());
    for v in 0..cards.len() {
        nb.parents(v, &parents[v]);
        if v >= n {
            tables.push(vec![1.0 / cards[v] as f64; cards[v]]);
        } else {
            let rows: usize = parents[v].iter().map(|&p| cards[p]).product();
            tables.push((0..rows).flat_map(|_| simplex_row(cards[v], rng)).collect());
        }
    }
    let net = nb.build_float(tables)?;

    let mut evidence = Instantiation::new();
    for v in 0..n {
        if !has_child[v] && rng.gen_bool(spec.evidence) {
            evidence.set(v, rng.gen_range(0..cards[v]));
        }
    }
    Ok((net, Query::new(map_vars, evidence)))
}
