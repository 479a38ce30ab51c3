//! Approximate MAP: the exact pipeline with each group thinned to one
//! survivor per lattice cell after pruning.
//!
//! Multiplicative cells are geometric with ratio `rho = 1 + eps / (2 w' n')`,
//! where `w'` is the largest cluster size and `n'` the cluster count, so the
//! per-reduction loss compounds to at most `rho^n' <= 1 + eps`. Additive cells
//! have uniform width `eps / (n' d)`, with `d` the largest vector dimension:
//! one reduction moves the final value by less than `d` times the width, and
//! there are `n'` reductions on any root path. Zero entries get a cell of
//! their own so exact zeros are never merged with positive values.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::deadline::Deadline;
use crate::error::{Error, Result};
use crate::map_exact::{solve_generic, Candidate, MapSolution, ParetoSet, SolveOptions};
use crate::network::{Network, Params, Query};
use crate::numeric::{Prob, ProbValue};
use crate::treedecomp::AnnotatedDecomposition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeMode {
    #[serde(alias = "mult")]
    Multiplicative,
    #[serde(alias = "add")]
    Additive,
}

impl FromStr for LatticeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mult" | "multiplicative" => Ok(LatticeMode::Multiplicative),
            "add" | "additive" => Ok(LatticeMode::Additive),
            _ => Err(Error::InvalidArgument(format!("unknown lattice mode `{s}`"))),
        }
    }
}

impl fmt::Display for LatticeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LatticeMode::Multiplicative => "mult",
            LatticeMode::Additive => "add",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub epsilon: f64,
    pub mode: LatticeMode,
    pub w_prime: usize,
    pub n_prime: usize,
    pub d_max: usize,
    /// No nonzero intermediate value falls below this.
    pub floor: f64,
    /// Cell ratio (multiplicative mode).
    pub ratio: f64,
    /// Cell width (additive mode).
    pub step: f64,
    floor_bucket: i64,
}

impl Lattice {
    pub fn new(epsilon: f64, mode: LatticeMode, w_prime: usize, n_prime: usize, d_max: usize, floor: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        if !(floor > 0.0) {
            return Err(Error::InvalidArgument("lattice floor must be positive".into()));
        }
        let (w, n, d) = (w_prime.max(1), n_prime.max(1), d_max.max(1));
        let ratio = 1.0 + epsilon / (2.0 * w as f64 * n as f64);
        let step = epsilon / (n as f64 * d as f64);
        let floor_bucket = match mode {
            LatticeMode::Multiplicative => (-floor.ln() / ratio.ln()).floor() as i64,
            LatticeMode::Additive => (1.0 / step).floor() as i64,
        };
        Ok(Lattice { epsilon, mode, w_prime: w, n_prime: n, d_max: d, floor, ratio, step, floor_bucket })
    }

    pub fn for_problem(
        net: &Network,
        query: &Query,
        ad: &AnnotatedDecomposition,
        epsilon: f64,
        mode: LatticeMode,
    ) -> Result<Self> {
        let evidence = query.evidence.dense(net.len());
        let d_max = ad
            .clusters()
            .iter()
            .map(|c| {
                c.separator()
                    .into_iter()
                    .filter(|&v| evidence[v].is_none() && query.map_vars.binary_search(&v).is_err())
                    .map(|v| net.card(v))
                    .product::<usize>()
            })
            .max()
            .unwrap_or(1);
        let floor = lattice_floor(net).to_f64().max(f64::MIN_POSITIVE);
        Lattice::new(epsilon, mode, ad.max_cluster_size(), ad.len(), d_max, floor)
    }

    /// Cell index of one coordinate; `-1` is the zero cell. Multiplicative
    /// cells count down from 1 (`1.0` is cell 0) and stop at the floor.
    pub fn bucket(&self, x: f64) -> i64 {
        if x <= 0.0 {
            return -1;
        }
        let b = match self.mode {
            LatticeMode::Multiplicative => (-x.ln() / self.ratio.ln()).floor(),
            LatticeMode::Additive => (x / self.step).floor(),
        };
        (b.max(0.0) as i64).min(self.floor_bucket)
    }

    /// Cells per coordinate, zero cell included.
    pub fn cells_per_coordinate(&self) -> i64 {
        self.floor_bucket + 2
    }
}

/// `(min nonzero CPT entry)^n`: every nonzero message entry is a sum of
/// products of at most `n` CPT entries, so none can be smaller.
pub fn lattice_floor(net: &Network) -> ProbValue {
    let n = net.len() as i32;
    match net.params() {
        Params::Float(t) => {
            let min = t.iter().flatten().copied().filter(|&p| p > 0.0).fold(1.0f64, f64::min);
            ProbValue::Float(min.powi(n).max(f64::MIN_POSITIVE))
        }
        Params::Rational(t) => {
            let mut min = <BigRational as One>::one();
            for p in t.iter().flatten() {
                if !Zero::is_zero(p) && *p < min {
                    min = p.clone();
                }
            }
            ProbValue::Rational(num_traits::pow(min, n as usize))
        }
    }
}

pub fn bucket_coords(vector: &[f64], lat: &Lattice) -> Vec<i64> {
    vector.iter().map(|&x| lat.bucket(x)).collect()
}

/// Keeps one candidate per cell: the largest entry sum, ties to the
/// lexicographically smallest processed assignment. Order of first
/// appearance is preserved.
pub fn reduce_group(group: &mut Vec<Candidate<f64>>, lat: &Lattice) {
    let mut cells: HashMap<Vec<i64>, usize> = HashMap::with_capacity(group.len());
    let mut kept: Vec<Candidate<f64>> = Vec::with_capacity(group.len());
    for c in group.drain(..) {
        let key = bucket_coords(&c.vector, lat);
        match cells.get(&key) {
            None => {
                cells.insert(key, kept.len());
                kept.push(c);
            }
            Some(&i) => {
                let (s_new, s_old) = (c.entry_sum(), kept[i].entry_sum());
                if s_new > s_old || (s_new == s_old && c.processed < kept[i].processed) {
                    kept[i] = c;
                }
            }
        }
    }
    *group = kept;
}

pub fn reduce_pareto(set: &mut ParetoSet<f64>, lat: &Lattice) {
    for group in set.groups.values_mut() {
        reduce_group(group, lat);
    }
}

/// What an approximate answer promises about the optimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Guarantee {
    pub mode: LatticeMode,
    pub epsilon: f64,
    pub value: f64,
    /// `value / (1 + eps)` or `value - eps`.
    pub lower_bound_claimed: f64,
    /// The optimum is at most this: `value * (1 + eps)` or `value + eps`.
    pub opt_upper_bound: f64,
}

impl Guarantee {
    pub fn new(mode: LatticeMode, epsilon: f64, value: f64) -> Self {
        let (lower_bound_claimed, opt_upper_bound) = match mode {
            LatticeMode::Multiplicative => (value / (1.0 + epsilon), value * (1.0 + epsilon)),
            LatticeMode::Additive => ((value - epsilon).max(0.0), value + epsilon),
        };
        Guarantee { mode, epsilon, value, lower_bound_claimed, opt_upper_bound }
    }

    /// Whether `value` honours the promise against a known optimum.
    pub fn holds_against(&self, opt: f64) -> bool {
        match self.mode {
            LatticeMode::Multiplicative => self.value * (1.0 + self.epsilon) >= opt,
            LatticeMode::Additive => self.value + self.epsilon >= opt,
        }
    }
}

/// Runs in `f64` whatever the network's parameters are.
pub fn solve_map_approx(
    net: &Network,
    query: &Query,
    ad: &AnnotatedDecomposition,
    epsilon: f64,
    mode: LatticeMode,
    deadline: Deadline,
) -> Result<(MapSolution, Guarantee)> {
    query.validate(net)?;
    let lat = Lattice::for_problem(net, query, ad, epsilon, mode)?;
    let reduce = |g: &mut Vec<Candidate<f64>>| reduce_group(g, &lat);
    let opts = SolveOptions { prune: true, deadline };
    let (assignment, value, stats) = solve_generic(&f64::tables(net)?, net, query, ad, &opts, Some(&reduce))?;
    let guarantee = Guarantee::new(mode, epsilon, value);
    Ok((MapSolution { assignment, value: value.to_value(), stats }, guarantee))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Instantiation, NetworkBuilder};
    use crate::treedecomp::{decompose, Heuristic};

    fn lat(mode: LatticeMode) -> Lattice {
        Lattice::new(0.1, mode, 3, 5, 4, 1e-6).unwrap()
    }

    #[test]
    fn floor_examples() {
        let mut b = NetworkBuilder::new();
        let a = b.var("A", 2);
        let c = b.var("B", 2);
        let d = b.var("C", 2);
        b.parents(c, &[a]).parents(d, &[c]);
        let half = b.build_float(vec![vec![0.5; 2], vec![0.5; 4], vec![0.5; 4]]).unwrap();
        assert_eq!(lattice_floor(&half), ProbValue::Float(0.125));

        let mut b = NetworkBuilder::new();
        let a = b.var("A", 2);
        let c = b.var("B", 2);
        b.parents(c, &[a]);
        let det = b.build_float(vec![vec![1.0, 0.0], vec![0.0, 1.0, 1.0, 0.0]]).unwrap();
        assert_eq!(lattice_floor(&det), ProbValue::Float(1.0));
    }

    #[test]
    fn bucket_examples() {
        for mode in [LatticeMode::Multiplicative, LatticeMode::Additive] {
            let l = lat(mode);
            assert_eq!(l.bucket(0.0), -1);
            assert!(l.bucket(1e-300) >= 0);
        }
        let m = lat(LatticeMode::Multiplicative);
        assert_eq!(m.bucket(1.0), 0);
        let x = m.ratio.powf(-(7.3));
        let y = x / m.ratio.powf(0.4);
        assert_eq!(m.bucket(x), 7);
        assert_eq!(m.bucket(y), 7);
        assert_eq!(m.bucket(1e-300), m.cells_per_coordinate() - 2);
    }

    #[test]
    fn reduction_keeps_one_per_cell() {
        let l = lat(LatticeMode::Multiplicative);
        let a = Candidate::new(vec![], vec![0], vec![0.5, 0.25]);
        let b = Candidate::new(vec![], vec![1], vec![0.5 * (1.0 + 1e-9), 0.25]);
        let c = Candidate::new(vec![], vec![2], vec![0.1, 0.6]);
        let mut g = vec![a, b.clone(), c];
        reduce_group(&mut g, &l);
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].processed, b.processed);

        let mut single = vec![Candidate::new(vec![], vec![0], vec![0.0, 0.4])];
        reduce_group(&mut single, &l);
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn approx_solve_respects_guarantee_on_small_chain() {
        let mut b = NetworkBuilder::new();
        let a = b.var("A", 3);
        let c = b.var("B", 2);
        b.parents(c, &[a]);
        let net = b.build_float(vec![vec![0.2, 0.3, 0.5], vec![0.9, 0.1, 0.6, 0.4, 0.1, 0.9]]).unwrap();
        let q = Query::new(vec![0], Instantiation::from_pairs([(1, 0)]));
        let ad = decompose(&net, &q, Heuristic::MinFill).unwrap();
        for mode in [LatticeMode::Multiplicative, LatticeMode::Additive] {
            let (sol, g) = solve_map_approx(&net, &q, &ad, 0.5, mode, Deadline::none()).unwrap();
            assert!(g.holds_against(0.18));
            assert!(sol.value.to_f64() <= 0.18 + 1e-15);
        }
    }

    #[test]
    fn epsilon_out_of_range_is_rejected() {
        assert!(Lattice::new(0.0, LatticeMode::Additive, 1, 1, 1, 0.5).is_err());
        assert!(Lattice::new(1.5, LatticeMode::Additive, 1, 1, 1, 0.5).is_err());
    }
}
