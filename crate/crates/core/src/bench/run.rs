use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use super::generate::{gen_random_instance, SuiteSpec};
use crate::deadline::Deadline;
use crate::error::{Error, Result};
use crate::fptas::{solve_map_approx, LatticeMode};
use crate::map_exact::{solve_map_with, MapSolution, SolveOptions};
use crate::network::{Network, Query};
use crate::numeric::Backend;
use crate::oracle::{brute_force_map_with, map_enumeration_size};
use crate::treedecomp::{decompose, Heuristic};

/// Oracle runs are skipped above this many joint evaluations.
const ORACLE_BUDGET: u128 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverSpec {
    Exact,
    Approx { epsilon: f64, mode: LatticeMode },
    Oracle,
}

impl SolverSpec {
    pub fn is_pareto_based(&self) -> bool {
        !matches!(self, SolverSpec::Oracle)
    }
}

impl FromStr for SolverSpec {
    type Err = Error;

    /// `exact`, `oracle` or `approx:<eps>[:mult|add]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown solver `{s}`"));
        let mut parts = s.split(':');
        match parts.next() {
            Some("exact") if parts.next().is_none() => Ok(SolverSpec::Exact),
            Some("oracle") if parts.next().is_none() => Ok(SolverSpec::Oracle),
            Some("approx") => {
                let epsilon: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let mode = parts.next().map_or(Ok(LatticeMode::Multiplicative), str::parse)?;
                if parts.next().is_some() || !(epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(bad());
                }
                Ok(SolverSpec::Approx { epsilon, mode })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverSpec::Exact => f.write_str("exact"),
            SolverSpec::Oracle => f.write_str("oracle"),
            SolverSpec::Approx { epsilon, mode } => write!(f, "approx:{epsilon}:{mode}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Timeout,
    /// Not attempted, e.g. the oracle on a large search space.
    Skipped,
    Error,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Ok => "ok",
            Status::Timeout => "timeout",
            Status::Skipped => "skipped",
            Status::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub suite: String,
    pub instance: usize,
    pub ss_log2: f64,
    pub solver: String,
    /// Position of the solver in the requested list, for stable ordering.
    #[serde(skip)]
    pub solver_index: usize,
    pub status: Status,
    pub ms: f64,
    pub value: Option<f64>,
    pub avg_pareto: Option<f64>,
    pub avg_dim: Option<f64>,
    #[serde(skip)]
    pub message: Option<String>,
}

fn run_one(net: &Network, query: &Query, solver: SolverSpec, timeout: Duration) -> (Status, Option<MapSolution>, Option<String>) {
    let deadline = Deadline::after(timeout);
    let result = match solver {
        SolverSpec::Oracle => {
            if map_enumeration_size(net, query) > ORACLE_BUDGET {
                return (Status::Skipped, None, Some("search space over oracle budget".into()));
            }
            brute_force_map_with(net, query, Backend::Float, &deadline)
        }
        SolverSpec::Exact => decompose(net, query, Heuristic::MinFill).and_then(|ad| {
            solve_map_with(net, query, &ad, Backend::Float, &SolveOptions { prune: true, deadline })
        }),
        SolverSpec::Approx { epsilon, mode } => decompose(net, query, Heuristic::MinFill)
            .and_then(|ad| solve_map_approx(net, query, &ad, epsilon, mode, deadline))
            .map(|(s, _)| s),
    };
    match result {
        Ok(sol) => (Status::Ok, Some(sol), None),
        Err(Error::Timeout) => (Status::Timeout, None, None),
        Err(Error::GuardExceeded { .. }) => (Status::Skipped, None, Some("oracle guard".into())),
        Err(e) => (Status::Error, None, Some(e.to_string())),
    }
}

/// Generates every suite's instances and runs every solver on each, in
/// parallel on the current rayon pool. Failures become records.
pub fn run_suite(specs: &[SuiteSpec], solvers: &[SolverSpec], timeout: Duration) -> Result<Vec<RunRecord>> {
    for s in specs {
        s.validate()?;
    }
    let jobs: Vec<(usize, usize)> =
        specs.iter().enumerate().flat_map(|(si, s)| (0..s.queries).map(move |i| (si, i))).collect();
    let instances: Vec<(usize, usize, Result<(Network, Query)>)> =
        jobs.par_iter().map(|&(si, i)| (si, i, gen_random_instance(&specs[si], i))).collect();
    let mut records: Vec<RunRecord> = instances
        .par_iter()
        .flat_map_iter(|(si, i, inst)| {
            let suite = &specs[*si].name;
            solvers.iter().enumerate().map(move |(k, &solver)| {
                let mut rec = RunRecord {
                    suite: suite.clone(),
                    instance: *i,
                    ss_log2: 0.0,
                    solver: solver.to_string(),
                    solver_index: k,
                    status: Status::Error,
                    ms: 0.0,
                    value: None,
                    avg_pareto: None,
                    avg_dim: None,
                    message: None,
                };
                let (net, query) = match inst {
                    Ok(x) => x,
                    Err(e) => {
                        rec.message = Some(e.to_string());
                        return rec;
                    }
                };
                rec.ss_log2 = query.search_space_log2(net);
                let start = Instant::now();
                let (status, sol, message) = run_one(net, query, solver, timeout);
                rec.ms = start.elapsed().as_secs_f64() * 1e3;
                rec.status = status;
                rec.message = message;
                if let Some(sol) = sol {
                    rec.value = Some(sol.value.to_f64());
                    if solver.is_pareto_based() {
                        rec.avg_pareto = Some(sol.stats.avg_pareto);
                        rec.avg_dim = Some(sol.stats.avg_dim);
                    }
                }
                rec
            })
        })
        .collect();
    records.sort_by(|a, b| (&a.suite, a.instance, a.solver_index).cmp(&(&b.suite, b.instance, b.solver_index)));
    Ok(records)
}
