//! Brute-force reference answers. Slow on purpose and guarded: exceeding a
//! guard is an error, never a silent truncation.

use num_rational::BigRational;

use crate::deadline::Deadline;
use crate::error::{Error, Result};
use crate::map_exact::{MapSolution, SolveStats};
use crate::network::{joint_with, Instantiation, Network, Query, VarId};
use crate::numeric::{Backend, Prob, ProbValue};

/// Most free-variable completions a marginal may enumerate.
pub const JOINT_GUARD: u128 = 1 << 24;
/// Most MAP assignments [`brute_force_map`] may enumerate.
pub const MAP_GUARD: u128 = 1 << 20;

fn state_count(net: &Network, vars: &[VarId]) -> u128 {
    vars.iter().fold(1u128, |acc, &v| acc.saturating_mul(net.card(v) as u128))
}

/// `p(target)` by summing the joint over every completion.
pub fn brute_force_joint(net: &Network, target: &Instantiation) -> Result<ProbValue> {
    target.check(net)?;
    let free: Vec<VarId> = (0..net.len()).filter(|&v| !target.contains(v)).collect();
    let states = state_count(net, &free);
    if states > JOINT_GUARD {
        return Err(Error::GuardExceeded { states, limit: JOINT_GUARD });
    }
    let mut full: Vec<usize> = target.dense(net.len()).into_iter().map(|s| s.unwrap_or(0)).collect();
    Ok(match net.backend() {
        Backend::Float => sum_completions(&f64::tables(net)?, net, &mut full, &free, &Deadline::none())?.to_value(),
        Backend::Rational => {
            sum_completions(&BigRational::tables(net)?, net, &mut full, &free, &Deadline::none())?.to_value()
        }
    })
}

fn sum_completions<T: Prob>(
    tables: &[Vec<T>],
    net: &Network,
    full: &mut [usize],
    free: &[VarId],
    deadline: &Deadline,
) -> Result<T> {
    for &v in free {
        full[v] = 0;
    }
    let mut acc = T::zero();
    let mut count = 0u32;
    loop {
        acc.add_assign_ref(&joint_with(tables, net, full));
        count = count.wrapping_add(1);
        if count % 65536 == 0 {
            deadline.check()?;
        }
        if !advance(net, full, free) {
            return Ok(acc);
        }
    }
}

/// Lexicographic successor over `vars` (first variable most significant).
fn advance(net: &Network, full: &mut [usize], vars: &[VarId]) -> bool {
    for &v in vars.iter().rev() {
        if full[v] + 1 < net.card(v) {
            full[v] += 1;
            return true;
        }
        full[v] = 0;
    }
    false
}

/// Exhaustive MAP: every MAP assignment in lexicographic order, each scored
/// by a full marginal; the first maximum wins.
pub fn brute_force_map(net: &Network, query: &Query) -> Result<MapSolution> {
    brute_force_map_with(net, query, net.backend(), &Deadline::none())
}

pub fn brute_force_map_with(net: &Network, query: &Query, backend: Backend, deadline: &Deadline) -> Result<MapSolution> {
    query.validate(net)?;
    let map_states = state_count(net, &query.map_vars);
    if map_states > MAP_GUARD {
        return Err(Error::GuardExceeded { states: map_states, limit: MAP_GUARD });
    }
    let free: Vec<VarId> =
        (0..net.len()).filter(|&v| !query.evidence.contains(v) && query.map_vars.binary_search(&v).is_err()).collect();
    let free_states = state_count(net, &free);
    if free_states > JOINT_GUARD {
        return Err(Error::GuardExceeded { states: free_states, limit: JOINT_GUARD });
    }
    fn run<T: Prob>(
        tables: &[Vec<T>],
        net: &Network,
        query: &Query,
        free: &[VarId],
        deadline: &Deadline,
    ) -> Result<(Instantiation, T)> {
        let mut full: Vec<usize> = query.evidence.dense(net.len()).into_iter().map(|s| s.unwrap_or(0)).collect();
        let mut best: Option<(Vec<usize>, T, f64)> = None;
        loop {
            let value = sum_completions(tables, net, &mut full, free, deadline)?;
            let approx = value.approx();
            let better = match &best {
                None => true,
                Some((_, b, ba)) => value.cmp_with_hint(approx, b, *ba) == std::cmp::Ordering::Greater,
            };
            if better {
                best = Some((query.map_vars.iter().map(|&v| full[v]).collect(), value, approx));
            }
            if !advance(net, &mut full, &query.map_vars) {
                break;
            }
        }
        let (states, value, _) = best.expect("at least one MAP assignment");
        if value.is_zero() {
            return Err(Error::AllAssignmentsZero);
        }
        Ok((Instantiation::from_pairs(query.map_vars.iter().copied().zip(states)), value))
    }
    let (assignment, value) = match backend {
        Backend::Float => {
            let (a, v) = run(&f64::tables(net)?, net, query, &free, deadline)?;
            (a, v.to_value())
        }
        Backend::Rational => {
            let (a, v) = run(&BigRational::tables(net)?, net, query, &free, deadline)?;
            (a, v.to_value())
        }
    };
    Ok(MapSolution { assignment, value, stats: SolveStats::default() })
}

/// Number of joint evaluations [`brute_force_map`] would perform.
pub fn map_enumeration_size(net: &Network, query: &Query) -> u128 {
    let nonevidence: Vec<VarId> = (0..net.len()).filter(|&v| !query.evidence.contains(v)).collect();
    state_count(net, &nonevidence)
}
