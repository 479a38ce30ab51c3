//! Exact MAP by pareto-set propagation.
//!
//! Every cluster emits a set of candidates. A candidate records the MAP
//! states already maximised out below the cluster, the states of MAP
//! variables still visible in the separator (its group key), and a vector
//! over the remaining separator variables. Only candidates with the same
//! group key are compared: two partial solutions that disagree on a MAP
//! variable the parent still has to see meet different CPT factors upstream,
//! so one cannot stand in for the other.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_rational::BigRational;

use crate::deadline::Deadline;
use crate::error::{Error, Result};
use crate::index::{carry_deltas, product, row_major_strides, Odometer};
use crate::network::{Instantiation, Network, Query, VarId};
use crate::numeric::{Backend, Prob, ProbValue};
use crate::treedecomp::AnnotatedDecomposition;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T> {
    /// States of the cluster's separator MAP variables.
    pub key: Vec<usize>,
    /// States of the MAP variables eliminated in this subtree, by ascending id.
    pub processed: Vec<usize>,
    pub vector: Vec<T>,
    approx: Vec<f64>,
}

impl<T: Prob> Candidate<T> {
    pub fn new(key: Vec<usize>, processed: Vec<usize>, vector: Vec<T>) -> Self {
        let approx = vector.iter().map(Prob::approx).collect();
        Candidate { key, processed, vector, approx }
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn approx(&self) -> &[f64] {
        &self.approx
    }

    pub fn entry_sum(&self) -> f64 {
        self.approx.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Relation {
    Equal,
    Dominates,
    DominatedBy,
    Incomparable,
}

fn relation<T: Prob>(a: &Candidate<T>, b: &Candidate<T>) -> Relation {
    let mut ge = true;
    let mut le = true;
    for i in 0..a.vector.len() {
        match a.vector[i].cmp_with_hint(a.approx[i], &b.vector[i], b.approx[i]) {
            Ordering::Greater => le = false,
            Ordering::Less => ge = false,
            Ordering::Equal => {}
        }
        if !ge && !le {
            return Relation::Incomparable;
        }
    }
    match (ge, le) {
        (true, true) => Relation::Equal,
        (true, false) => Relation::Dominates,
        (false, true) => Relation::DominatedBy,
        (false, false) => Relation::Incomparable,
    }
}

/// `a >= b` entrywise with at least one strict entry.
pub fn dominates<T: Prob>(a: &Candidate<T>, b: &Candidate<T>) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::CandidateMismatch(format!("dimensions {} and {}", a.dim(), b.dim())));
    }
    if a.key != b.key {
        return Err(Error::CandidateMismatch("different group keys".into()));
    }
    Ok(relation(a, b) == Relation::Dominates)
}

/// Mutually non-dominated candidates, grouped by key.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoSet<T> {
    pub groups: BTreeMap<Vec<usize>, Vec<Candidate<T>>>,
}

impl<T> Default for ParetoSet<T> {
    fn default() -> Self {
        ParetoSet { groups: BTreeMap::new() }
    }
}

impl<T: Prob> ParetoSet<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.values().all(Vec::is_empty)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Candidate<T>> {
        self.groups.values().flatten()
    }

    /// Adds `c` unless something in its group dominates or equals it; drops
    /// whatever `c` dominates. Among identical vectors the lexicographically
    /// smallest processed assignment stays. Returns whether `c` was kept.
    pub fn insert(&mut self, c: Candidate<T>) -> bool {
        let group = self.groups.entry(c.key.clone()).or_default();
        let mut rels = Vec::with_capacity(group.len());
        for f in group.iter() {
            let r = relation(f, &c);
            match r {
                Relation::Dominates => return false,
                Relation::Equal if f.processed <= c.processed => return false,
                _ => {}
            }
            rels.push(r);
        }
        let mut i = 0;
        group.retain(|_| {
            let keep = !matches!(rels[i], Relation::DominatedBy | Relation::Equal);
            i += 1;
            keep
        });
        group.push(c);
        true
    }

    /// Adds without any dominance check.
    pub fn push_unpruned(&mut self, c: Candidate<T>) {
        self.groups.entry(c.key.clone()).or_default().push(c);
    }
}

/// Prunes a flat list into a pareto set.
pub fn prune<T: Prob>(cands: Vec<Candidate<T>>) -> ParetoSet<T> {
    let mut set = ParetoSet::new();
    for c in cands {
        set.insert(c);
    }
    set
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Disable only to cross-check pruning; the sets then grow exponentially.
    pub prune: bool,
    pub deadline: Deadline,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { prune: true, deadline: Deadline::none() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub clusters: usize,
    pub width: usize,
    /// Candidates kept after each cluster, in processing order.
    pub pareto_sizes: Vec<usize>,
    /// Vector dimension of each cluster's candidates, in processing order.
    pub dims: Vec<usize>,
    pub avg_pareto: f64,
    pub avg_dim: f64,
    pub max_pareto: usize,
    pub candidates_generated: u64,
    /// Smallest nonzero vector entry seen in any kept candidate.
    pub min_nonzero_entry: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSolution {
    pub assignment: Instantiation,
    /// `p(assignment, evidence)`.
    pub value: ProbValue,
    pub stats: SolveStats,
}

pub fn solve_map(net: &Network, query: &Query, ad: &AnnotatedDecomposition, backend: Backend) -> Result<MapSolution> {
    solve_map_with(net, query, ad, backend, &SolveOptions::default())
}

pub fn solve_map_with(
    net: &Network,
    query: &Query,
    ad: &AnnotatedDecomposition,
    backend: Backend,
    opts: &SolveOptions,
) -> Result<MapSolution> {
    query.validate(net)?;
    match backend {
        Backend::Float => {
            let (assignment, value, stats) = solve_generic(&f64::tables(net)?, net, query, ad, opts, None)?;
            Ok(MapSolution { assignment, value: value.to_value(), stats })
        }
        Backend::Rational => {
            let (assignment, value, stats) = solve_generic(&BigRational::tables(net)?, net, query, ad, opts, None)?;
            Ok(MapSolution { assignment, value: value.to_value(), stats })
        }
    }
}

/// Per-group thinning applied after each cluster's pruning.
pub type Reducer<'a, T> = &'a (dyn Fn(&mut Vec<Candidate<T>>) + Sync);

pub(crate) fn solve_generic<T: Prob>(
    tables: &[Vec<T>],
    net: &Network,
    query: &Query,
    ad: &AnnotatedDecomposition,
    opts: &SolveOptions,
    reduce: Option<Reducer<'_, T>>,
) -> Result<(Instantiation, T, SolveStats)> {
    let plan = MapPlan::new(tables, net, query, ad)?;
    let mut sets: Vec<Option<ParetoSet<T>>> = vec![None; ad.len()];
    let mut stats = SolveStats {
        clusters: ad.len(),
        width: ad.width(),
        min_nonzero_entry: f64::INFINITY,
        ..SolveStats::default()
    };
    for &j in ad.order().iter().rev() {
        opts.deadline.check()?;
        let kids: Vec<ParetoSet<T>> =
            ad.cluster(j).children.iter().map(|&c| sets[c].take().expect("child processed")).collect();
        let kid_refs: Vec<&ParetoSet<T>> = kids.iter().collect();
        let set = plan.combine_cluster(j, &kid_refs, opts, reduce, &mut stats.candidates_generated)?;
        stats.pareto_sizes.push(set.len());
        stats.dims.push(plan.dims[j]);
        for c in set.iter() {
            for &x in c.approx() {
                if x > 0.0 && x < stats.min_nonzero_entry {
                    stats.min_nonzero_entry = x;
                }
            }
        }
        sets[j] = Some(set);
    }
    let k = stats.pareto_sizes.len().max(1) as f64;
    stats.avg_pareto = stats.pareto_sizes.iter().sum::<usize>() as f64 / k;
    stats.avg_dim = stats.dims.iter().sum::<usize>() as f64 / k;
    stats.max_pareto = stats.pareto_sizes.iter().copied().max().unwrap_or(0);

    let root = sets[ad.root()].take().expect("root processed");
    let mut best: Option<&Candidate<T>> = None;
    for c in root.iter() {
        debug_assert_eq!(c.dim(), 1);
        best = match best {
            None => Some(c),
            Some(b) => match c.vector[0].cmp_with_hint(c.approx[0], &b.vector[0], b.approx[0]) {
                Ordering::Greater => Some(c),
                Ordering::Equal if c.processed < b.processed => Some(c),
                _ => Some(b),
            },
        };
    }
    let best = best.ok_or(Error::AllAssignmentsZero)?;
    if best.vector[0].is_zero() {
        return Err(Error::AllAssignmentsZero);
    }
    let root_vars = &plan.processed_vars[ad.root()];
    let assignment = Instantiation::from_pairs(root_vars.iter().copied().zip(best.processed.iter().copied()));
    Ok((assignment, best.vector[0].clone(), stats))
}

#[derive(Debug, Clone, Copy)]
enum Src {
    Child(usize, usize),
    Map(usize),
}

/// Structural data for combining clusters; CPT products are built per cluster on demand.
pub struct MapPlan<'a, T> {
    tables: &'a [Vec<T>],
    net: &'a Network,
    ad: &'a AnnotatedDecomposition,
    evidence: Vec<Option<usize>>,
    is_map: Vec<bool>,
    processed_vars: Vec<Vec<VarId>>,
    key_vars: Vec<Vec<VarId>>,
    /// Non-MAP, non-evidence separator variables: the vector scope.
    scope: Vec<Vec<VarId>>,
    dims: Vec<usize>,
}

impl<'a, T: Prob> MapPlan<'a, T> {
    pub fn new(tables: &'a [Vec<T>], net: &'a Network, query: &Query, ad: &'a AnnotatedDecomposition) -> Result<Self> {
        let n = net.len();
        let assigned: usize = ad.clusters().iter().map(|c| c.x_proc.len()).sum();
        if assigned != n || ad.clusters().iter().flat_map(|c| &c.vars).any(|&v| v >= n) {
            return Err(Error::InvalidDecomposition("decomposition was not annotated for this network".into()));
        }
        let evidence = query.evidence.dense(n);
        let mut is_map = vec![false; n];
        for &m in &query.map_vars {
            is_map[m] = true;
        }
        let k = ad.len();
        let mut processed_vars = vec![Vec::new(); k];
        let mut key_vars = vec![Vec::new(); k];
        let mut scope = vec![Vec::new(); k];
        let mut dims = vec![1; k];
        for &j in ad.order().iter().rev() {
            let c = ad.cluster(j);
            let mut pv: Vec<VarId> = c.x_last.iter().copied().filter(|&v| is_map[v]).collect();
            for &ch in &c.children {
                pv.extend_from_slice(&processed_vars[ch]);
            }
            pv.sort_unstable();
            processed_vars[j] = pv;
            let sep = c.separator();
            key_vars[j] = sep.iter().copied().filter(|&v| is_map[v]).collect();
            scope[j] = sep.iter().copied().filter(|&v| !is_map[v] && evidence[v].is_none()).collect();
            dims[j] = scope[j].iter().map(|&v| net.card(v)).product();
        }
        Ok(MapPlan { tables, net, ad, evidence, is_map, processed_vars, key_vars, scope, dims })
    }

    /// Candidates of cluster `j` from its children's sets, pruned (and
    /// reduced, if a reducer is given).
    pub fn combine_cluster(
        &self,
        j: usize,
        children: &[&ParetoSet<T>],
        opts: &SolveOptions,
        reduce: Option<Reducer<'_, T>>,
        generated: &mut u64,
    ) -> Result<ParetoSet<T>> {
        let c = self.ad.cluster(j);
        if children.len() != c.children.len() {
            return Err(Error::InvalidArgument(format!(
                "cluster {j} has {} children, got {} sets",
                c.children.len(),
                children.len()
            )));
        }
        let net = self.net;
        let map_vars: Vec<VarId> = c.vars.iter().copied().filter(|&v| self.is_map[v]).collect();
        let local: Vec<VarId> =
            c.vars.iter().copied().filter(|&v| !self.is_map[v] && self.evidence[v].is_none()).collect();
        let map_cards: Vec<usize> = map_vars.iter().map(|&v| net.card(v)).collect();
        let local_cards: Vec<usize> = local.iter().map(|&v| net.card(v)).collect();
        let zl = product(&local_cards);
        let map_strides: Vec<usize> = row_major_strides(&map_cards).into_iter().map(|s| s * zl).collect();
        let map_pos = |v: VarId| map_vars.binary_search(&v).expect("MAP variable of the cluster");
        let local_pos = |v: VarId| local.binary_search(&v).expect("free variable of the cluster");

        let factor = self.cluster_factor(j, &map_vars, &local);

        let key_pos: Vec<usize> = self.key_vars[j].iter().map(|&v| map_pos(v)).collect();
        let child_key_pos: Vec<Vec<usize>> =
            c.children.iter().map(|&ch| self.key_vars[ch].iter().map(|&v| map_pos(v)).collect()).collect();
        let proc_src: Vec<Src> = self.processed_vars[j]
            .iter()
            .map(|&v| {
                for (ci, &ch) in c.children.iter().enumerate() {
                    if let Ok(i) = self.processed_vars[ch].binary_search(&v) {
                        return Src::Child(ci, i);
                    }
                }
                Src::Map(map_pos(v))
            })
            .collect();

        let out_strides = {
            let cards: Vec<usize> = self.scope[j].iter().map(|&v| net.card(v)).collect();
            let s = row_major_strides(&cards);
            let mut full = vec![0; local.len()];
            for (k, &v) in self.scope[j].iter().enumerate() {
                full[local_pos(v)] = s[k];
            }
            full
        };
        let out_deltas = carry_deltas(&out_strides, &local_cards);
        let child_deltas: Vec<Vec<isize>> = c
            .children
            .iter()
            .map(|&ch| {
                let cards: Vec<usize> = self.scope[ch].iter().map(|&v| net.card(v)).collect();
                let s = row_major_strides(&cards);
                let mut full = vec![0; local.len()];
                for (k, &v) in self.scope[ch].iter().enumerate() {
                    full[local_pos(v)] = s[k];
                }
                carry_deltas(&full, &local_cards)
            })
            .collect();
        let dim = self.dims[j];

        // group-consistent combinations of child groups
        let mut combos: Vec<(Vec<&Vec<Candidate<T>>>, Vec<Option<usize>>)> = vec![(Vec::new(), vec![None; map_vars.len()])];
        for (ci, set) in children.iter().enumerate() {
            let mut next = Vec::new();
            for (groups, fixed) in &combos {
                'group: for (key, cands) in &set.groups {
                    if cands.is_empty() {
                        continue;
                    }
                    let mut f = fixed.clone();
                    for (&pos, &s) in child_key_pos[ci].iter().zip(key) {
                        match f[pos] {
                            Some(t) if t != s => continue 'group,
                            _ => f[pos] = Some(s),
                        }
                    }
                    let mut g = groups.clone();
                    g.push(cands);
                    next.push((g, f));
                }
            }
            combos = next;
        }

        let mut set = ParetoSet::new();
        let mut since_check = 0u32;
        for (groups, fixed) in &combos {
            opts.deadline.check()?;
            let open: Vec<usize> = (0..map_vars.len()).filter(|&p| fixed[p].is_none()).collect();
            let open_cards: Vec<usize> = open.iter().map(|&p| map_cards[p]).collect();
            let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
            let mut pick = Odometer::new(sizes);
            loop {
                let kids: Vec<&Candidate<T>> = groups.iter().zip(&pick.states).map(|(g, &i)| &g[i]).collect();
                let mut states: Vec<usize> = fixed.iter().map(|s| s.unwrap_or(0)).collect();
                let mut free = Odometer::new(open_cards.clone());
                loop {
                    for (k, &p) in open.iter().enumerate() {
                        states[p] = free.states[k];
                    }
                    let base: usize = states.iter().zip(&map_strides).map(|(s, st)| s * st).sum();
                    let mut vector = vec![T::zero(); dim];
                    accumulate(&factor[base..base + zl], &kids, &child_deltas, &out_deltas, &local_cards, &mut vector);
                    let key: Vec<usize> = key_pos.iter().map(|&p| states[p]).collect();
                    let processed: Vec<usize> = proc_src
                        .iter()
                        .map(|s| match *s {
                            Src::Child(ci, i) => kids[ci].processed[i],
                            Src::Map(p) => states[p],
                        })
                        .collect();
                    let cand = Candidate::new(key, processed, vector);
                    if opts.prune {
                        set.insert(cand);
                    } else {
                        set.push_unpruned(cand);
                    }
                    *generated += 1;
                    since_check += 1;
                    if since_check >= 4096 {
                        since_check = 0;
                        opts.deadline.check()?;
                    }
                    if free.advance().is_none() {
                        break;
                    }
                }
                if pick.advance().is_none() {
                    break;
                }
            }
        }
        if let Some(reduce) = reduce {
            for group in set.groups.values_mut() {
                reduce(group);
            }
        }
        Ok(set)
    }

    /// Product of the cluster's assigned CPTs over (MAP vars, free vars),
    /// row-major with the MAP block most significant. Evidence is plugged in.
    fn cluster_factor(&self, j: usize, map_vars: &[VarId], local: &[VarId]) -> Vec<T> {
        let net = self.net;
        let vars: Vec<VarId> = map_vars.iter().chain(local).copied().collect();
        let cards: Vec<usize> = vars.iter().map(|&v| net.card(v)).collect();
        let size = product(&cards);
        let x_proc = &self.ad.cluster(j).x_proc;
        if x_proc.is_empty() {
            return vec![T::one(); size];
        }
        let mut factors: Vec<(&[T], isize, Vec<isize>)> = Vec::new();
        for &v in x_proc {
            let mut strides = vec![0usize; vars.len()];
            let mut base = 0usize;
            for (u, s) in net.cpt_strides(v) {
                match vars.iter().position(|&w| w == u) {
                    Some(k) => strides[k] = s,
                    None => base += self.evidence[u].expect("family member outside the cluster is evidence") * s,
                }
            }
            factors.push((&self.tables[v], base as isize, carry_deltas(&strides, &cards)));
        }
        let mut out = Vec::with_capacity(size);
        let mut idx: Vec<isize> = factors.iter().map(|f| f.1).collect();
        let mut od = Odometer::new(cards);
        loop {
            let mut acc = factors[0].0[idx[0] as usize].clone();
            for (f, &i) in factors.iter().zip(&idx).skip(1) {
                if acc.is_zero() {
                    break;
                }
                acc = acc.mul_ref(&f.0[i as usize]);
            }
            out.push(acc);
            let Some(k) = od.advance() else { break };
            for (f, i) in factors.iter().zip(idx.iter_mut()) {
                *i += f.2[k];
            }
        }
        out
    }
}

/// `out[s] += sum over free states of factor * prod child entries`.
fn accumulate<T: Prob>(
    factor: &[T],
    kids: &[&Candidate<T>],
    child_deltas: &[Vec<isize>],
    out_deltas: &[isize],
    cards: &[usize],
    out: &mut [T],
) {
    let mut cidx = vec![0isize; kids.len()];
    let mut oidx = 0isize;
    let mut od = Odometer::new(cards.to_vec());
    for f in factor {
        if !f.is_zero() {
            let mut zero = false;
            let mut v: Option<T> = None;
            for (kid, &i) in kids.iter().zip(&cidx) {
                let x = &kid.vector[i as usize];
                if x.is_zero() {
                    zero = true;
                    break;
                }
                v = Some(match v {
                    None => f.mul_ref(x),
                    Some(acc) => acc.mul_ref(x),
                });
            }
            if !zero {
                match v {
                    Some(v) => out[oidx as usize].add_assign_ref(&v),
                    None => out[oidx as usize].add_assign_ref(f),
                }
            }
        }
        let Some(k) = od.advance() else { break };
        for (i, d) in cidx.iter_mut().zip(child_deltas) {
            *i += d[k];
        }
        oidx += out_deltas[k];
    }
}
