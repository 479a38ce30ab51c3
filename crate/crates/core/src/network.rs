//! Discrete Bayesian networks, instantiations and MAP queries.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::numeric::{Backend, Prob, ProbValue};

pub type VarId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub cardinality: usize,
}

/// CPT storage. Tables are indexed `config * z_i + state`, where `config`
/// enumerates parent states row-major over the declared parent list (first
/// parent most significant, states ascending).
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Float(Vec<Vec<f64>>),
    Rational(Vec<Vec<BigRational>>),
}

impl Params {
    pub fn backend(&self) -> Backend {
        match self {
            Params::Float(_) => Backend::Float,
            Params::Rational(_) => Backend::Rational,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    variables: Vec<Variable>,
    parents: Vec<Vec<VarId>>,
    params: Params,
}

impl Network {
    /// Assembles a network without checking it; see [`validate_network`].
    pub fn from_parts(variables: Vec<Variable>, parents: Vec<Vec<VarId>>, params: Params) -> Self {
        Network { variables, parents, params }
    }

    /// Assembles and validates.
    pub fn new(variables: Vec<Variable>, parents: Vec<Vec<VarId>>, params: Params) -> Result<Self> {
        let net = Self::from_parts(variables, parents, params);
        let report = validate_network(&net);
        if report.is_ok() {
            Ok(net)
        } else {
            Err(Error::Invalid(report))
        }
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id]
    }

    pub fn card(&self, id: VarId) -> usize {
        self.variables[id].cardinality
    }

    pub fn cards(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality).collect()
    }

    pub fn parents(&self, id: VarId) -> &[VarId] {
        &self.parents[id]
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn backend(&self) -> Backend {
        self.params.backend()
    }

    pub fn id_of(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn children(&self) -> Vec<Vec<VarId>> {
        let mut ch = vec![Vec::new(); self.len()];
        for (v, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                ch[p].push(v);
            }
        }
        ch
    }

    /// Expected table length `z_i * prod z_parents`.
    pub fn table_len(&self, id: VarId) -> usize {
        self.parents[id].iter().map(|&p| self.card(p)).product::<usize>() * self.card(id)
    }

    /// Family scope `(var, stride)` pairs for indexing the CPT of `id`.
    pub fn cpt_strides(&self, id: VarId) -> Vec<(VarId, usize)> {
        let mut out = vec![(id, 1)];
        let mut stride = self.card(id);
        for &p in self.parents[id].iter().rev() {
            out.push((p, stride));
            stride *= self.card(p);
        }
        out
    }

    /// Kahn order; `None` if the parent graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<VarId>> {
        let n = self.len();
        let children = self.children();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: Vec<VarId> = (0..n).filter(|&v| indeg[v] == 0).rev().collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop() {
            order.push(v);
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Drops exactness, keeping the structure.
    pub fn to_float(&self) -> Network {
        let tables = <f64 as Prob>::tables(self).expect("f64 conversion is infallible");
        Network::from_parts(self.variables.clone(), self.parents.clone(), Params::Float(tables))
    }

    /// Rounds float parameters onto a `2^-bits` grid so rows sum to one
    /// exactly; the largest entry of each row absorbs the rounding.
    pub fn to_rational_quantized(&self, bits: u32) -> Network {
        let tables = match &self.params {
            Params::Rational(t) => t.clone(),
            Params::Float(t) => {
                let scale: u64 = 1 << bits;
                let denom = BigRational::from_integer(scale.into());
                t.iter()
                    .enumerate()
                    .map(|(v, table)| {
                        let z = self.card(v);
                        let mut out = Vec::with_capacity(table.len());
                        for row in table.chunks(z) {
                            let big = (0..z)
                                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                                .unwrap_or(0);
                            let mut ints: Vec<u64> =
                                row.iter().map(|p| (p.max(0.0) * scale as f64).floor() as u64).collect();
                            let rest: u64 = ints.iter().enumerate().filter(|&(i, _)| i != big).map(|(_, &x)| x).sum();
                            ints[big] = scale.saturating_sub(rest);
                            out.extend(ints.into_iter().map(|x| BigRational::from_integer(x.into()) / &denom));
                        }
                        out
                    })
                    .collect()
            }
        };
        Network::from_parts(self.variables.clone(), self.parents.clone(), Params::Rational(tables))
    }
}

/// Partial assignment of states to variables.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Instantiation(BTreeMap<VarId, usize>);

impl Instantiation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (VarId, usize)>) -> Self {
        Instantiation(pairs.into_iter().collect())
    }

    pub fn set(&mut self, var: VarId, state: usize) {
        self.0.insert(var, state);
    }

    pub fn get(&self, var: VarId) -> Option<usize> {
        self.0.get(&var).copied()
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.0.contains_key(&var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.0.iter().map(|(&v, &s)| (v, s))
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.0.keys().copied()
    }

    /// Union; `None` if the two disagree on a shared variable.
    pub fn merged(&self, other: &Instantiation) -> Option<Instantiation> {
        let mut out = self.clone();
        for (v, s) in other.iter() {
            match out.get(v) {
                Some(t) if t != s => return None,
                _ => out.set(v, s),
            }
        }
        Some(out)
    }

    /// Dense view with `None` for unassigned variables.
    pub fn dense(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for (v, s) in self.iter() {
            if v < n {
                out[v] = Some(s);
            }
        }
        out
    }

    pub fn check(&self, net: &Network) -> Result<()> {
        for (v, s) in self.iter() {
            if v >= net.len() {
                return Err(Error::InvalidArgument(format!("variable id {v} out of range")));
            }
            if s >= net.card(v) {
                return Err(Error::StateOutOfRange {
                    var: net.variable(v).name.clone(),
                    state: s,
                    card: net.card(v),
                });
            }
        }
        Ok(())
    }

    pub fn display<'a>(&'a self, net: &'a Network) -> impl fmt::Display + 'a {
        DisplayInst(self, net)
    }
}

struct DisplayInst<'a>(&'a Instantiation, &'a Network);

impl fmt::Display for DisplayInst<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, s) in self.0.iter() {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{}={}", self.1.variable(v).name, s)?;
        }
        Ok(())
    }
}

/// MAP query: maximise `p(x_map, e)` over the states of `map_vars`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Query {
    pub map_vars: Vec<VarId>,
    pub evidence: Instantiation,
    /// Decision threshold carried by gadget instances.
    pub threshold: Option<BigRational>,
}

impl Query {
    pub fn new(mut map_vars: Vec<VarId>, evidence: Instantiation) -> Self {
        map_vars.sort_unstable();
        map_vars.dedup();
        Query { map_vars, evidence, threshold: None }
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        self.evidence.check(net)?;
        for &m in &self.map_vars {
            if m >= net.len() {
                return Err(Error::InvalidQuery(format!("MAP variable id {m} out of range")));
            }
            if self.evidence.contains(m) {
                return Err(Error::InvalidQuery(format!(
                    "variable {} is both a MAP variable and evidence",
                    net.variable(m).name
                )));
            }
        }
        if self.map_vars.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidQuery("MAP variables must be sorted and distinct".into()));
        }
        Ok(())
    }

    /// `log2` of the number of MAP assignments.
    pub fn search_space_log2(&self, net: &Network) -> f64 {
        self.map_vars.iter().map(|&v| (net.card(v) as f64).log2()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroCardinality { var: String },
    DuplicateName { name: String },
    BadParent { var: String, parent: VarId },
    DuplicateParent { var: String, parent: String },
    Cycle { vars: Vec<String> },
    TableLength { var: String, expected: usize, got: usize },
    EntryOutOfRange { var: String, index: usize },
    RowNotNormalized { var: String, row: usize, sum: f64 },
    IdMismatch { index: usize, id: VarId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroCardinality { var } => write!(f, "{var}: cardinality must be at least 1"),
            Violation::DuplicateName { name } => write!(f, "duplicate variable name {name}"),
            Violation::BadParent { var, parent } => write!(f, "{var}: unknown or self parent id {parent}"),
            Violation::DuplicateParent { var, parent } => write!(f, "{var}: parent {parent} listed twice"),
            Violation::Cycle { vars } => write!(f, "cycle through {}", vars.join(", ")),
            Violation::TableLength { var, expected, got } => {
                write!(f, "{var}: table has {got} entries, expected {expected}")
            }
            Violation::EntryOutOfRange { var, index } => write!(f, "{var}: entry {index} outside [0,1]"),
            Violation::RowNotNormalized { var, row, sum } => {
                write!(f, "{var}: row {row} does not normalize (sum {sum})")
            }
            Violation::IdMismatch { index, id } => write!(f, "variable at index {index} has id {id}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        let msgs: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&msgs.join("; "))
    }
}

/// Float rows must sum to one within this tolerance; rational rows exactly.
pub const FLOAT_ROW_TOLERANCE: f64 = 1e-9;

pub fn validate_network(net: &Network) -> ValidationReport {
    let mut out = Vec::new();
    let n = net.len();
    let mut names = HashSet::new();
    for (i, v) in net.variables.iter().enumerate() {
        if v.id != i {
            out.push(Violation::IdMismatch { index: i, id: v.id });
        }
        if v.cardinality == 0 {
            out.push(Violation::ZeroCardinality { var: v.name.clone() });
        }
        if !names.insert(v.name.as_str()) {
            out.push(Violation::DuplicateName { name: v.name.clone() });
        }
    }
    if net.parents.len() != n {
        out.push(Violation::TableLength { var: "<parents>".into(), expected: n, got: net.parents.len() });
        return ValidationReport { violations: out };
    }
    let mut structure_ok = true;
    for (i, ps) in net.parents.iter().enumerate() {
        let mut seen = HashSet::new();
        for &p in ps {
            if p >= n || p == i {
                out.push(Violation::BadParent { var: net.variables[i].name.clone(), parent: p });
                structure_ok = false;
            } else if !seen.insert(p) {
                out.push(Violation::DuplicateParent {
                    var: net.variables[i].name.clone(),
                    parent: net.variables[p].name.clone(),
                });
            }
        }
    }
    if !structure_ok {
        return ValidationReport { violations: out };
    }
    if net.topological_order().is_none() {
        out.push(Violation::Cycle { vars: cycle_members(net) });
    }

    let table_count = match &net.params {
        Params::Float(t) => t.len(),
        Params::Rational(t) => t.len(),
    };
    if table_count != n {
        out.push(Violation::TableLength { var: "<tables>".into(), expected: n, got: table_count });
        return ValidationReport { violations: out };
    }
    for i in 0..n {
        let name = &net.variables[i].name;
        let expected = net.table_len(i);
        let z = net.card(i).max(1);
        match &net.params {
            Params::Float(t) => {
                let table = &t[i];
                if table.len() != expected {
                    out.push(Violation::TableLength { var: name.clone(), expected, got: table.len() });
                    continue;
                }
                for (k, p) in table.iter().enumerate() {
                    if !p.is_finite() || *p < 0.0 || *p > 1.0 {
                        out.push(Violation::EntryOutOfRange { var: name.clone(), index: k });
                    }
                }
                for (row, chunk) in table.chunks(z).enumerate() {
                    let sum: f64 = chunk.iter().sum();
                    if (sum - 1.0).abs() > FLOAT_ROW_TOLERANCE {
                        out.push(Violation::RowNotNormalized { var: name.clone(), row, sum });
                    }
                }
            }
            Params::Rational(t) => {
                let table = &t[i];
                if table.len() != expected {
                    out.push(Violation::TableLength { var: name.clone(), expected, got: table.len() });
                    continue;
                }
                for (k, p) in table.iter().enumerate() {
                    if p.is_negative() || *p > <BigRational as One>::one() {
                        out.push(Violation::EntryOutOfRange { var: name.clone(), index: k });
                    }
                }
                for (row, chunk) in table.chunks(z).enumerate() {
                    let sum = chunk.iter().fold(<BigRational as Zero>::zero(), |acc, p| acc + p);
                    if !sum.is_one() {
                        out.push(Violation::RowNotNormalized { var: name.clone(), row, sum: sum.approx() });
                    }
                }
            }
        }
    }
    ValidationReport { violations: out }
}

fn cycle_members(net: &Network) -> Vec<String> {
    // variables left over after peeling sources and sinks lie on or between cycles
    let n = net.len();
    let children = net.children();
    let mut alive = vec![true; n];
    loop {
        let mut changed = false;
        for v in 0..n {
            if !alive[v] {
                continue;
            }
            let has_in = net.parents[v].iter().any(|&p| alive[p]);
            let has_out = children[v].iter().any(|&c| alive[c]);
            if !has_in || !has_out {
                alive[v] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..n).filter(|&v| alive[v]).map(|v| net.variables[v].name.clone()).collect()
}

/// `p(x) = prod_i p(x_i | pa_i)` for a full instantiation.
pub fn joint_probability(net: &Network, full: &Instantiation) -> Result<ProbValue> {
    full.check(net)?;
    let states = full_states(net, full)?;
    Ok(match net.backend() {
        Backend::Float => joint_with(&f64::tables(net)?, net, &states).to_value(),
        Backend::Rational => joint_with(&BigRational::tables(net)?, net, &states).to_value(),
    })
}

pub(crate) fn full_states(net: &Network, full: &Instantiation) -> Result<Vec<usize>> {
    let dense = full.dense(net.len());
    dense
        .iter()
        .enumerate()
        .map(|(v, s)| s.ok_or_else(|| Error::PartialInstantiation(net.variable(v).name.clone())))
        .collect()
}

pub(crate) fn joint_with<T: Prob>(tables: &[Vec<T>], net: &Network, states: &[usize]) -> T {
    let mut acc = T::one();
    for (v, table) in tables.iter().enumerate() {
        let idx: usize = net.cpt_strides(v).iter().map(|&(u, s)| states[u] * s).sum();
        let p = &table[idx];
        if p.is_zero() {
            return T::zero();
        }
        acc = acc.mul_ref(p);
    }
    acc
}

/// `sum_i z(X_i ∪ Pa_i)` plus the number of edges.
pub fn network_size(net: &Network) -> usize {
    (0..net.len()).map(|v| net.table_len(v)).sum::<usize>() + net.edge_count()
}

/// Convenience builder used by generators and tests.
#[derive(Debug, Default)]
pub struct NetworkBuilder {
    variables: Vec<Variable>,
    parents: Vec<Vec<VarId>>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(&mut self, name: impl Into<String>, cardinality: usize) -> VarId {
        let id = self.variables.len();
        self.variables.push(Variable { id, name: name.into(), cardinality });
        self.parents.push(Vec::new());
        id
    }

    pub fn parents(&mut self, var: VarId, parents: &[VarId]) -> &mut Self {
        self.parents[var] = parents.to_vec();
        self
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn card(&self, var: VarId) -> usize {
        self.variables[var].cardinality
    }

    pub fn parents_of(&self, var: VarId) -> &[VarId] {
        &self.parents[var]
    }

    pub fn build_float(self, tables: Vec<Vec<f64>>) -> Result<Network> {
        Network::new(self.variables, self.parents, Params::Float(tables))
    }

    pub fn build_rational(self, tables: Vec<Vec<BigRational>>) -> Result<Network> {
        Network::new(self.variables, self.parents, Params::Rational(tables))
    }
}
