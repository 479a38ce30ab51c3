//! MAX-2-SAT compiled into a naive Bayes network, and q-fold amplification.

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{q, zero, Certificate, GadgetArtifact};
use crate::error::{Error, Result};
use crate::network::{Instantiation, NetworkBuilder, Params, Query};

/// Largest variable count for which the optimum is brute forced.
const BRUTE_FORCE_VARS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Literal {
    /// Zero-based variable index.
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    fn holds(&self, assignment: u64) -> bool {
        (assignment >> self.var & 1 == 1) == self.positive
    }
}

/// Clauses with exactly two literals over distinct variables, stored with the
/// lower variable first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Max2SatInstance {
    pub vars: usize,
    pub clauses: Vec<(Literal, Literal)>,
}

impl Max2SatInstance {
    pub fn new(vars: usize, clauses: Vec<(Literal, Literal)>) -> Result<Self> {
        if vars == 0 || clauses.is_empty() {
            return Err(Error::InvalidArgument("need at least one variable and one clause".into()));
        }
        let mut out = Vec::with_capacity(clauses.len());
        for (a, b) in clauses {
            if a.var >= vars || b.var >= vars {
                return Err(Error::InvalidArgument(format!("literal variable out of range 1..={vars}")));
            }
            if a.var == b.var {
                return Err(Error::InvalidArgument(format!("clause repeats variable {}", a.var + 1)));
            }
            out.push(if a.var < b.var { (a, b) } else { (b, a) });
        }
        Ok(Max2SatInstance { vars, clauses: out })
    }

    /// DIMACS CNF: `c` comments, a `p cnf <vars> <clauses>` header, and clauses
    /// as nonzero literals terminated by `0`.
    pub fn parse_dimacs(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        let mut current: Vec<i64> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('c') || t.starts_with('%') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: lineno, msg };
            if t.starts_with('p') {
                let toks: Vec<&str> = t.split_whitespace().collect();
                if toks.len() != 4 || toks[1] != "cnf" {
                    return Err(err("expected `p cnf <vars> <clauses>`".into()));
                }
                let n = toks[2].parse().map_err(|_| err(format!("bad variable count `{}`", toks[2])))?;
                let c = toks[3].parse().map_err(|_| err(format!("bad clause count `{}`", toks[3])))?;
                header = Some((n, c));
                continue;
            }
            let (n, _) = header.ok_or_else(|| err("clause before `p cnf` header".into()))?;
            for tok in t.split_whitespace() {
                let lit: i64 = tok.parse().map_err(|_| err(format!("bad literal `{tok}`")))?;
                if lit == 0 {
                    if current.len() != 2 {
                        return Err(err(format!("clause has {} literals, expected 2", current.len())));
                    }
                    let to_lit = |l: i64| Literal { var: (l.unsigned_abs() - 1) as usize, positive: l > 0 };
                    if current.iter().any(|l| l.unsigned_abs() as usize > n) {
                        return Err(err(format!("literal exceeds declared variable count {n}")));
                    }
                    clauses.push((to_lit(current[0]), to_lit(current[1])));
                    current.clear();
                } else {
                    current.push(lit);
                }
            }
        }
        if !current.is_empty() {
            return Err(Error::Parse { line: text.lines().count(), msg: "unterminated clause".into() });
        }
        let (n, c) = header.ok_or(Error::Parse { line: 1, msg: "missing `p cnf` header".into() })?;
        if c != clauses.len() {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header declares {c} clauses, found {}", clauses.len()),
            });
        }
        Self::new(n, clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.vars, self.clauses.len());
        let lit = |l: &Literal| {
            let v = l.var as i64 + 1;
            if l.positive {
                v
            } else {
                -v
            }
        };
        for (a, b) in &self.clauses {
            s.push_str(&format!("{} {} 0\n", lit(a), lit(b)));
        }
        s
    }

    /// Clauses satisfied by `assignment` (bit `j` is variable `j`).
    pub fn satisfied(&self, assignment: u64) -> u64 {
        self.clauses.iter().filter(|(a, b)| a.holds(assignment) || b.holds(assignment)).count() as u64
    }

    /// Most clauses any assignment satisfies, or `None` beyond the brute-force limit.
    pub fn max_satisfied(&self) -> Option<u64> {
        if self.vars > BRUTE_FORCE_VARS {
            return None;
        }
        (0..1u64 << self.vars).map(|a| self.satisfied(a)).max()
    }
}

/// Naive Bayes network: a uniform class `C` with two states per clause and
/// binary children `Y_0..Y_m`. The MAP value over all `Y` is
/// `k / (2^m m')` where `k` is the MAX-2-SAT optimum.
pub fn max2sat_to_naivebayes(inst: &Max2SatInstance) -> Result<GadgetArtifact> {
    let m = inst.vars;
    let mc = inst.clauses.len();
    let mut nb = NetworkBuilder::new();
    let c = nb.var("C", 2 * mc);
    let ys: Vec<usize> = (0..=m).map(|j| nb.var(format!("Y{j}"), 2)).collect();
    let mut tables = vec![Vec::new(); m + 2];
    tables[c] = vec![q(1, 2 * mc as i64); 2 * mc];
    let (o, z, h) = (BigRational::one(), zero(), q(1, 2));
    let bern = |p: &BigRational| [p.clone(), BigRational::one() - p];
    for (j, &y) in ys.iter().enumerate() {
        nb.parents(y, &[c]);
        let mut table = Vec::with_capacity(4 * mc);
        for (l, r) in &inst.clauses {
            let (left, right) = if j == 0 {
                (o.clone(), h.clone())
            } else {
                let x = j - 1;
                let left = if x == l.var {
                    if l.positive { o.clone() } else { z.clone() }
                } else {
                    h.clone()
                };
                let right = if x == r.var {
                    if r.positive { o.clone() } else { z.clone() }
                } else if x == l.var {
                    if l.positive { z.clone() } else { o.clone() }
                } else {
                    h.clone()
                };
                (left, right)
            };
            table.extend(bern(&left));
            table.extend(bern(&right));
        }
        tables[y] = table;
    }
    let network = nb.build_rational(tables)?;
    let query = Query::new(ys, Instantiation::new());
    let certificate = Certificate::Max2Sat { m, clauses: mc, k: inst.max_satisfied() };
    Ok(GadgetArtifact { network, query, certificate })
}

/// `q` independent copies hung under a deterministic root `D`. MAP over the
/// copies' MAP variables has value `(base value)^q`.
pub fn amplify(base: &GadgetArtifact, q: u32) -> Result<GadgetArtifact> {
    if q == 0 {
        return Err(Error::InvalidArgument("amplification needs q >= 1".into()));
    }
    let bn = &base.network;
    let Params::Rational(base_tables) = bn.params() else {
        return Err(Error::InvalidArgument("amplification needs exact parameters".into()));
    };
    let n = bn.len();
    let mut nb = NetworkBuilder::new();
    let d = nb.var("D", 2);
    let mut tables: Vec<Vec<BigRational>> = vec![vec![BigRational::one(), BigRational::zero()]];
    let id = |copy: usize, v: usize| 1 + copy * n + v;
    for copy in 0..q as usize {
        for v in 0..n {
            let var = bn.variable(v);
            nb.var(format!("{}_{}", var.name, copy + 1), var.cardinality);
        }
        for v in 0..n {
            let parents = bn.parents(v);
            if parents.is_empty() {
                nb.parents(id(copy, v), &[d]);
                let prior = &base_tables[v];
                tables.push(prior.iter().chain(prior.iter()).cloned().collect());
            } else {
                let mapped: Vec<usize> = parents.iter().map(|&p| id(copy, p)).collect();
                nb.parents(id(copy, v), &mapped);
                tables.push(base_tables[v].clone());
            }
        }
    }
    let network = nb.build_rational(tables)?;
    let copies = 0..q as usize;
    let map_vars: Vec<usize> =
        copies.clone().flat_map(|c| base.query.map_vars.iter().map(move |&v| id(c, v))).collect();
    let evidence =
        Instantiation::from_pairs(copies.flat_map(|c| base.query.evidence.iter().map(move |(v, s)| (id(c, v), s))));
    let mut query = Query::new(map_vars, evidence);
    query.threshold = base.query.threshold.as_ref().map(|t| num_traits::pow(t.clone(), q as usize));
    let certificate = Certificate::Amplified { base: Box::new(base.certificate.clone()), q };
    Ok(GadgetArtifact { network, query, certificate })
}
