//! PARTITION compiled into a binary polytree and into an HMM-shaped tree.
//!
//! With `S` half the total and `v_i = s_i / S`, both networks encode
//! `t_i ~ 2^-v_i` so that a subset `I` contributes `prod_{i in I} t_i`, which
//! lands at one half exactly when `I` is an even partition. The rounding of
//! `t_i` is fine enough that a dyadic threshold separates the two cases.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use super::dyadic::{dyadic_pow2_up, pow2_ceil};
use super::{one_minus, q, zero, Certificate, GadgetArtifact, PartitionGadget};
use crate::error::{Error, Result};
use crate::network::{Instantiation, NetworkBuilder, Query};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionInstance {
    pub s: Vec<u64>,
}

impl PartitionInstance {
    pub fn new(s: Vec<u64>) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::InvalidArgument("partition instance needs at least one integer".into()));
        }
        if s.iter().any(|&x| x == 0) {
            return Err(Error::InvalidArgument("partition integers must be positive".into()));
        }
        Ok(PartitionInstance { s })
    }

    /// Whitespace-separated positive integers; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            for tok in line.split_whitespace() {
                let x = tok
                    .parse::<u64>()
                    .map_err(|_| Error::Parse { line: i + 1, msg: format!("bad integer `{tok}`") })?;
                s.push(x);
            }
        }
        Self::new(s)
    }

    pub fn m(&self) -> usize {
        self.s.len()
    }

    pub fn total(&self) -> u64 {
        self.s.iter().sum()
    }

    /// `S`, half the total (not necessarily an integer).
    pub fn half(&self) -> BigRational {
        BigRational::new(BigInt::from(self.total()), BigInt::from(2))
    }

    /// Encoding size: the summed bit lengths of the integers.
    pub fn b(&self) -> u32 {
        self.s.iter().map(|&x| 64 - x.leading_zeros()).sum()
    }

    /// `v_i = s_i / S`.
    pub fn v(&self, i: usize) -> BigRational {
        BigRational::new(BigInt::from(2 * self.s[i]), BigInt::from(self.total()))
    }

    /// Subset-sum dynamic program.
    pub fn has_even_partition(&self) -> bool {
        let total = self.total();
        if total % 2 == 1 {
            return false;
        }
        let half = (total / 2) as usize;
        let mut reach = vec![false; half + 1];
        reach[0] = true;
        for &x in &self.s {
            let x = x as usize;
            if x > half {
                continue;
            }
            for t in (x..=half).rev() {
                if reach[t - x] {
                    reach[t] = true;
                }
            }
        }
        reach[half]
    }
}

/// Binary polytree on `3m + 1` nodes: uniform roots `X_i`, evidence leaves
/// `E_i` with `p(e_i | x_i) = t_i`, `p(e_i | not x_i) = 1`, and a chain
/// `Y_0 -> ... -> Y_m` where `Y_i` stays true with probability `t_i` when `X_i`
/// is true. MAP over `X` with every `E_i` true and `Y_m` false gives
/// `p = t (1 - t) / 2^m`, `t = prod_{x_i true} t_i`.
pub fn partition_to_polytree(inst: &PartitionInstance) -> Result<GadgetArtifact> {
    let m = inst.m();
    let b = inst.b();
    let bits = 4 * b + 3;
    let t: Vec<BigRational> =
        (0..m).map(|i| dyadic_pow2_up(&inst.v(i), bits).map(|d| d.to_rational())).collect::<Result<_>>()?;

    let mut nb = NetworkBuilder::new();
    let xs: Vec<usize> = (1..=m).map(|i| nb.var(format!("X{i}"), 2)).collect();
    let ys: Vec<usize> = (0..=m).map(|i| nb.var(format!("Y{i}"), 2)).collect();
    let es: Vec<usize> = (1..=m).map(|i| nb.var(format!("E{i}"), 2)).collect();
    let mut tables = vec![Vec::new(); 3 * m + 1];
    let half = q(1, 2);
    for i in 0..m {
        tables[xs[i]] = vec![half.clone(), half.clone()];
        nb.parents(es[i], &[xs[i]]);
        tables[es[i]] = vec![t[i].clone(), one_minus(&t[i]), BigRational::one(), zero()];
    }
    tables[ys[0]] = vec![BigRational::one(), zero()];
    for i in 1..=m {
        nb.parents(ys[i], &[ys[i - 1], xs[i - 1]]);
        let ti = &t[i - 1];
        tables[ys[i]] = vec![
            ti.clone(),
            one_minus(ti), // y_{i-1} true, x_i true
            BigRational::one(),
            zero(), // y_{i-1} true, x_i false
            zero(),
            BigRational::one(), // y_{i-1} false
            zero(),
            BigRational::one(),
        ];
    }
    let network = nb.build_rational(tables)?;

    let mut evidence = Instantiation::from_pairs(es.iter().map(|&e| (e, 0)));
    evidence.set(ys[m], 1);
    let mut query = Query::new(xs.clone(), evidence);

    // a' = 2^(-1 + 2^-3b) rounded up to 3b + 2 bits; r = a'(1 - a') / 2^m
    let exponent = BigRational::new(BigInt::one(), BigInt::one() << (3 * b) as usize) - BigRational::one();
    let a = pow2_ceil(&exponent, 3 * b + 2).to_rational();
    let r = &a * one_minus(&a) / BigRational::from_integer(BigInt::one() << m);
    query.threshold = Some(r);

    let certificate = Certificate::Partition {
        gadget: PartitionGadget::Polytree,
        m,
        b,
        even_partition: inst.has_even_partition(),
    };
    Ok(GadgetArtifact { network, query, certificate })
}

/// HMM-shaped tree on `3m + 1` nodes: `D_{i-1} -> X_i -> {Y_i, D_i}` with
/// cardinalities 5 for `X`, 2 for `Y` and 3 (`T`, `F`, `*`) for `D`. MAP over
/// `Y` with `D_m = *` gives `(1 - (t_I + t_{A\I}) / 3) / 2^m`.
pub fn partition_to_hmm(inst: &PartitionInstance) -> Result<GadgetArtifact> {
    let total = inst.total();
    if total % 2 == 1 {
        return Err(Error::InvalidArgument("the HMM gadget needs an even total".into()));
    }
    if total / 2 < 2 {
        return Err(Error::InvalidArgument("the HMM gadget needs half the total to be at least 2".into()));
    }
    let m = inst.m();
    let b = inst.b();
    let bits = 6 * b + 3;
    let t: Vec<BigRational> =
        (0..m).map(|i| dyadic_pow2_up(&inst.v(i), bits).map(|d| d.to_rational())).collect::<Result<_>>()?;

    let mut nb = NetworkBuilder::new();
    let xs: Vec<usize> = (1..=m).map(|i| nb.var(format!("X{i}"), 5)).collect();
    let ys: Vec<usize> = (1..=m).map(|i| nb.var(format!("Y{i}"), 2)).collect();
    let ds: Vec<usize> = (0..=m).map(|i| nb.var(format!("D{i}"), 3)).collect();
    let mut tables = vec![Vec::new(); 3 * m + 1];
    let (o, z, h) = (BigRational::one(), zero(), q(1, 2));
    tables[ds[0]] = vec![q(1, 3); 3];
    for i in 0..m {
        nb.parents(xs[i], &[ds[i]]);
        tables[xs[i]] = [
            [&h, &z, &z, &h, &z], // d_{i-1} = T
            [&z, &h, &h, &z, &z], // d_{i-1} = F
            [&z, &z, &z, &z, &o], // d_{i-1} = *
        ]
        .iter()
        .flat_map(|row| row.iter().map(|&x| x.clone()))
        .collect();

        nb.parents(ys[i], &[xs[i]]);
        tables[ys[i]] = [[&o, &z], [&o, &z], [&z, &o], [&z, &o], [&h, &h]]
            .iter()
            .flat_map(|row| row.iter().map(|&x| x.clone()))
            .collect();

        nb.parents(ds[i + 1], &[xs[i]]);
        let ti = &t[i];
        let rest = one_minus(ti);
        tables[ds[i + 1]] = vec![
            ti.clone(),
            z.clone(),
            rest.clone(), // x1
            z.clone(),
            o.clone(),
            z.clone(), // x2
            z.clone(),
            ti.clone(),
            rest, // x3
            o.clone(),
            z.clone(),
            z.clone(), // x4
            z.clone(),
            z.clone(),
            o.clone(), // x5
        ];
    }
    let network = nb.build_rational(tables)?;
    let mut query = Query::new(ys.clone(), Instantiation::from_pairs([(ds[m], 2)]));

    // a = 2^(2^-5b) rounded up to 5b + 3 bits; r = (1 - a/3) / 2^m
    let exponent = BigRational::new(BigInt::one(), BigInt::one() << (5 * b) as usize);
    let a = pow2_ceil(&exponent, 5 * b + 3).to_rational();
    let r = (BigRational::one() - a / BigRational::from_integer(3.into())) / BigRational::from_integer(BigInt::one() << m);
    query.threshold = Some(r);

    let certificate =
        Certificate::Partition { gadget: PartitionGadget::Hmm, m, b, even_partition: inst.has_even_partition() };
    Ok(GadgetArtifact { network, query, certificate })
}
