//! Belief updating by bottom-up message passing over an annotated
//! decomposition. Target and evidence states are instantiated from the
//! start, so each message ranges over its separator minus those variables.

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::index::{carry_deltas, row_major_strides, Odometer};
use crate::network::{Instantiation, Network, VarId};
use crate::numeric::{Backend, Prob, ProbValue};
use crate::treedecomp::AnnotatedDecomposition;

/// A function table over `scope` (ascending ids, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Message<T> {
    pub scope: Vec<VarId>,
    pub values: Vec<T>,
}

/// `p(x')` for a partial instantiation.
pub fn marginal(net: &Network, ad: &AnnotatedDecomposition, target: &Instantiation) -> Result<ProbValue> {
    target.check(net)?;
    let fixed = target.dense(net.len());
    Ok(match net.backend() {
        Backend::Float => marginal_with(&f64::tables(net)?, net, ad, &fixed).to_value(),
        Backend::Rational => marginal_with(&BigRational::tables(net)?, net, ad, &fixed).to_value(),
    })
}

/// `p(x | e) = p(x, e) / p(e)`.
pub fn conditional(
    net: &Network,
    ad: &AnnotatedDecomposition,
    x: &Instantiation,
    e: &Instantiation,
) -> Result<ProbValue> {
    x.check(net)?;
    e.check(net)?;
    let Some(joint) = x.merged(e) else {
        // contradictory assignments to a shared variable
        return Ok(match net.backend() {
            Backend::Float => ProbValue::Float(0.0),
            Backend::Rational => ProbValue::Rational(<BigRational as Prob>::zero()),
        });
    };
    fn ratio<T: Prob>(
        tables: &[Vec<T>],
        net: &Network,
        ad: &AnnotatedDecomposition,
        joint: &Instantiation,
        e: &Instantiation,
    ) -> Result<ProbValue> {
        let pe = marginal_with(tables, net, ad, &e.dense(net.len()));
        if pe.is_zero() {
            return Err(Error::ZeroProbabilityEvidence);
        }
        let pxe = marginal_with(tables, net, ad, &joint.dense(net.len()));
        Ok(pxe.div_ref(&pe).to_value())
    }
    match net.backend() {
        Backend::Float => ratio(&f64::tables(net)?, net, ad, &joint, e),
        Backend::Rational => ratio(&BigRational::tables(net)?, net, ad, &joint, e),
    }
}

/// Upper bound on the work of one propagation: `sum_j (1 + children_j) * z(C_j)`.
pub fn cost_estimate(net: &Network, ad: &AnnotatedDecomposition) -> u128 {
    ad.clusters()
        .iter()
        .map(|c| {
            let z: u128 = c.vars.iter().map(|&v| net.card(v) as u128).product();
            (1 + c.children.len() as u128) * z
        })
        .sum()
}

pub(crate) fn marginal_with<T: Prob>(
    tables: &[Vec<T>],
    net: &Network,
    ad: &AnnotatedDecomposition,
    fixed: &[Option<usize>],
) -> T {
    let messages = messages_with(tables, net, ad, fixed);
    let root = &messages[ad.root()];
    debug_assert_eq!(root.values.len(), 1);
    root.values[0].clone()
}

/// All upward messages, indexed by cluster.
pub fn messages_with<T: Prob>(
    tables: &[Vec<T>],
    net: &Network,
    ad: &AnnotatedDecomposition,
    fixed: &[Option<usize>],
) -> Vec<Message<T>> {
    let mut out: Vec<Option<Message<T>>> = vec![None; ad.len()];
    for &j in ad.order().iter().rev() {
        let c = ad.cluster(j);
        let local: Vec<VarId> = c.vars.iter().copied().filter(|&v| fixed[v].is_none()).collect();
        let cards: Vec<usize> = local.iter().map(|&v| net.card(v)).collect();
        let pos_of = |v: VarId| local.binary_search(&v).ok();

        // (table, base offset, per-local-digit carry deltas)
        let mut factors: Vec<(&[T], usize, Vec<isize>)> = Vec::new();
        for &v in &c.x_proc {
            let mut strides = vec![0usize; local.len()];
            let mut base = 0;
            for (u, s) in net.cpt_strides(v) {
                match pos_of(u) {
                    Some(k) => strides[k] = s,
                    None => base += fixed[u].expect("non-local family member is fixed") * s,
                }
            }
            factors.push((&tables[v], base, carry_deltas(&strides, &cards)));
        }
        for &ch in &c.children {
            let m = out[ch].as_ref().expect("children are processed first");
            let mcards: Vec<usize> = m.scope.iter().map(|&v| net.card(v)).collect();
            let mstrides = row_major_strides(&mcards);
            let mut strides = vec![0usize; local.len()];
            for (k, &v) in m.scope.iter().enumerate() {
                strides[pos_of(v).expect("message scope lies in the parent cluster")] = mstrides[k];
            }
            factors.push((&m.values, 0, carry_deltas(&strides, &cards)));
        }

        let scope: Vec<VarId> = c.separator().into_iter().filter(|&v| fixed[v].is_none()).collect();
        let scards: Vec<usize> = scope.iter().map(|&v| net.card(v)).collect();
        let sstrides = row_major_strides(&scards);
        let mut ostrides = vec![0usize; local.len()];
        for (k, &v) in scope.iter().enumerate() {
            ostrides[pos_of(v).expect("separator lies in the cluster")] = sstrides[k];
        }
        let odeltas = carry_deltas(&ostrides, &cards);

        let mut values = vec![T::zero(); scards.iter().product()];
        let mut idx: Vec<isize> = factors.iter().map(|f| f.1 as isize).collect();
        let mut oidx = 0isize;
        let mut od = Odometer::new(cards.clone());
        loop {
            let mut acc: Option<T> = None;
            let mut zero = false;
            for (f, &i) in factors.iter().zip(&idx) {
                let p = &f.0[i as usize];
                if p.is_zero() {
                    zero = true;
                    break;
                }
                acc = Some(match acc {
                    None => p.clone(),
                    Some(a) => a.mul_ref(p),
                });
            }
            if !zero {
                values[oidx as usize].add_assign_ref(&acc.unwrap_or_else(T::one));
            }
            let Some(k) = od.advance() else { break };
            for (f, i) in factors.iter().zip(idx.iter_mut()) {
                *i += f.2[k];
            }
            oidx += odeltas[k];
        }
        out[j] = Some(Message { scope, values });
    }
    out.into_iter().map(|m| m.expect("every cluster visited")).collect()
}
