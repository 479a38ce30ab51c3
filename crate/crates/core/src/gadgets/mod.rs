//! Instances with analytically known MAP answers, compiled from PARTITION
//! and MAX-2-SAT. All parameters are exact rationals.

pub mod dyadic;
pub mod max2sat;
pub mod partition;

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::io::fmt_rational;
use crate::network::{Network, Query};

pub use dyadic::{dyadic_pow2_up, pow2_ceil, DyadicRational};
pub use max2sat::{amplify, max2sat_to_naivebayes, Literal, Max2SatInstance};
pub use partition::{partition_to_hmm, partition_to_polytree, PartitionInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionGadget {
    Polytree,
    Hmm,
}

impl fmt::Display for PartitionGadget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartitionGadget::Polytree => "partition-polytree",
            PartitionGadget::Hmm => "partition-hmm",
        })
    }
}

/// The closed-form relation between an instance's MAP value and the source
/// problem's answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certificate {
    /// MAP value exceeds the query threshold iff an even partition exists.
    Partition { gadget: PartitionGadget, m: usize, b: u32, even_partition: bool },
    /// MAP value equals `k / (2^m m')`; `k` is known when small enough to brute force.
    Max2Sat { m: usize, clauses: usize, k: Option<u64> },
    /// MAP value equals the base certificate's value to the power `q`.
    Amplified { base: Box<Certificate>, q: u32 },
}

impl Certificate {
    pub fn expected_value(&self) -> Option<BigRational> {
        match self {
            Certificate::Partition { .. } => None,
            Certificate::Max2Sat { m, clauses, k } => {
                let k = (*k)?;
                let den = (BigInt::one() << *m) * BigInt::from(*clauses);
                Some(BigRational::new(BigInt::from(k), den))
            }
            Certificate::Amplified { base, q } => Some(num_traits::pow(base.expected_value()?, *q as usize)),
        }
    }

    /// For threshold certificates, whether the MAP value should exceed it.
    pub fn expects_above_threshold(&self) -> Option<bool> {
        match self {
            Certificate::Partition { even_partition, .. } => Some(*even_partition),
            // v^q > r^q iff v > r
            Certificate::Amplified { base, .. } => base.expects_above_threshold(),
            Certificate::Max2Sat { .. } => None,
        }
    }

    /// Checks a MAP value against the certificate; `None` if nothing is claimed.
    pub fn check(&self, value: &BigRational, threshold: Option<&BigRational>) -> Option<bool> {
        if let Some(expected) = self.expected_value() {
            return Some(*value == expected);
        }
        let above = self.expects_above_threshold()?;
        Some((value > threshold?) == above)
    }

    /// Sidecar line: `certificate <kind> <key=value>...`.
    pub fn line(&self) -> String {
        match self {
            Certificate::Partition { gadget, m, b, even_partition } => {
                format!("certificate {gadget} m={m} b={b} even_partition={even_partition} claim=value>threshold<=>even_partition")
            }
            Certificate::Max2Sat { m, clauses, k } => {
                let mut s = format!("certificate max2sat m={m} clauses={clauses}");
                if let Some(k) = k {
                    s.push_str(&format!(" k={k}"));
                }
                if let Some(v) = self.expected_value() {
                    s.push_str(&format!(" value={}", fmt_rational(&v)));
                }
                s
            }
            Certificate::Amplified { base, q } => {
                let mut s = format!("certificate amplified q={q} base=[{}]", base.line());
                if let Some(v) = self.expected_value() {
                    s.push_str(&format!(" value={}", fmt_rational(&v)));
                }
                s
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GadgetArtifact {
    pub network: Network,
    /// Carries the decision threshold, when there is one.
    pub query: Query,
    pub certificate: Certificate,
}

pub(crate) fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

pub(crate) fn one_minus(x: &BigRational) -> BigRational {
    BigRational::one() - x
}

pub(crate) fn zero() -> BigRational {
    BigRational::zero()
}
