//! Noise-free benchmark functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bitstring::Bitstring;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    OneMax,
    LeadingOnes,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::OneMax => "onemax",
            ProblemKind::LeadingOnes => "leadingones",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "onemax" => Ok(ProblemKind::OneMax),
            "leadingones" => Ok(ProblemKind::LeadingOnes),
            other => Err(Error::Parse(format!("unknown problem {other:?}"))),
        }
    }
}

/// A pseudo-Boolean maximization problem of size `n`. Both kinds have the
/// all-ones string as unique optimizer with value `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Problem {
    pub kind: ProblemKind,
    pub n: usize,
}

impl Problem {
    pub fn new(kind: ProblemKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize(n));
        }
        Ok(Self { kind, n })
    }

    pub fn onemax(n: usize) -> Result<Self> {
        Self::new(ProblemKind::OneMax, n)
    }

    pub fn leading_ones(n: usize) -> Result<Self> {
        Self::new(ProblemKind::LeadingOnes, n)
    }

    fn check(&self, x: &Bitstring) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn true_fitness(&self, x: &Bitstring) -> Result<usize> {
        self.check(x)?;
        Ok(self.fitness(x))
    }

    pub fn is_optimum(&self, x: &Bitstring) -> Result<bool> {
        self.check(x)?;
        Ok(x.zeros_count() == 0)
    }

    #[inline]
    pub(crate) fn fitness(&self, x: &Bitstring) -> usize {
        debug_assert_eq!(x.len(), self.n);
        match self.kind {
            ProblemKind::OneMax => x.ones_count(),
            ProblemKind::LeadingOnes => x.leading_ones(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &str) -> Bitstring {
        s.parse().unwrap()
    }

    #[test]
    fn fitness_examples() {
        assert_eq!(Problem::onemax(5).unwrap().true_fitness(&bits("10110")).unwrap(), 3);
        let lo = Problem::leading_ones(4).unwrap();
        assert_eq!(lo.true_fitness(&bits("1101")).unwrap(), 2);
        assert_eq!(lo.true_fitness(&bits("0111")).unwrap(), 0);
    }

    #[test]
    fn optimum_examples() {
        assert!(Problem::onemax(4).unwrap().is_optimum(&bits("1111")).unwrap());
        assert!(!Problem::leading_ones(4).unwrap().is_optimum(&bits("1110")).unwrap());
        assert!(!Problem::onemax(1).unwrap().is_optimum(&bits("0")).unwrap());
    }

    #[test]
    fn length_mismatch_rejected() {
        let p = Problem::onemax(5).unwrap();
        assert!(matches!(
            p.true_fitness(&bits("101")),
            Err(Error::LengthMismatch { expected: 5, actual: 3 })
        ));
        assert!(p.is_optimum(&bits("111")).is_err());
        assert!(Problem::onemax(0).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in [ProblemKind::OneMax, ProblemKind::LeadingOnes] {
            assert_eq!(kind.to_string().parse::<ProblemKind>().unwrap(), kind);
        }
        assert!("jump".parse::<ProblemKind>().is_err());
    }

    proptest! {
        #[test]
        fn leading_ones_bounded_by_onemax(s in "[01]{1,150}") {
            let x = bits(&s);
            let n = x.len();
            let lo = Problem::leading_ones(n).unwrap();
            let om = Problem::onemax(n).unwrap();
            let (flo, fom) = (lo.true_fitness(&x).unwrap(), om.true_fitness(&x).unwrap());
            prop_assert!(flo <= fom && fom <= n);
            for p in [lo, om] {
                prop_assert_eq!(p.is_optimum(&x).unwrap(), x.zeros_count() == 0);
                prop_assert_eq!(p.is_optimum(&x).unwrap(), p.true_fitness(&x).unwrap() == n);
            }
        }
    }
}
