use std::fmt;
use std::ops::{Index, Mul, Neg};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A sign in {−, 0, +}. The derived order `Neg < Zero < Pos` is the global
/// order used for lexicographic canonical forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Neg,
    Zero,
    Pos,
}

impl Sign {
    pub fn of<T: num_traits::Signed>(value: &T) -> Self {
        if value.is_zero() {
            Sign::Zero
        } else if value.is_positive() {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Sign::Neg => '-',
            Sign::Zero => '0',
            Sign::Pos => '+',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            '-' => Some(Sign::Neg),
            '0' => Some(Sign::Zero),
            '+' => Some(Sign::Pos),
            _ => None,
        }
    }
}

impl Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        match self {
            Sign::Neg => Sign::Pos,
            Sign::Zero => Sign::Zero,
            Sign::Pos => Sign::Neg,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        match (self, rhs) {
            (Sign::Zero, _) | (_, Sign::Zero) => Sign::Zero,
            (a, b) if a == b => Sign::Pos,
            _ => Sign::Neg,
        }
    }
}

/// Signs of the `m` linear forms of an arrangement at some point.
/// Text form is one character per entry, e.g. `"+-0"`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignVector(pub Vec<Sign>);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid sign character {0:?}")]
pub struct ParseSignError(pub char);

impl SignVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn all(sign: Sign, m: usize) -> Self {
        Self(vec![sign; m])
    }

    /// True when no entry is zero (the vector names a chamber, if feasible).
    pub fn is_full(&self) -> bool {
        self.0.iter().all(|s| *s != Sign::Zero)
    }

    pub fn with(&self, i: usize, sign: Sign) -> Self {
        let mut v = self.clone();
        v.0[i] = sign;
        v
    }

    /// All 2^m vectors without zeros, in binary-counter order starting at all `+`.
    pub fn all_full(m: usize) -> impl Iterator<Item = SignVector> {
        assert!(m < 64, "2^{m} sign vectors");
        (0u64..(1u64 << m)).map(move |mask| {
            SignVector(
                (0..m)
                    .map(|i| {
                        if mask >> (m - 1 - i) & 1 == 1 {
                            Sign::Neg
                        } else {
                            Sign::Pos
                        }
                    })
                    .collect(),
            )
        })
    }
}

impl Neg for &SignVector {
    type Output = SignVector;
    fn neg(self) -> SignVector {
        SignVector(self.0.iter().map(|s| -*s).collect())
    }
}

impl Index<usize> for SignVector {
    type Output = Sign;
    fn index(&self, i: usize) -> &Sign {
        &self.0[i]
    }
}

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for SignVector {
    type Err = ParseSignError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| Sign::from_char(c).ok_or(ParseSignError(c)))
            .collect::<Result<_, _>>()
            .map(SignVector)
    }
}

impl Serialize for SignVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SignVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_neg_zero_pos() {
        assert!(Sign::Neg < Sign::Zero && Sign::Zero < Sign::Pos);
        let a: SignVector = "-++".parse().unwrap();
        let b: SignVector = "+-0".parse().unwrap();
        assert!(a < b);
    }

    #[test]
    fn text_round_trip() {
        let v: SignVector = "+-0+".parse().unwrap();
        assert_eq!(v.to_string(), "+-0+");
        assert_eq!(serde_json::to_string(&v).unwrap(), "\"+-0+\"");
        assert!("+x".parse::<SignVector>().is_err());
    }

    #[test]
    fn enumerates_full_vectors() {
        let all: Vec<String> = SignVector::all_full(2).map(|v| v.to_string()).collect();
        assert_eq!(all, ["++", "+-", "-+", "--"]);
    }

    #[test]
    fn sign_algebra() {
        assert_eq!(-Sign::Zero, Sign::Zero);
        assert_eq!(Sign::Neg * Sign::Neg, Sign::Pos);
        assert_eq!(Sign::Neg * Sign::Zero, Sign::Zero);
    }
}
