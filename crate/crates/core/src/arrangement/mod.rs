//! Central hyperplane arrangements over Q.
//!
//! Each hyperplane is given by a normal vector `a_i`; a point `x` gets the
//! sign vector `(sign⟨a_i, x⟩)_i`. Chambers are the feasible sign vectors
//! without zeros: the maximal cones of the complete fan cut out by the
//! arrangement. Two chambers are adjacent when they differ in one entry and
//! the wall between them (that entry set to zero) is feasible.

mod fm;
pub mod rational;

use std::collections::HashMap;

use num_traits::Zero;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sign::{Sign, SignVector};
use crate::symmetry::Group;
pub use rational::{format_rational, parse_rational, ParseRationalError, Rational};

pub const MAX_DIM: usize = 8;
pub const MAX_HYPERPLANES: usize = 20;
/// Largest `m` for which `validate_symmetry` checks every full sign vector.
pub const EXHAUSTIVE_SYMMETRY_CHECK: usize = 12;
pub const SYMMETRY_SAMPLE: usize = 512;
const SYMMETRY_SAMPLE_SEED: u64 = 0x5EED_F00D;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArrangementError {
    #[error("normal {index} has {found} coordinates, ambient dimension is {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("normal {0} is zero")]
    ZeroNormal(usize),
    #[error("normals {0} and {1} are parallel")]
    Parallel(usize, usize),
    #[error("ambient dimension {0} exceeds the limit of {MAX_DIM}")]
    DimensionTooLarge(usize),
    #[error("{0} hyperplanes exceed the limit of {MAX_HYPERPLANES}")]
    TooManyHyperplanes(usize),
    #[error("sign vector has length {found}, arrangement has {expected} hyperplanes")]
    SignLength { expected: usize, found: usize },
    #[error("point has dimension {found}, expected {expected}")]
    PointDimension { expected: usize, found: usize },
}

/// JSON arrangement file: `{n, normals: [["p/q", ...], ...]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrangementSpec {
    pub n: usize,
    #[serde(with = "rational::matrix_serde")]
    pub normals: Vec<Vec<Rational>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ArrangementSpec", into = "ArrangementSpec")]
pub struct Arrangement {
    n: usize,
    normals: Vec<Vec<Rational>>,
}

impl TryFrom<ArrangementSpec> for Arrangement {
    type Error = ArrangementError;
    fn try_from(spec: ArrangementSpec) -> Result<Self, Self::Error> {
        Arrangement::new(spec.n, spec.normals)
    }
}

impl From<Arrangement> for ArrangementSpec {
    fn from(a: Arrangement) -> Self {
        ArrangementSpec {
            n: a.n,
            normals: a.normals,
        }
    }
}

/// A full-dimensional cone: its sign vector and an interior point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chamber {
    pub signs: SignVector,
    #[serde(with = "rational::vec_serde")]
    pub witness: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymmetryCheckError {
    #[error("group acts on {group} indices, arrangement has {arrangement} hyperplanes")]
    DegreeMismatch { group: usize, arrangement: usize },
    #[error("generator {generator} maps {signs} ({}) to {image} ({})",
        feasibility(*.signs_feasible), feasibility(!*.signs_feasible))]
    Violation {
        generator: usize,
        signs: SignVector,
        image: SignVector,
        signs_feasible: bool,
    },
}

fn feasibility(f: bool) -> &'static str {
    if f {
        "feasible"
    } else {
        "infeasible"
    }
}

fn parallel(a: &[Rational], b: &[Rational]) -> bool {
    (0..a.len()).all(|i| (i + 1..a.len()).all(|j| &a[i] * &b[j] == &a[j] * &b[i]))
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Arrangement {
    pub fn new(n: usize, normals: Vec<Vec<Rational>>) -> Result<Self, ArrangementError> {
        if n > MAX_DIM {
            return Err(ArrangementError::DimensionTooLarge(n));
        }
        if normals.len() > MAX_HYPERPLANES {
            return Err(ArrangementError::TooManyHyperplanes(normals.len()));
        }
        for (index, a) in normals.iter().enumerate() {
            if a.len() != n {
                return Err(ArrangementError::DimensionMismatch {
                    index,
                    expected: n,
                    found: a.len(),
                });
            }
            if a.iter().all(Zero::is_zero) {
                return Err(ArrangementError::ZeroNormal(index));
            }
        }
        for i in 0..normals.len() {
            for j in i + 1..normals.len() {
                if parallel(&normals[i], &normals[j]) {
                    return Err(ArrangementError::Parallel(i, j));
                }
            }
        }
        Ok(Self { n, normals })
    }

    pub fn from_integers(n: usize, normals: &[Vec<i64>]) -> Result<Self, ArrangementError> {
        Self::new(
            n,
            normals
                .iter()
                .map(|row| row.iter().map(|&v| rational::int(v)).collect())
                .collect(),
        )
    }

    /// Normals `e_1, …, e_n`.
    pub fn coordinate(n: usize) -> Self {
        let normals: Vec<Vec<i64>> = (0..n)
            .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
            .collect();
        Self::from_integers(n, &normals).expect("coordinate normals are independent")
    }

    /// Normals `e_i − e_j` for `i < j`, in lexicographic order of `(i, j)`.
    pub fn braid(n: usize) -> Self {
        let mut normals = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let mut v = vec![0i64; n];
                v[i] = 1;
                v[j] = -1;
                normals.push(v);
            }
        }
        Self::from_integers(n, &normals).expect("braid normals are pairwise independent")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn normals(&self) -> &[Vec<Rational>] {
        &self.normals
    }

    pub fn sign_of_point(&self, x: &[Rational]) -> Result<SignVector, ArrangementError> {
        if x.len() != self.n {
            return Err(ArrangementError::PointDimension {
                expected: self.n,
                found: x.len(),
            });
        }
        Ok(SignVector(
            self.normals.iter().map(|a| Sign::of(&dot(a, x))).collect(),
        ))
    }

    fn check_signs(&self, s: &SignVector) -> Result<(), ArrangementError> {
        if s.len() != self.len() {
            return Err(ArrangementError::SignLength {
                expected: self.len(),
                found: s.len(),
            });
        }
        Ok(())
    }

    /// An exact point realizing `s`, or `None` when the region is empty.
    ///
    /// Zero entries are equalities and are eliminated first by passing to a
    /// nullspace basis; the remaining strict system is decided by
    /// Fourier–Motzkin elimination with back-substitution.
    pub fn feasible(&self, s: &SignVector) -> Result<Option<Vec<Rational>>, ArrangementError> {
        self.check_signs(s)?;
        let equalities: Vec<Vec<Rational>> = self
            .normals
            .iter()
            .zip(&s.0)
            .filter(|(_, sign)| **sign == Sign::Zero)
            .map(|(a, _)| a.clone())
            .collect();
        let basis = fm::nullspace(&equalities, self.n);
        let strict: Vec<Vec<Rational>> = self
            .normals
            .iter()
            .zip(&s.0)
            .filter(|(_, sign)| **sign != Sign::Zero)
            .map(|(a, sign)| {
                basis
                    .iter()
                    .map(|b| {
                        let v = dot(a, b);
                        if *sign == Sign::Neg {
                            -v
                        } else {
                            v
                        }
                    })
                    .collect()
            })
            .collect();
        let Some(y) = fm::strict_feasible(&strict, basis.len()) else {
            return Ok(None);
        };
        let mut x = vec![Rational::zero(); self.n];
        for (coef, b) in y.iter().zip(&basis) {
            for (xi, bi) in x.iter_mut().zip(b) {
                *xi += coef * bi;
            }
        }
        debug_assert_eq!(self.sign_of_point(&x).as_ref(), Ok(s));
        Ok(Some(x))
    }

    pub fn is_feasible(&self, s: &SignVector) -> Result<bool, ArrangementError> {
        Ok(self.feasible(s)?.is_some())
    }

    /// Every chamber, found by testing all 2^m full sign vectors.
    pub fn chambers_bruteforce(&self) -> Result<Vec<Chamber>, ArrangementError> {
        if self.len() > MAX_HYPERPLANES {
            return Err(ArrangementError::TooManyHyperplanes(self.len()));
        }
        let mut out = Vec::new();
        for signs in SignVector::all_full(self.len()) {
            if let Some(witness) = self.feasible(&signs)? {
                out.push(Chamber { signs, witness });
            }
        }
        out.sort_by(|a, b| a.signs.cmp(&b.signs));
        Ok(out)
    }

    /// Walls of `chamber` (indices whose zeroed sign vector is feasible).
    pub fn walls(&self, chamber: &SignVector) -> Result<Vec<usize>, ArrangementError> {
        self.check_signs(chamber)?;
        let mut walls = Vec::new();
        for i in 0..self.len() {
            if self.is_feasible(&chamber.with(i, Sign::Zero))? {
                walls.push(i);
            }
        }
        Ok(walls)
    }

    /// Chambers across each wall of `chamber`, with fresh witnesses.
    pub fn neighbors(&self, chamber: &Chamber) -> Result<Vec<(usize, Chamber)>, ArrangementError> {
        let mut out = Vec::new();
        for i in self.walls(&chamber.signs)? {
            let signs = chamber.signs.with(i, -chamber.signs[i]);
            if let Some(witness) = self.feasible(&signs)? {
                out.push((i, Chamber { signs, witness }));
            }
        }
        Ok(out)
    }

    /// A chamber containing the first point `(1, t, t², …)`, `t = 2, 3, …`,
    /// that lies on no hyperplane.
    pub fn starting_chamber(&self) -> Chamber {
        let mut t = 2i64;
        loop {
            let mut x = Vec::with_capacity(self.n);
            let mut p = rational::int(1);
            for _ in 0..self.n {
                x.push(p.clone());
                p *= rational::int(t);
            }
            let signs = self.sign_of_point(&x).expect("dimension matches");
            if signs.is_full() {
                return Chamber { signs, witness: x };
            }
            t += 1;
        }
    }

    /// Checks that every generator maps feasible full sign vectors to feasible
    /// ones and infeasible to infeasible. All 2^m vectors are checked when
    /// `m ≤ 12`; otherwise a fixed-seed sample of 512.
    pub fn validate_symmetry(&self, group: &Group) -> Result<(), SymmetryCheckError> {
        if group.degree() != self.len() {
            return Err(SymmetryCheckError::DegreeMismatch {
                group: group.degree(),
                arrangement: self.len(),
            });
        }
        let m = self.len();
        let tests: Vec<SignVector> = if m <= EXHAUSTIVE_SYMMETRY_CHECK {
            SignVector::all_full(m).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(SYMMETRY_SAMPLE_SEED);
            let total = 1usize << m;
            sample(&mut rng, total, SYMMETRY_SAMPLE.min(total))
                .into_iter()
                .map(|mask| {
                    SignVector(
                        (0..m)
                            .map(|i| if mask >> i & 1 == 1 { Sign::Neg } else { Sign::Pos })
                            .collect(),
                    )
                })
                .collect()
        };
        let mut cache: HashMap<SignVector, bool> = HashMap::new();
        let mut feasible = |s: &SignVector| -> bool {
            if let Some(f) = cache.get(s) {
                return *f;
            }
            let f = self.is_feasible(s).expect("lengths checked");
            cache.insert(s.clone(), f);
            f
        };
        for (gi, g) in group.generators().iter().enumerate() {
            for s in &tests {
                let image = g.act(s).expect("degree checked");
                let before = feasible(s);
                if before != feasible(&image) {
                    return Err(SymmetryCheckError::Violation {
                        generator: gi,
                        signs: s.clone(),
                        image,
                        signs_feasible: before,
                    });
                }
            }
        }
        Ok(())
    }
}
