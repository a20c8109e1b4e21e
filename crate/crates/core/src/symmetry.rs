//! Finite groups of signed permutations acting on sign vectors, with orbit
//! enumeration and lexicographically minimal canonical representatives.
//!
//! A signed permutation `(σ, ε)` maps a sign vector `s` to `t` with
//! `t[σ(i)] = ε[i] · s[i]`. Groups here are small enough to enumerate, so
//! canonical forms are computed by brute force over all elements.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sign::{Sign, SignVector};

pub const DEFAULT_GROUP_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymmetryError {
    #[error("sigma {0:?} is not a permutation of 0..{1}")]
    NotAPermutation(Vec<usize>, usize),
    #[error("eps entries must be +1 or -1, got {0}")]
    BadSign(i8),
    #[error("element acts on {found} indices, expected {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("group closure exceeds the cap of {0} elements")]
    CapExceeded(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSignedPermutation", into = "RawSignedPermutation")]
pub struct SignedPermutation {
    sigma: Vec<usize>,
    eps: Vec<Sign>,
}

#[derive(Serialize, Deserialize)]
struct RawSignedPermutation {
    sigma: Vec<usize>,
    eps: Vec<i8>,
}

impl TryFrom<RawSignedPermutation> for SignedPermutation {
    type Error = SymmetryError;
    fn try_from(raw: RawSignedPermutation) -> Result<Self, Self::Error> {
        SignedPermutation::new(raw.sigma, raw.eps)
    }
}

impl From<SignedPermutation> for RawSignedPermutation {
    fn from(g: SignedPermutation) -> Self {
        RawSignedPermutation {
            eps: g.eps.iter().map(|s| if *s == Sign::Pos { 1 } else { -1 }).collect(),
            sigma: g.sigma,
        }
    }
}

impl SignedPermutation {
    pub fn new(sigma: Vec<usize>, eps: Vec<i8>) -> Result<Self, SymmetryError> {
        let m = sigma.len();
        if eps.len() != m {
            return Err(SymmetryError::SizeMismatch {
                expected: m,
                found: eps.len(),
            });
        }
        let mut seen = vec![false; m];
        for &i in &sigma {
            if i >= m || seen[i] {
                return Err(SymmetryError::NotAPermutation(sigma, m));
            }
            seen[i] = true;
        }
        let eps = eps
            .into_iter()
            .map(|e| match e {
                1 => Ok(Sign::Pos),
                -1 => Ok(Sign::Neg),
                other => Err(SymmetryError::BadSign(other)),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { sigma, eps })
    }

    /// A plain permutation (all signs +1).
    pub fn permutation(sigma: Vec<usize>) -> Result<Self, SymmetryError> {
        let m = sigma.len();
        Self::new(sigma, vec![1; m])
    }

    pub fn identity(m: usize) -> Self {
        Self {
            sigma: (0..m).collect(),
            eps: vec![Sign::Pos; m],
        }
    }

    /// Swap of indices `a` and `b` with the given signs.
    pub fn transposition(m: usize, a: usize, b: usize) -> Self {
        let mut sigma: Vec<usize> = (0..m).collect();
        sigma.swap(a, b);
        Self {
            sigma,
            eps: vec![Sign::Pos; m],
        }
    }

    pub fn degree(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.degree())
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let sigma = other.sigma.iter().map(|&j| self.sigma[j]).collect();
        let eps = (0..other.degree())
            .map(|i| self.eps[other.sigma[i]] * other.eps[i])
            .collect();
        Self { sigma, eps }
    }

    pub fn inverse(&self) -> Self {
        let m = self.degree();
        let mut sigma = vec![0; m];
        let mut eps = vec![Sign::Pos; m];
        for i in 0..m {
            sigma[self.sigma[i]] = i;
            eps[self.sigma[i]] = self.eps[i];
        }
        Self { sigma, eps }
    }

    /// `result[σ(i)] = ε[i] · s[i]`.
    pub fn act(&self, s: &SignVector) -> Result<SignVector, SymmetryError> {
        if s.len() != self.degree() {
            return Err(SymmetryError::SizeMismatch {
                expected: self.degree(),
                found: s.len(),
            });
        }
        Ok(self.act_unchecked(s))
    }

    fn act_unchecked(&self, s: &SignVector) -> SignVector {
        let mut out = vec![Sign::Zero; s.len()];
        for (i, &target) in self.sigma.iter().enumerate() {
            out[target] = self.eps[i] * s[i];
        }
        SignVector(out)
    }
}

/// Free-function form of [`SignedPermutation::act`].
pub fn act(g: &SignedPermutation, s: &SignVector) -> Result<SignVector, SymmetryError> {
    g.act(s)
}

/// JSON group description: `{m, generators: [{sigma, eps}]}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub m: usize,
    pub generators: Vec<SignedPermutation>,
}

impl GroupSpec {
    pub fn close(&self, cap: usize) -> Result<Group, SymmetryError> {
        close(&self.generators, self.m, cap)
    }
}

/// A finite group of signed permutations with all elements enumerated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    m: usize,
    generators: Vec<SignedPermutation>,
    elements: Vec<SignedPermutation>,
}

/// Breadth-first closure of `generators` under composition.
pub fn close(generators: &[SignedPermutation], m: usize, cap: usize) -> Result<Group, SymmetryError> {
    for g in generators {
        if g.degree() != m {
            return Err(SymmetryError::SizeMismatch {
                expected: m,
                found: g.degree(),
            });
        }
    }
    let id = SignedPermutation::identity(m);
    let mut seen: HashSet<SignedPermutation> = HashSet::from([id.clone()]);
    let mut elements = vec![id.clone()];
    let mut queue = VecDeque::from([id]);
    while let Some(x) = queue.pop_front() {
        for g in generators {
            let y = g.compose(&x);
            if seen.insert(y.clone()) {
                if elements.len() >= cap {
                    return Err(SymmetryError::CapExceeded(cap));
                }
                elements.push(y.clone());
                queue.push_back(y);
            }
        }
    }
    Ok(Group {
        m,
        generators: generators.to_vec(),
        elements,
    })
}

impl Group {
    pub fn trivial(m: usize) -> Self {
        Self {
            m,
            generators: Vec::new(),
            elements: vec![SignedPermutation::identity(m)],
        }
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn generators(&self) -> &[SignedPermutation] {
        &self.generators
    }

    pub fn elements(&self) -> &[SignedPermutation] {
        &self.elements
    }

    fn check_len(&self, s: &SignVector) -> Result<(), SymmetryError> {
        if s.len() != self.m {
            return Err(SymmetryError::SizeMismatch {
                expected: self.m,
                found: s.len(),
            });
        }
        Ok(())
    }

    /// Lexicographic minimum of the orbit of `s` (order − < 0 < +).
    pub fn canonical(&self, s: &SignVector) -> Result<SignVector, SymmetryError> {
        self.check_len(s)?;
        Ok(self
            .elements
            .iter()
            .map(|g| g.act_unchecked(s))
            .min()
            .expect("a group has at least the identity"))
    }

    pub fn orbit(&self, s: &SignVector) -> Result<HashSet<SignVector>, SymmetryError> {
        self.check_len(s)?;
        Ok(self.elements.iter().map(|g| g.act_unchecked(s)).collect())
    }

    pub fn orbit_size(&self, s: &SignVector) -> Result<usize, SymmetryError> {
        Ok(self.orbit(s)?.len())
    }

    pub fn stabilizer_order(&self, s: &SignVector) -> Result<usize, SymmetryError> {
        self.check_len(s)?;
        Ok(self.elements.iter().filter(|g| g.act_unchecked(s) == *s).count())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(s: &str) -> SignVector {
        s.parse().unwrap()
    }

    fn s3() -> Group {
        let cycle = SignedPermutation::permutation(vec![1, 2, 0]).unwrap();
        let swap = SignedPermutation::transposition(3, 0, 1);
        close(&[cycle, swap], 3, DEFAULT_GROUP_CAP).unwrap()
    }

    #[test]
    fn trivial_group_has_order_one() {
        assert_eq!(close(&[], 3, 10).unwrap().order(), 1);
    }

    #[test]
    fn s3_has_order_six() {
        assert_eq!(s3().order(), 6);
    }

    #[test]
    fn sign_flip_is_an_involution() {
        let g = SignedPermutation::new(vec![0, 1], vec![-1, 1]).unwrap();
        assert_eq!(close(&[g], 2, 10).unwrap().order(), 2);
    }

    #[test]
    fn cap_is_enforced() {
        let cycle = SignedPermutation::permutation(vec![1, 2, 0]).unwrap();
        let swap = SignedPermutation::transposition(3, 0, 1);
        assert_eq!(
            close(&[cycle, swap], 3, 5).unwrap_err(),
            SymmetryError::CapExceeded(5)
        );
    }

    #[test]
    fn malformed_elements_rejected() {
        assert!(SignedPermutation::new(vec![0, 0], vec![1, 1]).is_err());
        assert!(SignedPermutation::new(vec![0, 1], vec![1, 2]).is_err());
        assert!(SignedPermutation::new(vec![0, 1], vec![1]).is_err());
        let g = SignedPermutation::identity(2);
        assert!(close(&[g], 3, 10).is_err());
    }

    #[test]
    fn action_examples() {
        let id = SignedPermutation::identity(3);
        assert_eq!(id.act(&sv("+-0")).unwrap(), sv("+-0"));
        let swap = SignedPermutation::transposition(3, 0, 1);
        assert_eq!(swap.act(&sv("+-+")).unwrap(), sv("-++"));
        let flip = SignedPermutation::new(vec![0, 1, 2], vec![-1, -1, 1]).unwrap();
        assert_eq!(flip.act(&sv("+-0")).unwrap(), sv("-+0"));
        assert!(flip.act(&sv("+-")).is_err());
    }

    #[test]
    fn canonical_examples() {
        let t = Group::trivial(3);
        assert_eq!(t.canonical(&sv("+-+")).unwrap(), sv("+-+"));
        assert_eq!(s3().canonical(&sv("++-")).unwrap(), sv("-++"));
    }

    #[test]
    fn orbit_size_examples() {
        assert_eq!(Group::trivial(3).orbit_size(&sv("+-0")).unwrap(), 1);
        assert_eq!(s3().orbit_size(&sv("+++")).unwrap(), 1);
        assert_eq!(s3().orbit_size(&sv("++-")).unwrap(), 3);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"m":3,"generators":[{"sigma":[2,1,0],"eps":[-1,-1,-1]}]}"#;
        let spec: GroupSpec = serde_json::from_str(text).unwrap();
        assert_eq!(serde_json::to_string(&spec).unwrap(), text);
        assert_eq!(spec.close(DEFAULT_GROUP_CAP).unwrap().order(), 2);
        assert!(serde_json::from_str::<GroupSpec>(r#"{"m":2,"generators":[{"sigma":[0,0],"eps":[1,1]}]}"#).is_err());
    }

    fn signed_perm(m: usize) -> impl Strategy<Value = SignedPermutation> {
        (
            Just((0..m).collect::<Vec<_>>()).prop_shuffle(),
            proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], m),
        )
            .prop_map(|(sigma, eps)| SignedPermutation::new(sigma, eps).unwrap())
    }

    fn sign_vec(m: usize) -> impl Strategy<Value = SignVector> {
        proptest::collection::vec(
            prop_oneof![Just(Sign::Neg), Just(Sign::Zero), Just(Sign::Pos)],
            m,
        )
        .prop_map(SignVector)
    }

    proptest! {
        #[test]
        fn act_is_a_group_action(
            (g, h, s) in (1usize..6).prop_flat_map(|m| (signed_perm(m), signed_perm(m), sign_vec(m)))
        ) {
            let gh = g.compose(&h);
            prop_assert_eq!(gh.act(&s).unwrap(), g.act(&h.act(&s).unwrap()).unwrap());
            prop_assert!(g.compose(&g.inverse()).is_identity());
            prop_assert!(g.inverse().compose(&g).is_identity());
        }

        #[test]
        fn group_axioms_and_orbits(
            (gens, s) in (1usize..5).prop_flat_map(|m| (proptest::collection::vec(signed_perm(m), 0..3), sign_vec(m)))
        ) {
            let m = s.len();
            let group = close(&gens, m, DEFAULT_GROUP_CAP).unwrap();
            let elems: HashSet<_> = group.elements().iter().cloned().collect();
            prop_assert_eq!(elems.len(), group.order());
            prop_assert!(elems.contains(&SignedPermutation::identity(m)));
            for a in group.elements() {
                prop_assert!(elems.contains(&a.inverse()));
                for b in group.elements().iter().take(8) {
                    prop_assert!(elems.contains(&a.compose(b)));
                }
            }
            let orbit = group.orbit_size(&s).unwrap();
            prop_assert_eq!(orbit * group.stabilizer_order(&s).unwrap(), group.order());
            let c = group.canonical(&s).unwrap();
            prop_assert_eq!(group.canonical(&c).unwrap(), c.clone());
            for g in group.elements() {
                prop_assert_eq!(group.canonical(&g.act(&s).unwrap()).unwrap(), c.clone());
            }
        }
    }
}
