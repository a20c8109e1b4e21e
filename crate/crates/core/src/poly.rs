//! Exact polynomial arithmetic over Q for the plane-curve Jacobian test.
//!
//! [`UPoly`] is a dense univariate polynomial, [`BPoly`] a sparse bivariate
//! one. Resultants in `y` are computed over the domain Q[x] with the
//! subresultant PRS, so every division is exact and no rational functions
//! appear.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrangement::rational::{self, format_rational, int, Rational};

/// Dense polynomial in one variable, coefficients from degree 0 upward.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct UPoly(Vec<Rational>);

impl UPoly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Self(coeffs)
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self::new(coeffs.iter().map(|&c| int(c)).collect())
    }

    pub fn zero() -> Self {
        Self(Vec::new())
    }

    pub fn constant(c: Rational) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    /// `c · t^k`.
    pub fn monomial(c: Rational, k: usize) -> Self {
        let mut v = vec![Rational::zero(); k + 1];
        v[k] = c;
        Self::new(v)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.0
    }

    pub fn coeff(&self, k: usize) -> Rational {
        self.0.get(k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    /// True for nonzero constants.
    pub fn is_unit(&self) -> bool {
        self.0.len() == 1
    }

    pub fn lc(&self) -> Rational {
        self.0.last().cloned().unwrap_or_else(Rational::zero)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::new(self.0.iter().map(|v| v * c).collect())
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        self.scale(&self.lc().recip())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * int(k as i64))
                .collect(),
        )
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        self.0
            .iter()
            .rev()
            .fold(Rational::zero(), |acc, c| acc * t + c)
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..e {
            out = &out * self;
        }
        out
    }

    /// Quotient and remainder; panics on division by zero.
    pub fn div_rem(&self, d: &Self) -> (Self, Self) {
        let dd = d.degree().expect("division by the zero polynomial");
        let inv = d.lc().recip();
        let mut r = self.0.clone();
        let mut q = vec![Rational::zero(); self.0.len().saturating_sub(dd)];
        while r.len() > dd && !r.is_empty() {
            let k = r.len() - 1 - dd;
            let c = r.last().unwrap() * &inv;
            for (j, dc) in d.0.iter().enumerate() {
                r[k + j] -= &c * dc;
            }
            q[k] = c;
            r.pop();
            while r.last().is_some_and(Zero::is_zero) {
                r.pop();
            }
        }
        (Self::new(q), Self::new(r))
    }

    pub fn rem(&self, d: &Self) -> Self {
        self.div_rem(d).1
    }

    /// Division known to be exact.
    pub fn exact_div(&self, d: &Self) -> Self {
        let (q, r) = self.div_rem(d);
        debug_assert!(r.is_zero(), "inexact division");
        q
    }

    /// Monic gcd; `gcd(0, 0) = 0`.
    pub fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// The product of the distinct irreducible factors, made monic.
    pub fn squarefree_part(&self) -> Self {
        if self.degree().unwrap_or(0) == 0 {
            return self.monic();
        }
        self.exact_div(&self.gcd(&self.derivative())).monic()
    }

    /// All rational roots, sorted, without multiplicity.
    pub fn rational_roots(&self) -> Vec<Rational> {
        if self.is_zero() {
            return Vec::new();
        }
        let p = self.squarefree_part();
        let n = p.degree().unwrap();
        if n == 0 {
            return Vec::new();
        }
        // Clear denominators, then pass to the monic integer polynomial
        // Q(z) = c^(n-1) P(z / c) whose integer roots are c times the
        // rational roots of P.
        let den = p
            .0
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints: Vec<BigInt> = p
            .0
            .iter()
            .map(|c| (c * Rational::from_integer(den.clone())).to_integer())
            .collect();
        let c = ints[n].clone();
        let mut q = Vec::with_capacity(n + 1);
        let mut cpow = BigInt::one();
        for i in (0..n).rev() {
            q.push(&ints[i] * &cpow);
            cpow *= &c;
        }
        q.reverse();
        q.push(BigInt::one());
        let bound = q.iter().map(|v| v.abs()).max().unwrap() + BigInt::one();
        let qp = Self::new(q.into_iter().map(Rational::from_integer).collect());
        let sturm = Sturm::new(&qp);
        let half = Rational::new(1.into(), 2.into());
        let lo = -Rational::from_integer(bound.clone()) - &half;
        let hi = Rational::from_integer(bound) + &half;
        let mut found = Vec::new();
        let mut stack = vec![(lo, hi)];
        while let Some((lo, hi)) = stack.pop() {
            if sturm.count(&lo, &hi) == 0 {
                continue;
            }
            let width = (&hi - &lo).to_integer();
            if width.is_one() {
                let z = &lo + &half;
                if qp.eval(&z).is_zero() {
                    found.push(z / Rational::from_integer(c.clone()));
                }
                continue;
            }
            let mid = &lo + Rational::from_integer(width / 2);
            stack.push((lo, mid.clone()));
            stack.push((mid, hi));
        }
        found.sort();
        found
    }

    pub fn display(&self, var: &str) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, c) in self.0.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let a = c.abs();
            if out.is_empty() {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mono = match k {
                0 => String::new(),
                1 => var.to_string(),
                _ => format!("{var}^{k}"),
            };
            if mono.is_empty() {
                out.push_str(&format_rational(&a));
            } else if a.is_one() {
                out.push_str(&mono);
            } else {
                out.push_str(&format!("{}*{mono}", format_rational(&a)));
            }
        }
        out
    }
}

impl fmt::Display for UPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display("x"))
    }
}

impl Add for &UPoly {
    type Output = UPoly;
    fn add(self, rhs: &UPoly) -> UPoly {
        let n = self.0.len().max(rhs.0.len());
        UPoly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &UPoly {
    type Output = UPoly;
    fn sub(self, rhs: &UPoly) -> UPoly {
        let n = self.0.len().max(rhs.0.len());
        UPoly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Neg for &UPoly {
    type Output = UPoly;
    fn neg(self) -> UPoly {
        UPoly(self.0.iter().map(|c| -c).collect())
    }
}

impl Mul for &UPoly {
    type Output = UPoly;
    fn mul(self, rhs: &UPoly) -> UPoly {
        if self.is_zero() || rhs.is_zero() {
            return UPoly::zero();
        }
        let mut out = vec![Rational::zero(); self.0.len() + rhs.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in rhs.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        UPoly::new(out)
    }
}

struct Sturm(Vec<UPoly>);

impl Sturm {
    fn new(p: &UPoly) -> Self {
        let mut seq = vec![p.clone(), p.derivative()];
        while !seq.last().unwrap().is_zero() {
            let k = seq.len();
            let r = -&seq[k - 2].rem(&seq[k - 1]);
            seq.push(r);
        }
        seq.pop();
        Self(seq)
    }

    fn variations(&self, t: &Rational) -> usize {
        let signs: Vec<bool> = self
            .0
            .iter()
            .map(|p| p.eval(t))
            .filter(|v| !v.is_zero())
            .map(|v| v.is_positive())
            .collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Distinct real roots in `(lo, hi]`.
    fn count(&self, lo: &Rational, hi: &Rational) -> usize {
        self.variations(lo) - self.variations(hi)
    }
}

/// One term of a bivariate polynomial in the JSON input format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Monomial {
    #[serde(with = "rational_string")]
    pub coeff: Rational,
    pub xexp: u32,
    pub yexp: u32,
}

mod rational_string {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let t = String::deserialize(d)?;
        rational::parse_rational(&t).map_err(serde::de::Error::custom)
    }
}

/// Sparse polynomial in `x` and `y`, keyed by `(xexp, yexp)`.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<Monomial>", into = "Vec<Monomial>")]
pub struct BPoly(BTreeMap<(u32, u32), Rational>);

impl From<Vec<Monomial>> for BPoly {
    fn from(terms: Vec<Monomial>) -> Self {
        let mut p = BPoly::default();
        for t in terms {
            p.add_term(t.xexp, t.yexp, t.coeff);
        }
        p
    }
}

impl From<BPoly> for Vec<Monomial> {
    fn from(p: BPoly) -> Self {
        p.0.into_iter()
            .map(|((xexp, yexp), coeff)| Monomial { coeff, xexp, yexp })
            .collect()
    }
}

fn binomial(n: u32, k: u32) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * (n - i) / (i + 1))
}

impl BPoly {
    /// From `(coefficient, xexp, yexp)` triples with integer coefficients.
    pub fn from_terms(terms: &[(i64, u32, u32)]) -> Self {
        let mut p = BPoly::default();
        for &(c, i, j) in terms {
            p.add_term(i, j, int(c));
        }
        p
    }

    pub fn add_term(&mut self, xexp: u32, yexp: u32, c: Rational) {
        let e = self.0.entry((xexp, yexp)).or_insert_with(Rational::zero);
        *e += c;
        if e.is_zero() {
            self.0.remove(&(xexp, yexp));
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, &Rational)> {
        self.0.iter().map(|(&(i, j), c)| (i, j, c))
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.0.keys().map(|(i, j)| i + j).max()
    }

    pub fn degree_y(&self) -> Option<u32> {
        self.0.keys().map(|(_, j)| *j).max()
    }

    /// Substitutes `x → x + λy`.
    pub fn shear(&self, lambda: u32) -> Self {
        if lambda == 0 {
            return self.clone();
        }
        let l = BigInt::from(lambda);
        let mut out = BPoly::default();
        for (&(i, j), c) in &self.0 {
            for k in 0..=i {
                let factor = binomial(i, k) * num_traits::pow(l.clone(), k as usize);
                out.add_term(i - k, j + k, c * Rational::from_integer(factor));
            }
        }
        out
    }

    /// Smallest `λ ≥ 0` for which the shear has a constant leading
    /// coefficient in `y`.
    pub fn monic_shear(&self) -> u32 {
        let Some(d) = self.total_degree() else {
            return 0;
        };
        (0u32..)
            .find(|&lambda| {
                let l = int(i64::from(lambda));
                let top: Rational = self
                    .0
                    .iter()
                    .filter(|((i, j), _)| i + j == d)
                    .map(|((i, _), c)| c * num_traits::pow(l.clone(), *i as usize))
                    .sum();
                !top.is_zero()
            })
            .expect("a nonzero top form vanishes at finitely many points")
    }

    pub fn dx(&self) -> Self {
        let mut out = BPoly::default();
        for (&(i, j), c) in &self.0 {
            if i > 0 {
                out.add_term(i - 1, j, c * int(i64::from(i)));
            }
        }
        out
    }

    pub fn dy(&self) -> Self {
        let mut out = BPoly::default();
        for (&(i, j), c) in &self.0 {
            if j > 0 {
                out.add_term(i, j - 1, c * int(i64::from(j)));
            }
        }
        out
    }

    /// Coefficients in Q[x] of the powers of `y`.
    pub fn y_coeffs(&self) -> Vec<UPoly> {
        let Some(dy) = self.degree_y() else {
            return Vec::new();
        };
        let mut rows: Vec<Vec<Rational>> = vec![Vec::new(); dy as usize + 1];
        for (&(i, j), c) in &self.0 {
            let row = &mut rows[j as usize];
            if row.len() <= i as usize {
                row.resize(i as usize + 1, Rational::zero());
            }
            row[i as usize] = c.clone();
        }
        rows.into_iter().map(UPoly::new).collect()
    }

    /// `f(a, y)` as a polynomial in `y`.
    pub fn eval_x(&self, a: &Rational) -> UPoly {
        UPoly::new(self.y_coeffs().iter().map(|p| p.eval(a)).collect())
    }

    pub fn eval(&self, x: &Rational, y: &Rational) -> Rational {
        self.eval_x(x).eval(y)
    }
}

impl fmt::Display for BPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (n, (&(i, j), c)) in self.0.iter().rev().enumerate() {
            let neg = c.is_negative();
            if n == 0 {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            let mut parts = Vec::new();
            let a = c.abs();
            if !a.is_one() || (i == 0 && j == 0) {
                parts.push(format_rational(&a));
            }
            for (v, e) in [("x", i), ("y", j)] {
                match e {
                    0 => {}
                    1 => parts.push(v.to_string()),
                    _ => parts.push(format!("{v}^{e}")),
                }
            }
            f.write_str(&parts.join("*"))?;
        }
        Ok(())
    }
}

/// Polynomial in `y` with coefficients in Q[x].
#[derive(Clone, Debug)]
struct YPoly(Vec<UPoly>);

impl YPoly {
    fn new(mut c: Vec<UPoly>) -> Self {
        while c.last().is_some_and(UPoly::is_zero) {
            c.pop();
        }
        Self(c)
    }

    fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn degree(&self) -> usize {
        self.0.len() - 1
    }

    fn lc(&self) -> &UPoly {
        self.0.last().unwrap()
    }

    fn scale(&self, c: &UPoly) -> Self {
        Self::new(self.0.iter().map(|p| p * c).collect())
    }

    fn exact_div(&self, c: &UPoly) -> Self {
        Self::new(self.0.iter().map(|p| p.exact_div(c)).collect())
    }

    /// `lc(b)^(deg a - deg b + 1) · a mod b`.
    fn prem(&self, b: &Self) -> Self {
        let db = b.degree();
        let mut r = self.clone();
        let mut e = self.degree() + 1 - db;
        while !r.is_zero() && r.degree() >= db {
            let shift = r.degree() - db;
            let lr = r.lc().clone();
            let mut next = r.scale(b.lc()).0;
            for (j, bc) in b.0.iter().enumerate() {
                next[shift + j] = &next[shift + j] - &(&lr * bc);
            }
            r = Self::new(next);
            e -= 1;
        }
        r.scale(&b.lc().pow(e as u32))
    }
}

/// `Res_y(f, g)` as a polynomial in `x`.
pub fn resultant_y(f: &BPoly, g: &BPoly) -> UPoly {
    resultant(YPoly::new(f.y_coeffs()), YPoly::new(g.y_coeffs()))
}

fn resultant(a: YPoly, b: YPoly) -> UPoly {
    if a.is_zero() || b.is_zero() {
        return UPoly::zero();
    }
    let (mut a, mut b, mut s) = if a.degree() < b.degree() {
        let s = if a.degree() % 2 == 1 && b.degree() % 2 == 1 { -1 } else { 1 };
        (b, a, s)
    } else {
        (a, b, 1)
    };
    if b.degree() == 0 {
        return b.lc().pow(a.degree() as u32);
    }
    let mut g = UPoly::one();
    let mut h = UPoly::one();
    loop {
        let delta = (a.degree() - b.degree()) as u32;
        if a.degree() % 2 == 1 && b.degree() % 2 == 1 {
            s = -s;
        }
        let r = a.prem(&b);
        a = b;
        b = r.exact_div(&(&g * &h.pow(delta)));
        g = a.lc().clone();
        if delta > 0 {
            h = g.pow(delta).exact_div(&h.pow(delta - 1));
        }
        if b.is_zero() {
            return UPoly::zero();
        }
        if b.degree() == 0 {
            break;
        }
    }
    let da = a.degree() as u32;
    let res = b.lc().pow(da).exact_div(&h.pow(da - 1));
    if s < 0 {
        -&res
    } else {
        res
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurveError {
    #[error("the zero polynomial does not define a curve")]
    Zero,
    #[error("polynomial is not squarefree")]
    NotSquarefree,
}

/// Evidence of a singular point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingularCertificate {
    /// Shear `x → x + λy` applied before elimination.
    pub shear: u32,
    /// Root of the candidate polynomial, in sheared coordinates.
    #[serde(with = "rational_string")]
    pub a: Rational,
    /// `gcd(f(a,y), f_x(a,y), f_y(a,y))` in sheared coordinates.
    pub gcd: String,
    /// A rational singular point in the original coordinates, when one exists.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub point: Option<[String; 2]>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CurveVerdict {
    Smooth,
    Singular(SingularCertificate),
    /// Some singular candidate has an irrational `x`-coordinate.
    Indeterminate { candidates: UPoly, shear: u32 },
}

/// Rejects the zero polynomial and polynomials with a repeated factor.
///
/// After a shear making the leading `y`-coefficient constant every factor
/// involves `y`, so `f` is squarefree iff `Res_y(f, f_y) ≠ 0`.
pub fn check_curve(f: &BPoly) -> Result<(), CurveError> {
    if f.is_zero() {
        return Err(CurveError::Zero);
    }
    if f.total_degree() == Some(0) {
        return Ok(());
    }
    let h = f.shear(f.monic_shear());
    if resultant_y(&h, &h.dy()).is_zero() {
        return Err(CurveError::NotSquarefree);
    }
    Ok(())
}

/// Decides whether the affine curve `f = 0` over C has a singular point.
pub fn plane_curve_singularity(f: &BPoly) -> Result<CurveVerdict, CurveError> {
    if f.is_zero() {
        return Err(CurveError::Zero);
    }
    if f.total_degree() == Some(0) {
        return Ok(CurveVerdict::Smooth);
    }
    let lambda = f.monic_shear();
    let h = f.shear(lambda);
    let (hx, hy) = (h.dx(), h.dy());
    let r_y = resultant_y(&h, &hy);
    if r_y.is_zero() {
        return Err(CurveError::NotSquarefree);
    }
    let r = resultant_y(&h, &hx).gcd(&r_y);
    if r.is_unit() {
        return Ok(CurveVerdict::Smooth);
    }
    let roots = r.rational_roots();
    for a in &roots {
        let g = h.eval_x(a).gcd(&hx.eval_x(a)).gcd(&hy.eval_x(a));
        if g.degree().unwrap_or(0) > 0 {
            let point = g.rational_roots().first().map(|b| {
                let x = a + int(i64::from(lambda)) * b;
                [format_rational(&x), format_rational(b)]
            });
            return Ok(CurveVerdict::Singular(SingularCertificate {
                shear: lambda,
                a: a.clone(),
                gcd: g.display("y"),
                point,
            }));
        }
    }
    if roots.len() == r.degree().unwrap() {
        Ok(CurveVerdict::Smooth)
    } else {
        Ok(CurveVerdict::Indeterminate {
            candidates: r,
            shear: lambda,
        })
    }
}
