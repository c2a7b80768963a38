//! Exact rational arithmetic for Laurent terms with a formal deformation
//! order, truncated series, wall functions and wall-crossing transport.
//!
//! Invariants maintained here:
//! * `Rat` is always in lowest terms with positive denominator.
//! * `Term` has a nonzero coefficient.
//! * `Series` never stores a zero coefficient, never stores two entries with
//!   the same `(exp, torder)` key, and never stores a key with
//!   `torder > trunc`. Negative `torder` keys are permitted: they arise as
//!   transients in signed loop products and must cancel by the time a series
//!   is surfaced through the public pipeline.
//! * `WallFunction.direction` is primitive and every part has `j > 0`, so a
//!   wall function is always of the form `1 + sum_j g_j(t) z^{j m}`.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("series truncation orders differ: {0} vs {1}")]
    TruncMismatch(i64, i64),
    #[error("inverting a wall function with a t^0 tail requires an exponent cap")]
    NonterminatingInverse,
    #[error("exponent vectors have different lengths: {0} vs {1}")]
    DimMismatch(usize, usize),
}

// ---------------------------------------------------------------------------
// Rationals

/// Arbitrary-precision rational, kept in lowest terms with positive
/// denominator (delegated to `num`).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rat(BigRational);

impl Rat {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Rat(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_big(r: BigRational) -> Self {
        Rat(r)
    }

    pub fn zero() -> Self {
        Rat(BigRational::zero())
    }

    pub fn one() -> Self {
        Rat(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Rat {
        Rat(self.0.abs())
    }

    pub fn recip(&self) -> Rat {
        assert!(!self.is_zero(), "division by zero");
        Rat(self.0.recip())
    }

    pub fn floor_i64(&self) -> i64 {
        use num::ToPrimitive;
        self.0.floor().to_integer().to_i64().expect("floor overflow")
    }

    /// Nearest `f64`, for inexact prefilters and rendering only.
    pub fn to_f64(&self) -> f64 {
        use num::ToPrimitive;
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Sign as -1, 0 or 1.
    pub fn signum(&self) -> i64 {
        if self.0.is_zero() {
            0
        } else if self.0.is_negative() {
            -1
        } else {
            1
        }
    }

    pub fn big(&self) -> &BigRational {
        &self.0
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Self {
        Rat(BigRational::from(BigInt::from(n)))
    }
}

impl FromStr for Rat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n, d),
            None => (s, "1"),
        };
        let n = BigInt::from_str(n.trim()).map_err(|e| format!("bad numerator {n:?}: {e}"))?;
        let d = BigInt::from_str(d.trim()).map_err(|e| format!("bad denominator {d:?}: {e}"))?;
        if d.is_zero() {
            return Err("zero denominator".into());
        }
        Ok(Rat(BigRational::new(n, d)))
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        Rat::from_str(&s).map_err(D::Error::custom)
    }
}

macro_rules! rat_binop {
    ($trait:ident, $method:ident) => {
        impl $trait for Rat {
            type Output = Rat;
            fn $method(self, rhs: Rat) -> Rat {
                Rat((self.0).$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rat> for &'a Rat {
            type Output = Rat;
            fn $method(self, rhs: &'a Rat) -> Rat {
                Rat((&self.0).$method(&rhs.0))
            }
        }
    };
}

rat_binop!(Add, add);
rat_binop!(Sub, sub);
rat_binop!(Mul, mul);

impl Div for Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(self.0 / rhs.0)
    }
}

impl<'a> Div<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn div(self, rhs: &'a Rat) -> Rat {
        assert!(!rhs.is_zero(), "division by zero");
        Rat(&self.0 / &rhs.0)
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-self.0)
    }
}

impl<'a> Neg for &'a Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat(-&self.0)
    }
}

impl AddAssign for Rat {
    fn add_assign(&mut self, rhs: Rat) {
        self.0 += rhs.0;
    }
}

/// Generalized binomial coefficient: the coefficient of `x^l` in `(1+x)^k`,
/// for arbitrary integer `k` (negative `k` gives the alternating series of
/// the geometric inverse).
pub fn binomial(k: i64, l: u32) -> Rat {
    let mut acc = BigRational::one();
    for i in 0..l {
        let num = BigInt::from(k) - BigInt::from(i);
        acc = acc * BigRational::new(num, BigInt::from(i as i64 + 1));
    }
    Rat(acc)
}

// ---------------------------------------------------------------------------
// Terms and series

/// A single monomial `coeff * z^exp * t^torder`.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: Rat,
    pub exp: Vec<i64>,
    #[serde(rename = "t")]
    pub torder: i64,
}

impl Term {
    pub fn new(coeff: Rat, exp: Vec<i64>, torder: i64) -> Self {
        assert!(!coeff.is_zero(), "term with zero coefficient");
        Term { coeff, exp, torder }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let exps: Vec<String> = self.exp.iter().map(|e| e.to_string()).collect();
        write!(f, "{} * z^({}) * t^{}", self.coeff, exps.join(","), self.torder)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A finite sum of terms truncated at `t`-order `trunc`. Keys are ordered
/// lexicographically on `(torder, exp)`, which fixes the canonical printing
/// and serialization order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Series {
    terms: BTreeMap<(i64, Vec<i64>), Rat>,
    trunc: i64,
}

impl Series {
    pub fn zero(trunc: i64) -> Self {
        Series { terms: BTreeMap::new(), trunc }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = Term>, trunc: i64) -> Self {
        let mut s = Series::zero(trunc);
        for t in terms {
            s.add_term(&t);
        }
        s
    }

    pub fn trunc(&self) -> i64 {
        self.trunc
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds a term, merging with an existing entry and dropping anything
    /// beyond the truncation order or cancelling to zero.
    pub fn add_term(&mut self, t: &Term) {
        if t.torder > self.trunc || t.coeff.is_zero() {
            return;
        }
        let key = (t.torder, t.exp.clone());
        let entry = self.terms.entry(key).or_insert_with(Rat::zero);
        *entry += t.coeff.clone();
        if entry.is_zero() {
            self.terms.remove(&(t.torder, t.exp.clone()));
        }
    }

    pub fn add_series(&mut self, other: &Series) -> Result<(), AlgebraError> {
        if self.trunc != other.trunc {
            return Err(AlgebraError::TruncMismatch(self.trunc, other.trunc));
        }
        for t in other.iter_terms() {
            self.add_term(&t);
        }
        Ok(())
    }

    pub fn negate(&self) -> Series {
        Series {
            terms: self.terms.iter().map(|(k, v)| (k.clone(), -v)).collect(),
            trunc: self.trunc,
        }
    }

    pub fn scale(&self, c: &Rat) -> Series {
        if c.is_zero() {
            return Series::zero(self.trunc);
        }
        Series {
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
            trunc: self.trunc,
        }
    }

    pub fn coeff(&self, exp: &[i64], torder: i64) -> Rat {
        self.terms
            .get(&(torder, exp.to_vec()))
            .cloned()
            .unwrap_or_else(Rat::zero)
    }

    /// Terms in canonical `(torder, exp)` order.
    pub fn iter_terms(&self) -> impl Iterator<Item = Term> + '_ {
        self.terms.iter().map(|((l, e), c)| Term {
            coeff: c.clone(),
            exp: e.clone(),
            torder: *l,
        })
    }

    /// Lowest `torder` present, if any.
    pub fn min_torder(&self) -> Option<i64> {
        self.terms.keys().map(|(l, _)| *l).min()
    }

    /// Re-truncates to a (smaller or larger) order, dropping excess terms.
    pub fn retrunc(&self, trunc: i64) -> Series {
        let mut s = Series::zero(trunc);
        for t in self.iter_terms() {
            s.add_term(&t);
        }
        s
    }

    /// Keeps only terms with `torder >= 0`. Loop products go through signed
    /// kinks and may carry transient negative orders; this projects them away
    /// once a computation is finished.
    pub fn nonnegative_part(&self) -> Series {
        Series {
            terms: self
                .terms
                .iter()
                .filter(|((l, _), _)| *l >= 0)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            trunc: self.trunc,
        }
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.iter_terms().map(|t| t.to_string()).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

pub fn series_mul(a: &Series, b: &Series) -> Result<Series, AlgebraError> {
    if a.trunc != b.trunc {
        return Err(AlgebraError::TruncMismatch(a.trunc, b.trunc));
    }
    let mut out = Series::zero(a.trunc);
    for ta in a.iter_terms() {
        for tb in b.iter_terms() {
            if ta.exp.len() != tb.exp.len() {
                return Err(AlgebraError::DimMismatch(ta.exp.len(), tb.exp.len()));
            }
            let l = ta.torder + tb.torder;
            if l > a.trunc {
                continue;
            }
            let exp: Vec<i64> = ta.exp.iter().zip(&tb.exp).map(|(x, y)| x + y).collect();
            out.add_term(&Term::new(&ta.coeff * &tb.coeff, exp, l));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Wall functions

/// A function attached to a wall: `f = 1 + sum_{j>0} g_j(t) z^{j m}` where
/// `m` is the primitive wall direction. Each `g_j` is stored as a sparse
/// `t`-polynomial `(torder, coeff)` with strictly increasing orders.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct WallFunction {
    pub direction: Vec<i64>,
    /// Pairs `(j, g_j)`; every `j > 0` and distinct.
    pub parts: Vec<(u32, Vec<(i64, Rat)>)>,
}

impl WallFunction {
    pub fn one(direction: Vec<i64>) -> Self {
        WallFunction { direction, parts: Vec::new() }
    }

    /// `1 + c t^l z^m` with `m` the wall direction.
    pub fn binomial_part(direction: Vec<i64>, torder: i64, coeff: Rat) -> Self {
        WallFunction { direction, parts: vec![(1, vec![(torder, coeff)])] }
    }

    pub fn is_one(&self) -> bool {
        self.parts.iter().all(|(_, g)| g.iter().all(|(_, c)| c.is_zero()))
    }

    /// The tail `f - 1` as a sparse polynomial in `X = z^direction`, keyed by
    /// `(x_deg, torder)`.
    fn tail(&self) -> BTreeMap<(i64, i64), Rat> {
        let mut g = BTreeMap::new();
        for (j, gj) in &self.parts {
            assert!(*j > 0, "wall function part with j = 0");
            for (l, c) in gj {
                if c.is_zero() {
                    continue;
                }
                let e = g.entry((*j as i64, *l)).or_insert_with(Rat::zero);
                *e += c.clone();
            }
        }
        g.retain(|_, c| !c.is_zero());
        g
    }

    /// True if `f - 1` contains a term of `t`-order zero (so the geometric
    /// inverse does not terminate in `t` alone).
    pub fn has_order_zero_tail(&self) -> bool {
        self.tail().keys().any(|(_, l)| *l == 0)
    }

    /// Expands `f` into a `Series` in ambient dimension `dim`.
    pub fn expand(&self, dim: usize, trunc: i64) -> Series {
        assert_eq!(self.direction.len(), dim);
        let mut s = Series::zero(trunc);
        s.add_term(&Term::new(Rat::one(), vec![0; dim], 0));
        for ((x, l), c) in self.tail() {
            let exp: Vec<i64> = self.direction.iter().map(|d| d * x).collect();
            s.add_term(&Term::new(c, exp, l));
        }
        s
    }

    /// Multiplies another function with the same direction into this one,
    /// truncating at `trunc` and capping `x`-degrees at `xcap`.
    pub fn mul_same_direction(&self, other: &WallFunction, trunc: i64, xcap: i64) -> WallFunction {
        assert_eq!(self.direction, other.direction, "direction mismatch");
        let p = mul_poly2(&with_unit(self.tail()), &with_unit(other.tail()), trunc, xcap);
        poly2_to_wall(self.direction.clone(), p)
    }

    /// Solves `self * q = target` in the same-direction algebra, modulo
    /// `t^(trunc+1)` and `X`-degrees beyond `xcap`. Returns `None` when no
    /// exact quotient with unit constant term exists within the truncation.
    pub fn div_same_direction(
        &self,
        target: &WallFunction,
        trunc: i64,
        xcap: i64,
    ) -> Option<WallFunction> {
        if self.direction != target.direction {
            return None;
        }
        let a = with_unit(self.tail());
        let b = with_unit(target.tail());
        // Geometric inverse of `a = 1 + n`: nilpotent in X-degree under xcap.
        let mut neg_n = self.tail();
        for c in neg_n.values_mut() {
            *c = -c.clone();
        }
        let mut inv: Poly2 = BTreeMap::new();
        inv.insert((0, 0), Rat::one());
        let mut pw: Poly2 = BTreeMap::new();
        pw.insert((0, 0), Rat::one());
        for _ in 0..=xcap {
            pw = mul_poly2(&pw, &neg_n, trunc, xcap);
            if pw.is_empty() {
                break;
            }
            for (k, c) in &pw {
                let e = inv.entry(*k).or_insert_with(Rat::zero);
                *e += c.clone();
            }
        }
        inv.retain(|_, c| !c.is_zero());
        let q = mul_poly2(&inv, &b, trunc, xcap);
        if mul_poly2(&a, &q, trunc, xcap) != b {
            return None;
        }
        if q.keys().any(|(x, _)| *x < 0) || q.get(&(0, 0)) != Some(&Rat::one()) {
            return None;
        }
        let mut q = q;
        q.remove(&(0, 0));
        if q.keys().any(|(x, _)| *x == 0) {
            return None;
        }
        let mut full = q;
        full.insert((0, 0), Rat::one());
        Some(poly2_to_wall(self.direction.clone(), full))
    }
}

/// Sparse bivariate polynomial in `(X, t)` keyed by `(x_deg, t_deg)`.
pub type Poly2 = BTreeMap<(i64, i64), Rat>;

fn with_unit(mut tail: Poly2) -> Poly2 {
    let e = tail.entry((0, 0)).or_insert_with(Rat::zero);
    *e += Rat::one();
    tail.retain(|_, c| !c.is_zero());
    tail
}

fn mul_poly2(a: &Poly2, b: &Poly2, trunc: i64, xcap: i64) -> Poly2 {
    let mut out: Poly2 = BTreeMap::new();
    for ((xa, la), ca) in a {
        for ((xb, lb), cb) in b {
            let (x, l) = (xa + xb, la + lb);
            if l > trunc || x.abs() > xcap {
                continue;
            }
            let e = out.entry((x, l)).or_insert_with(Rat::zero);
            *e += ca * cb;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn poly2_to_wall(direction: Vec<i64>, p: Poly2) -> WallFunction {
    let mut parts: BTreeMap<u32, Vec<(i64, Rat)>> = BTreeMap::new();
    for ((x, l), c) in p {
        if x == 0 && l == 0 {
            assert!(c == Rat::one(), "wall function without unit constant term");
            continue;
        }
        assert!(x > 0, "wall function with nonpositive X-degree {x}");
        parts.entry(x as u32).or_default().push((l, c));
    }
    WallFunction {
        direction,
        parts: parts.into_iter().collect(),
    }
}

/// Computes `f^e` as a sparse polynomial in `(X, t)` with `X = z^direction`,
/// truncated at `t`-order `trunc`. Negative `e` goes through the geometric
/// series; if `f - 1` has a `t^0` part this only terminates thanks to the
/// `xcap` bound on `|x_deg|`, which the caller must supply (`None` then
/// yields [`AlgebraError::NonterminatingInverse`]).
pub fn wall_power(
    f: &WallFunction,
    e: i64,
    trunc: i64,
    xcap: Option<i64>,
) -> Result<Poly2, AlgebraError> {
    let tail = f.tail();
    let xcap = match xcap {
        Some(c) => c,
        None => {
            if e < 0 && !tail.is_empty() && f.has_order_zero_tail() {
                return Err(AlgebraError::NonterminatingInverse);
            }
            // Power of a finite tail: t-order bounds the X-degree because
            // every inverse step consumes at least one order of t.
            let maxj = tail.keys().map(|(x, _)| x.abs()).max().unwrap_or(1);
            maxj * (trunc.max(1) + 1) * (e.abs().max(1))
        }
    };
    let mut unit: Poly2 = BTreeMap::new();
    unit.insert((0, 0), Rat::one());
    if e == 0 || tail.is_empty() {
        return Ok(unit);
    }

    // Base: f itself or its geometric inverse.
    let base = if e > 0 {
        with_unit(tail.clone())
    } else {
        // 1/f = sum_k (-(f-1))^k; terminates once every product exceeds the
        // truncation order or the X cap.
        let neg_tail: Poly2 = tail.iter().map(|(k, c)| (*k, -c)).collect();
        let mut inv = unit.clone();
        let mut pow = unit.clone();
        loop {
            pow = mul_poly2(&pow, &neg_tail, trunc, xcap);
            if pow.is_empty() {
                break;
            }
            for (k, c) in &pow {
                let entry = inv.entry(*k).or_insert_with(Rat::zero);
                *entry += c.clone();
            }
        }
        inv.retain(|_, c| !c.is_zero());
        inv
    };

    // Square-and-multiply on |e|.
    let mut result = unit;
    let mut sq = base;
    let mut n = e.unsigned_abs();
    while n > 0 {
        if n & 1 == 1 {
            result = mul_poly2(&result, &sq, trunc, xcap);
        }
        n >>= 1;
        if n > 0 {
            sq = mul_poly2(&sq, &sq, trunc, xcap);
        }
    }
    Ok(result)
}

// ---------------------------------------------------------------------------
// Transport

/// The data needed to push a term through one wall crossing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Crossing {
    /// Primitive normal of the wall, oriented towards its positive side.
    pub normal: Vec<i64>,
    /// Kink of the piecewise-affine structure across the wall.
    pub kink: i64,
    pub func: WallFunction,
}

fn pairing(n: &[i64], m: &[i64]) -> i64 {
    assert_eq!(n.len(), m.len());
    n.iter().zip(m).map(|(a, b)| a * b).sum()
}

/// Transports a single term across a wall:
/// `theta(a z^m t^l) = a z^m t^(l + kink*|<n,m>|) * f^(<n,m>*sign)`.
///
/// `sign` is +1 when crossing from the negative to the positive side of the
/// wall and -1 the other way. A term with `torder > trunc` transports to the
/// empty series. `xcap` bounds `X`-degrees when a negative power of a
/// function with a `t^0` tail must be inverted.
pub fn transport(
    term: &Term,
    wall: &Crossing,
    sign: i64,
    trunc: i64,
    xcap: Option<i64>,
) -> Result<Series, AlgebraError> {
    transport_impl(term, wall, sign, trunc, xcap, false)
}

/// Signed-kink variant used inside loop products around a joint: the kink
/// contributes `t^(kink*<n,m>)` without the absolute value, so transient
/// negative `t`-orders can occur (and must cancel over a full loop).
pub fn transport_signed(
    term: &Term,
    wall: &Crossing,
    sign: i64,
    trunc: i64,
    xcap: Option<i64>,
) -> Result<Series, AlgebraError> {
    transport_impl(term, wall, sign, trunc, xcap, true)
}

fn transport_impl(
    term: &Term,
    wall: &Crossing,
    sign: i64,
    trunc: i64,
    xcap: Option<i64>,
    signed_kink: bool,
) -> Result<Series, AlgebraError> {
    assert!(sign == 1 || sign == -1, "crossing sign must be +-1");
    let mut out = Series::zero(trunc);
    if term.torder > trunc {
        return Ok(out);
    }
    let pair = pairing(&wall.normal, &term.exp);
    let kink_shift = if signed_kink {
        wall.kink * (pair * sign)
    } else {
        wall.kink * pair.abs()
    };
    let e = pair * sign;
    let pow = wall_power(&wall.func, e, trunc - term.torder - kink_shift, xcap)?;
    for ((x, l), c) in pow {
        let torder = term.torder + kink_shift + l;
        if torder > trunc {
            continue;
        }
        let exp: Vec<i64> = term
            .exp
            .iter()
            .zip(&wall.func.direction)
            .map(|(m, d)| m + x * d)
            .collect();
        out.add_term(&Term::new(&term.coeff * &c, exp, torder));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rat {
        Rat::new(n, d)
    }

    #[test]
    fn rat_lowest_terms_display_parse() {
        assert_eq!(r(2, 4).to_string(), "1/2");
        assert_eq!(r(3, -6).to_string(), "-1/2");
        assert_eq!(r(7, 1).to_string(), "7");
        assert_eq!("-5/10".parse::<Rat>().unwrap(), r(-1, 2));
        assert_eq!("4".parse::<Rat>().unwrap(), r(4, 1));
        assert!("1/0".parse::<Rat>().is_err());
    }

    #[test]
    fn binomial_reading() {
        // Coefficient of x^l in (1+x)^k.
        assert_eq!(binomial(4, 2), r(6, 1));
        assert_eq!(binomial(2, 1), r(2, 1));
        assert_eq!(binomial(-1, 3), r(-1, 1));
        assert_eq!(binomial(-2, 2), r(3, 1));
        assert_eq!(binomial(3, 0), r(1, 1));
        assert_eq!(binomial(3, 5), r(0, 1));
    }

    #[test]
    fn term_canonical_string_and_json() {
        let t = Term::new(r(3, 2), vec![1, -1], 2);
        assert_eq!(t.to_string(), "3/2 * z^(1,-1) * t^2");
        let j = serde_json::to_string(&t).unwrap();
        assert_eq!(j, r#"{"coeff":"3/2","exp":[1,-1],"t":2}"#);
        let back: Term = serde_json::from_str(&j).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn series_merges_and_cancels() {
        let mut s = Series::zero(4);
        s.add_term(&Term::new(r(1, 2), vec![1, 0], 1));
        s.add_term(&Term::new(r(1, 2), vec![1, 0], 1));
        s.add_term(&Term::new(r(-1, 1), vec![1, 0], 1));
        assert!(s.is_zero());
        s.add_term(&Term::new(r(1, 1), vec![0, 1], 5)); // beyond trunc
        assert!(s.is_zero());
    }

    #[test]
    fn series_mul_trunc_mismatch() {
        let a = Series::zero(2);
        let b = Series::zero(3);
        assert_eq!(series_mul(&a, &b), Err(AlgebraError::TruncMismatch(2, 3)));
    }

    /// Oracle: naive convolution over raw term lists, independent of the
    /// BTreeMap representation.
    fn convolve(a: &[Term], b: &[Term], trunc: i64) -> Series {
        let mut out = Series::zero(trunc);
        for x in a {
            for y in b {
                let exp: Vec<i64> = x.exp.iter().zip(&y.exp).map(|(p, q)| p + q).collect();
                let l = x.torder + y.torder;
                if l <= trunc {
                    out.add_term(&Term::new(&x.coeff * &y.coeff, exp, l));
                }
            }
        }
        out
    }

    #[test]
    fn series_mul_matches_convolution_oracle() {
        let ta = vec![
            Term::new(r(1, 1), vec![0, 0], 0),
            Term::new(r(2, 3), vec![1, -1], 1),
            Term::new(r(-1, 2), vec![-1, 2], 2),
        ];
        let tb = vec![
            Term::new(r(3, 1), vec![0, 1], 0),
            Term::new(r(-5, 7), vec![2, 0], 3),
        ];
        let a = Series::from_terms(ta.clone(), 4);
        let b = Series::from_terms(tb.clone(), 4);
        assert_eq!(series_mul(&a, &b).unwrap(), convolve(&ta, &tb, 4));
    }

    #[test]
    fn wall_power_positive_square() {
        // (1 + t z^(1,0))^2 = 1 + 2 t X + t^2 X^2.
        let f = WallFunction::binomial_part(vec![1, 0], 1, r(1, 1));
        let p = wall_power(&f, 2, 4, None).unwrap();
        let mut want: Poly2 = BTreeMap::new();
        want.insert((0, 0), r(1, 1));
        want.insert((1, 1), r(2, 1));
        want.insert((2, 2), r(1, 1));
        assert_eq!(p, want);
    }

    #[test]
    fn wall_power_negative_geometric() {
        // (1 + t X)^-1 = 1 - tX + t^2 X^2 - ... truncated at t^3.
        let f = WallFunction::binomial_part(vec![0, 1], 1, r(1, 1));
        let p = wall_power(&f, -1, 3, None).unwrap();
        let mut want: Poly2 = BTreeMap::new();
        want.insert((0, 0), r(1, 1));
        want.insert((1, 1), r(-1, 1));
        want.insert((2, 2), r(1, 1));
        want.insert((3, 3), r(-1, 1));
        assert_eq!(p, want);
    }

    #[test]
    fn wall_power_t0_tail_needs_cap() {
        let f = WallFunction::binomial_part(vec![1, 0], 0, r(1, 1));
        assert_eq!(
            wall_power(&f, -1, 3, None),
            Err(AlgebraError::NonterminatingInverse)
        );
        let p = wall_power(&f, -1, 3, Some(2)).unwrap();
        let mut want: Poly2 = BTreeMap::new();
        want.insert((0, 0), r(1, 1));
        want.insert((1, 0), r(-1, 1));
        want.insert((2, 0), r(1, 1));
        assert_eq!(p, want);
    }

    #[test]
    fn transport_binomial_slab_example() {
        // f = (1 + z^(1,0))^2 on a wall with normal (0,1), kink 1, crossing
        // positively with z^(0,-1): pairing is -1, so the term picks up t^1
        // from the kink and f^-1.
        let base = WallFunction::binomial_part(vec![1, 0], 0, r(1, 1));
        let f = poly2_to_wall(vec![1, 0], wall_power(&base, 2, 4, None).unwrap());
        let wall = Crossing { normal: vec![0, 1], kink: 1, func: f };
        let term = Term::new(r(1, 1), vec![0, -1], 1);
        let out = transport(&term, &wall, 1, 4, Some(3)).unwrap();
        // (1+X)^-2 = 1 - 2X + 3X^2 - ... so three lowest terms:
        assert_eq!(out.coeff(&[0, -1], 2), r(1, 1));
        assert_eq!(out.coeff(&[1, -1], 2), r(-2, 1));
        assert_eq!(out.coeff(&[2, -1], 2), r(3, 1));
    }

    #[test]
    fn transport_kink_zero_example() {
        // f = 1 + t z^(-1,-1), normal (1,-1), kink 0, term z^(-1,0) t^1,
        // pairing <n,m> = -1: theta = z^(-1,0) t (1 + t z^(-1,-1))^-1.
        let f = WallFunction::binomial_part(vec![-1, -1], 1, r(1, 1));
        let wall = Crossing { normal: vec![1, -1], kink: 0, func: f };
        let term = Term::new(r(1, 1), vec![-1, 0], 1);
        let out = transport(&term, &wall, 1, 3, None).unwrap();
        assert_eq!(out.coeff(&[-1, 0], 1), r(1, 1));
        assert_eq!(out.coeff(&[-2, -1], 2), r(-1, 1));
        assert_eq!(out.coeff(&[-3, -2], 3), r(1, 1));
    }

    #[test]
    fn transport_beyond_trunc_is_empty() {
        let f = WallFunction::binomial_part(vec![1, 0], 1, r(1, 1));
        let wall = Crossing { normal: vec![0, 1], kink: 1, func: f };
        let term = Term::new(r(1, 1), vec![0, 1], 5);
        let out = transport(&term, &wall, 1, 3, None).unwrap();
        assert!(out.is_zero());
    }

    #[test]
    fn transport_round_trip_simple() {
        let f = WallFunction::binomial_part(vec![1, 1], 1, r(2, 1));
        let wall = Crossing { normal: vec![1, -1], kink: 2, func: f };
        let term = Term::new(r(5, 3), vec![3, 1], 0);
        let fwd = transport_signed(&term, &wall, 1, 6, None).unwrap();
        let mut back = Series::zero(6);
        for t in fwd.iter_terms() {
            back.add_series(&transport_signed(&t, &wall, -1, 6, None).unwrap())
                .unwrap();
        }
        let mut want = Series::zero(6);
        want.add_term(&term);
        assert_eq!(back, want);
    }
}
