// Copyright 2026 The udd-echo Contributors
// SPDX-License-Identifier: Apache-2.0

//! Operator-word coefficients of `U₊` and `Δ = U₊ − U₋`.
//!
//! Expanding every interval exponential `exp(-i(X₀ + s_k X₁)τ_k)` and
//! collecting the word `X_{i1}···X_{im}` gives `(-i)^m / m!` times
//!
//! ```text
//!   Σ_{k1 ≥ … ≥ km}  multinomial(m; group sizes) · Π_j τ_{k_j} · Π_{j: i_j = 1} s_{k_j}
//! ```
//!
//! The multinomial factors into `Π_k binom(P_k, p_k)` where `p_k` letters are
//! taken by interval `k` and `P_k` letters have been consumed once interval
//! `k` is done, so the sum is evaluated by sweeping the intervals from latest
//! to earliest over "letters consumed so far" states. All arithmetic stays
//! in the backend ring; nothing is divided.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::cyclotomic::CyclotomicElement;
use super::word::OperatorWord;
use super::SymbolicError;

/// The operations the coefficient sweep needs from a scalar backend.
pub trait CoefficientRing: Clone + Send + Sync + fmt::Debug {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn add_assign_ref(&mut self, rhs: &Self);
    fn mul_ref(&self, rhs: &Self) -> Self;
    fn neg_ref(&self) -> Self;
    fn scale_int(&self, k: u64) -> Self;
    /// Backend zero test. Exact rings ignore the tolerance.
    fn is_negligible(&self, tolerance: f64) -> bool;
    /// Real value as a float (cyclotomic elements are evaluated at `α`).
    fn approx(&self) -> f64;
    /// Representation used in reports: coefficient vector, `p/q`, or a float.
    fn repr(&self) -> Vec<String>;
    /// Whether two elements live in the same ring.
    fn compatible(&self, _other: &Self) -> bool {
        true
    }
    /// Duration represented by one ring unit of interval, in units of `t`.
    fn interval_unit() -> BigRational {
        BigRational::one()
    }
}

impl CoefficientRing for CyclotomicElement {
    fn zero_like(&self) -> Self {
        CyclotomicElement::zero(self.order())
    }
    fn one_like(&self) -> Self {
        CyclotomicElement::one(self.order())
    }
    fn add_assign_ref(&mut self, rhs: &Self) {
        *self += rhs;
    }
    fn mul_ref(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn scale_int(&self, k: u64) -> Self {
        self.scale(&BigInt::from(k))
    }
    fn is_negligible(&self, _tolerance: f64) -> bool {
        self.is_zero()
    }
    fn approx(&self) -> f64 {
        self.evaluate().re
    }
    fn repr(&self) -> Vec<String> {
        self.coeffs().iter().map(ToString::to_string).collect()
    }
    fn compatible(&self, other: &Self) -> bool {
        self.order() == other.order()
    }
    /// UDD interval elements encode `4τ_j/t`.
    fn interval_unit() -> BigRational {
        BigRational::new(BigInt::one(), BigInt::from(4))
    }
}

impl CoefficientRing for BigRational {
    fn zero_like(&self) -> Self {
        BigRational::zero()
    }
    fn one_like(&self) -> Self {
        BigRational::one()
    }
    fn add_assign_ref(&mut self, rhs: &Self) {
        *self += rhs;
    }
    fn mul_ref(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg_ref(&self) -> Self {
        -self
    }
    fn scale_int(&self, k: u64) -> Self {
        self * BigRational::from_integer(BigInt::from(k))
    }
    fn is_negligible(&self, _tolerance: f64) -> bool {
        self.is_zero()
    }
    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
    fn repr(&self) -> Vec<String> {
        vec![self.to_string()]
    }
}

/// Float scalar with an error-free product, Neumaier-compensated sums, and
/// a running sum of absolute values of every term that went into it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloatTerm {
    sum: f64,
    comp: f64,
    abs: f64,
}

impl FloatTerm {
    pub fn new(value: f64) -> Self {
        Self {
            sum: value,
            comp: 0.0,
            abs: value.abs(),
        }
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// Sum of absolute values of all enumerated terms.
    pub fn abs_sum(&self) -> f64 {
        self.abs
    }

    fn add_f64(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }
}

impl CoefficientRing for FloatTerm {
    fn zero_like(&self) -> Self {
        FloatTerm::new(0.0)
    }
    fn one_like(&self) -> Self {
        FloatTerm::new(1.0)
    }
    fn add_assign_ref(&mut self, rhs: &Self) {
        self.add_f64(rhs.sum);
        self.add_f64(rhs.comp);
        self.abs += rhs.abs;
    }
    fn mul_ref(&self, rhs: &Self) -> Self {
        let (a, b) = (self.value(), rhs.value());
        let p = a * b;
        Self {
            sum: p,
            comp: a.mul_add(b, -p),
            abs: self.abs * rhs.abs,
        }
    }
    fn neg_ref(&self) -> Self {
        Self {
            sum: -self.sum,
            comp: -self.comp,
            abs: self.abs,
        }
    }
    fn scale_int(&self, k: u64) -> Self {
        let k = k as f64;
        let p = self.sum * k;
        Self {
            sum: p,
            comp: self.sum.mul_add(k, -p) + self.comp * k,
            abs: self.abs * k,
        }
    }
    fn is_negligible(&self, tolerance: f64) -> bool {
        self.value().abs() <= tolerance * self.abs
    }
    fn approx(&self) -> f64 {
        self.value()
    }
    fn repr(&self) -> Vec<String> {
        vec![format!("{:.16e}", self.value())]
    }
}

/// Precomputed interval powers and binomials for one interval list.
#[derive(Debug, Clone)]
pub struct CoefficientEngine<R> {
    powers: Vec<Vec<R>>,
    binom: Vec<Vec<u64>>,
    max_len: usize,
}

impl<R: CoefficientRing> CoefficientEngine<R> {
    /// Prepares words of length up to `max_len` over `intervals`, listed in
    /// time order (`intervals[0]` acts first).
    pub fn new(intervals: &[R], max_len: usize) -> Result<Self, SymbolicError> {
        let first = intervals.first().ok_or(SymbolicError::NoIntervals)?;
        if intervals.iter().any(|x| !first.compatible(x)) {
            return Err(SymbolicError::IncompatibleIntervals);
        }
        if max_len > 62 {
            return Err(SymbolicError::WordTooLong(max_len));
        }
        let powers = intervals
            .iter()
            .map(|x| {
                let mut row = Vec::with_capacity(max_len + 1);
                row.push(x.one_like());
                for p in 1..=max_len {
                    let next = row[p - 1].mul_ref(x);
                    row.push(next);
                }
                row
            })
            .collect();
        let mut binom = vec![vec![0u64; max_len + 1]; max_len + 1];
        for a in 0..=max_len {
            binom[a][0] = 1;
            for b in 1..=a {
                binom[a][b] = binom[a - 1][b - 1] + if b < a { binom[a - 1][b] } else { 0 };
            }
        }
        Ok(Self {
            powers,
            binom,
            max_len,
        })
    }

    pub fn interval_count(&self) -> usize {
        self.powers.len()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// `m!` times the coefficient of `word` in `U₊`, without the `(-i)^m`.
    pub fn uplus(&self, word: &OperatorWord) -> Result<R, SymbolicError> {
        let m = word.len();
        if m > self.max_len {
            return Err(SymbolicError::WordTooLong(m));
        }
        let letters = word.letters();
        let mut ones = vec![0usize; m + 1];
        for (j, &l) in letters.iter().enumerate() {
            ones[j + 1] = ones[j] + l as usize;
        }
        let unit = self.powers[0][0].clone();
        let mut state: Vec<Option<R>> = vec![None; m + 1];
        state[0] = Some(unit);
        for (i, pows) in self.powers.iter().enumerate().rev() {
            let flips = i % 2 == 1;
            let mut next = state.clone();
            for pos in 0..m {
                let Some(cur) = &state[pos] else { continue };
                // the earliest interval must finish the word
                let p_min = if i == 0 { m - pos } else { 1 };
                for p in p_min..=(m - pos) {
                    let mut term = cur.mul_ref(&pows[p]);
                    let b = self.binom[pos + p][p];
                    if b != 1 {
                        term = term.scale_int(b);
                    }
                    if flips && (ones[pos + p] - ones[pos]) % 2 == 1 {
                        term = term.neg_ref();
                    }
                    match &mut next[pos + p] {
                        Some(acc) => acc.add_assign_ref(&term),
                        slot => *slot = Some(term),
                    }
                }
            }
            state = next;
        }
        Ok(state[m]
            .take()
            .unwrap_or_else(|| self.powers[0][0].zero_like()))
    }

    /// `m!` times the coefficient of `word` in `Δ`: `(1 − (−1)^weight)` times
    /// the `U₊` part. Even-weight words return zero without a sweep.
    pub fn delta(&self, word: &OperatorWord) -> Result<R, SymbolicError> {
        if !word.is_odd() {
            if word.len() > self.max_len {
                return Err(SymbolicError::WordTooLong(word.len()));
            }
            return Ok(self.powers[0][0].zero_like());
        }
        Ok(self.uplus(word)?.scale_int(2))
    }
}

/// A word coefficient in integerized form: the physical `C_word` equals
/// `scale · value` evaluated at the backend's reference point.
#[derive(Debug, Clone)]
pub struct CoefficientValue<R> {
    /// Integerized `Δ` coefficient.
    pub value: R,
    /// Integerized `U₊` coefficient.
    pub uplus: R,
    /// `unit^m / m!`, with `t = 1`.
    pub scale: BigRational,
}

impl<R: CoefficientRing> CoefficientValue<R> {
    pub fn is_zero(&self, tolerance: f64) -> bool {
        self.value.is_negligible(tolerance)
    }

    /// `C_word` as a float at `t = 1`.
    pub fn physical(&self) -> f64 {
        self.value.approx() * self.scale.to_f64().unwrap_or(f64::NAN)
    }
}

/// `unit^m / m!`.
pub fn coefficient_scale<R: CoefficientRing>(m: usize) -> BigRational {
    let unit = R::interval_unit();
    let mut fact = BigInt::one();
    for k in 2..=m {
        fact *= BigInt::from(k);
    }
    let mut s = BigRational::one();
    for _ in 0..m {
        s *= &unit;
    }
    s / BigRational::from_integer(fact)
}

/// Coefficient of one word for the given interval list (time order).
pub fn word_coefficient<R: CoefficientRing>(
    word: &OperatorWord,
    intervals: &[R],
) -> Result<CoefficientValue<R>, SymbolicError> {
    let engine = CoefficientEngine::new(intervals, word.len())?;
    let uplus = engine.uplus(word)?;
    let value = if word.is_odd() {
        uplus.scale_int(2)
    } else {
        uplus.zero_like()
    };
    Ok(CoefficientValue {
        value,
        uplus,
        scale: coefficient_scale::<R>(word.len()),
    })
}

/// Converts a rational to a float term.
pub fn float_interval(x: &BigRational) -> FloatTerm {
    FloatTerm::new(x.to_f64().unwrap_or(f64::NAN))
}
