// Copyright 2026 The udd-echo Contributors
// SPDX-License-Identifier: Apache-2.0

//! Exact arithmetic in `Z[x]/(x^(n+1) + 1)`.
//!
//! An element stands for a polynomial in `α = exp(iπ/(n+1))`, a primitive
//! `2(n+1)`-th root of unity. The quotient ring is not a field: distinct
//! coefficient vectors can evaluate to the same complex number, so zero is
//! decided by the remainder modulo the cyclotomic polynomial `Φ_{2(n+1)}`.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::SymbolicError;

/// Element `Σ c_k α^k`, `k = 0..=n`, with `α^(n+1) = -1`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CyclotomicElement {
    order: usize,
    coeffs: Vec<BigInt>,
}

impl CyclotomicElement {
    pub fn zero(order: usize) -> Self {
        Self {
            order,
            coeffs: vec![BigInt::zero(); order + 1],
        }
    }

    pub fn one(order: usize) -> Self {
        Self::from_integer(order, BigInt::one())
    }

    pub fn from_integer(order: usize, value: BigInt) -> Self {
        let mut out = Self::zero(order);
        out.coeffs[0] = value;
        out
    }

    /// Builds an element from raw coefficients, folding any terms of degree
    /// `> n` back with `α^(n+1) = -1`.
    pub fn from_coeffs(order: usize, coeffs: impl IntoIterator<Item = BigInt>) -> Self {
        let mut out = Self::zero(order);
        for (k, c) in coeffs.into_iter().enumerate() {
            out.add_monomial(k as i64, &c);
        }
        out
    }

    /// `α^k` for any integer `k`; negative powers use `α^(-k) = -α^(n+1-k)`.
    pub fn alpha_pow(order: usize, k: i64) -> Self {
        let mut out = Self::zero(order);
        out.add_monomial(k, &BigInt::one());
        out
    }

    fn add_monomial(&mut self, k: i64, c: &BigInt) {
        let period = 2 * (self.order as i64 + 1);
        let half = self.order as i64 + 1;
        let r = k.rem_euclid(period);
        if r < half {
            self.coeffs[r as usize] += c;
        } else {
            self.coeffs[(r - half) as usize] -= c;
        }
    }

    /// The sequence order `n`; the ring is `Z[x]/(x^(n+1)+1)`.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn scale(&self, k: &BigInt) -> Self {
        Self {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(self.order);
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self, SymbolicError> {
        self.check_order(rhs)?;
        Ok(self + rhs)
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self, SymbolicError> {
        self.check_order(rhs)?;
        Ok(self * rhs)
    }

    fn check_order(&self, rhs: &Self) -> Result<(), SymbolicError> {
        if self.order != rhs.order {
            return Err(SymbolicError::OrderMismatch {
                expected: self.order,
                found: rhs.order,
            });
        }
        Ok(())
    }

    /// Remainder modulo `Φ_{2(n+1)}`, trailing zeros stripped. This is the
    /// canonical form: two elements are equal as complex numbers iff their
    /// canonical forms agree.
    pub fn canonical(&self) -> Vec<BigInt> {
        let phi = cyclotomic_cached(2 * (self.order + 1));
        poly_rem_monic(&self.coeffs, &phi)
    }

    /// Exact zero test at `α`.
    pub fn is_zero(&self) -> bool {
        if self.coeffs.iter().all(Zero::is_zero) {
            return true;
        }
        self.canonical().is_empty()
    }

    /// `true` when the raw coefficient vector is all zeros.
    pub fn is_raw_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// Numerical value at `α = exp(iπ/(n+1))`.
    pub fn evaluate(&self) -> Complex64 {
        let theta = std::f64::consts::PI / (self.order as f64 + 1.0);
        self.evaluate_at(Complex64::from_polar(1.0, theta))
    }

    pub fn evaluate_at(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::zero(), |acc, c| {
            acc * z + c.to_f64().unwrap_or(f64::NAN)
        })
    }

    /// Largest coefficient magnitude.
    pub fn max_abs_coeff(&self) -> BigInt {
        self.coeffs
            .iter()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(BigInt::zero)
    }
}

impl fmt::Debug for CyclotomicElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cyclotomic[n={}](", self.order)?;
        for (k, c) in self.coeffs.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for CyclotomicElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}·α")?,
                _ => write!(f, "{c}·α^{k}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

// Operators panic on mismatched orders; `try_add`/`try_mul` report instead.

impl<'a> Add<&'a CyclotomicElement> for &'a CyclotomicElement {
    type Output = CyclotomicElement;

    fn add(self, rhs: &'a CyclotomicElement) -> CyclotomicElement {
        assert_eq!(self.order, rhs.order, "cyclotomic order mismatch");
        CyclotomicElement {
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl AddAssign<&CyclotomicElement> for CyclotomicElement {
    fn add_assign(&mut self, rhs: &CyclotomicElement) {
        assert_eq!(self.order, rhs.order, "cyclotomic order mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl<'a> Sub<&'a CyclotomicElement> for &'a CyclotomicElement {
    type Output = CyclotomicElement;

    fn sub(self, rhs: &'a CyclotomicElement) -> CyclotomicElement {
        assert_eq!(self.order, rhs.order, "cyclotomic order mismatch");
        CyclotomicElement {
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &CyclotomicElement {
    type Output = CyclotomicElement;

    fn neg(self) -> CyclotomicElement {
        CyclotomicElement {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl<'a> Mul<&'a CyclotomicElement> for &'a CyclotomicElement {
    type Output = CyclotomicElement;

    /// Negacyclic convolution: `x^(n+1) = -1` is applied eagerly.
    fn mul(self, rhs: &'a CyclotomicElement) -> CyclotomicElement {
        assert_eq!(self.order, rhs.order, "cyclotomic order mismatch");
        let len = self.order + 1;
        let mut coeffs = vec![BigInt::zero(); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let k = i + j;
                if k < len {
                    coeffs[k] += a * b;
                } else {
                    coeffs[k - len] -= a * b;
                }
            }
        }
        CyclotomicElement {
            order: self.order,
            coeffs,
        }
    }
}

/// Coefficients (constant term first) of the `N`-th cyclotomic polynomial,
/// built by dividing `x^N - 1` by `Φ_d` for every proper divisor `d`.
pub fn cyclotomic_polynomial(big_n: usize) -> Result<Vec<BigInt>, SymbolicError> {
    if big_n == 0 {
        return Err(SymbolicError::InvalidCyclotomicIndex);
    }
    Ok(cyclotomic_cached(big_n).as_ref().clone())
}

fn cyclotomic_cached(big_n: usize) -> Arc<Vec<BigInt>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<BigInt>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().expect("cyclotomic cache poisoned").get(&big_n) {
        return Arc::clone(hit);
    }
    // x^N - 1
    let mut poly = vec![BigInt::zero(); big_n + 1];
    poly[0] = BigInt::from(-1);
    poly[big_n] = BigInt::one();
    for d in (1..big_n).filter(|d| big_n % d == 0) {
        let divisor = cyclotomic_cached(d);
        poly = poly_div_exact_monic(&poly, &divisor);
    }
    let poly = Arc::new(poly);
    cache
        .lock()
        .expect("cyclotomic cache poisoned")
        .insert(big_n, Arc::clone(&poly));
    poly
}

/// Trims trailing zero coefficients.
pub(crate) fn poly_trim(mut p: Vec<BigInt>) -> Vec<BigInt> {
    while p.last().is_some_and(Zero::is_zero) {
        p.pop();
    }
    p
}

fn poly_divmod_monic(num: &[BigInt], den: &[BigInt]) -> (Vec<BigInt>, Vec<BigInt>) {
    let den = poly_trim(den.to_vec());
    debug_assert!(den.last().is_some_and(One::is_one), "divisor must be monic");
    let dd = den.len() - 1;
    let mut rem = poly_trim(num.to_vec());
    if rem.len() <= dd {
        return (Vec::new(), rem);
    }
    let mut quot = vec![BigInt::zero(); rem.len() - dd];
    for top in (dd..rem.len()).rev() {
        let lead = std::mem::take(&mut rem[top]);
        if lead.is_zero() {
            continue;
        }
        let shift = top - dd;
        for (k, c) in den.iter().enumerate().take(dd) {
            rem[shift + k] -= &lead * c;
        }
        quot[shift] = lead;
    }
    rem.truncate(dd);
    (poly_trim(quot), poly_trim(rem))
}

fn poly_rem_monic(num: &[BigInt], den: &[BigInt]) -> Vec<BigInt> {
    poly_divmod_monic(num, den).1
}

fn poly_div_exact_monic(num: &[BigInt], den: &[BigInt]) -> Vec<BigInt> {
    let (q, r) = poly_divmod_monic(num, den);
    debug_assert!(r.is_empty(), "inexact cyclotomic division");
    q
}

/// Product of integer polynomials (constant term first).
pub fn poly_mul(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![BigInt::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    poly_trim(out)
}
