// Copyright 2026 The udd-echo Contributors
// SPDX-License-Identifier: Apache-2.0

//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use astro_float::{BigFloat, Consts, RoundingMode};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use udd_echo::symbolic::{CyclotomicElement, OperatorWord};

pub const PREC: usize = 320;
pub const RM: RoundingMode = RoundingMode::ToEven;

pub fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Non-increasing assignments `k_1 ≥ … ≥ k_m` of letters to intervals
/// `0..n`, letter 0 being the latest.
pub fn assignments(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, m: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for k in (0..=max).rev() {
            cur.push(k);
            rec(n, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, m, n - 1, &mut Vec::new(), &mut out);
    }
    out
}

/// `m! / Π (multiplicity)!` for a sorted assignment.
pub fn multinomial(ks: &[usize]) -> u64 {
    let m = ks.len() as u64;
    let mut r: u64 = (1..=m).product();
    let mut i = 0;
    while i < ks.len() {
        let mut j = i;
        while j < ks.len() && ks[j] == ks[i] {
            j += 1;
        }
        r /= (1..=(j - i) as u64).product::<u64>();
        i = j;
    }
    r
}

/// `±1` contribution sign: `X₁` flips sign in intervals with odd index
/// (0-based), so with `flip_all` the sign convention of `U₋` is used.
fn sign(word: &OperatorWord, ks: &[usize], minus: bool) -> bool {
    let mut neg = false;
    for (l, &k) in word.letters().iter().zip(ks) {
        if *l == 1 && ((k % 2 == 1) != minus) {
            neg = !neg;
        }
    }
    neg
}

/// `m!` × coefficient of `word` in `U₊` (or `U₋`), by literal enumeration.
pub fn literal_rational(word: &OperatorWord, taus: &[BigRational], minus: bool) -> BigRational {
    let mut total = BigRational::zero();
    for ks in assignments(taus.len(), word.len()) {
        let mut term = BigRational::from_integer(BigInt::from(multinomial(&ks)));
        for &k in &ks {
            term *= &taus[k];
        }
        if sign(word, &ks, minus) {
            total -= term;
        } else {
            total += term;
        }
    }
    total
}

pub struct HighPrecision {
    cc: Consts,
}

impl HighPrecision {
    pub fn new() -> Self {
        Self {
            cc: Consts::new().expect("constants cache"),
        }
    }

    pub fn int(&self, k: i64) -> BigFloat {
        BigFloat::from_i64(k, PREC)
    }

    pub fn big(&mut self, k: &BigInt) -> BigFloat {
        BigFloat::parse(
            &k.to_string(),
            astro_float::Radix::Dec,
            PREC,
            RM,
            &mut self.cc,
        )
    }

    /// `cos(π k / d)`.
    pub fn cos_pi(&mut self, k: i64, d: i64) -> BigFloat {
        let pi = self.cc.pi(PREC, RM);
        let x = pi.mul(&self.int(k), PREC, RM).div(&self.int(d), PREC, RM);
        x.cos(PREC, RM, &mut self.cc)
    }

    /// UDD intervals `τ_j/t` for `n` pulses.
    pub fn udd(&mut self, n: usize) -> Vec<BigFloat> {
        let d = (n + 1) as i64;
        let half = BigFloat::from_f64(0.5, PREC);
        (1..=d)
            .map(|j| {
                self.cos_pi(j - 1, d)
                    .sub(&self.cos_pi(j, d), PREC, RM)
                    .mul(&half, PREC, RM)
            })
            .collect()
    }

    /// Real part of a cyclotomic element at `α = e^{iπ/(n+1)}`.
    pub fn eval_re(&mut self, e: &CyclotomicElement) -> BigFloat {
        let d = (e.order() + 1) as i64;
        let mut acc = self.int(0);
        for (k, c) in e.coeffs().iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let cos = self.cos_pi(k as i64, d);
            let term = self.big(c).mul(&cos, PREC, RM);
            acc = acc.add(&term, PREC, RM);
        }
        acc
    }

    /// Imaginary part of a cyclotomic element at `α`.
    pub fn eval_im(&mut self, e: &CyclotomicElement) -> BigFloat {
        let d = (e.order() + 1) as i64;
        let mut acc = self.int(0);
        let pi = self.cc.pi(PREC, RM);
        for (k, c) in e.coeffs().iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let x = pi
                .mul(&self.int(k as i64), PREC, RM)
                .div(&self.int(d), PREC, RM);
            let s = x.sin(PREC, RM, &mut self.cc);
            acc = acc.add(&self.big(c).mul(&s, PREC, RM), PREC, RM);
        }
        acc
    }

    /// `m!` × `U₊` coefficient by literal enumeration in high precision.
    pub fn literal(&self, word: &OperatorWord, taus: &[BigFloat]) -> BigFloat {
        let mut total = self.int(0);
        for ks in assignments(taus.len(), word.len()) {
            let mut term = BigFloat::from_u64(multinomial(&ks), PREC);
            for &k in &ks {
                term = term.mul(&taus[k], PREC, RM);
            }
            total = if sign(word, &ks, false) {
                total.sub(&term, PREC, RM)
            } else {
                total.add(&term, PREC, RM)
            };
        }
        total
    }

    /// `|a − b| ≤ tol · max(|b|, 1)`.
    pub fn close(&self, a: &BigFloat, b: &BigFloat, tol_exp10: i32) -> bool {
        let diff = a.sub(b, PREC, RM).abs();
        let scale = if b.abs().cmp(&self.int(1)) == Some(1) {
            b.abs()
        } else {
            self.int(1)
        };
        let tol = self.pow10(tol_exp10).mul(&scale, PREC, RM);
        diff.cmp(&tol).is_some_and(|c| c <= 0)
    }

    pub fn pow10(&self, e: i32) -> BigFloat {
        let ten = self.int(10);
        let p = ten.powi(e.unsigned_abs() as usize, PREC, RM);
        if e < 0 {
            self.int(1).div(&p, PREC, RM)
        } else {
            p
        }
    }

    /// `|a| ≤ 10^e`.
    pub fn below(&self, a: &BigFloat, e: i32) -> bool {
        a.abs().cmp(&self.pow10(e)).is_some_and(|c| c <= 0)
    }
}
