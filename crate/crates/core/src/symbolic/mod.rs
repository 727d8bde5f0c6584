// Copyright 2026 The udd-echo Contributors
// SPDX-License-Identifier: Apache-2.0

//! Exact and floating-point certification that a pulse sequence cancels
//! every operator-word coefficient of `Δ = U₊ − U₋` up to a given order.
//!
//! Three backends share one coefficient sweep ([`CoefficientEngine`]):
//! cyclotomic integers for UDD, exact rationals for sequences with rational
//! intervals (Hahn, periodic, CDD), and compensated floats for orders beyond
//! exact reach.

pub mod coefficient;
pub mod cyclotomic;
pub mod word;

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use coefficient::{
    coefficient_scale, word_coefficient, CoefficientEngine, CoefficientRing, CoefficientValue,
    FloatTerm,
};
pub use cyclotomic::{cyclotomic_polynomial, poly_mul, CyclotomicElement};
pub use word::OperatorWord;

use crate::sequence;

/// Default relative tolerance of the float backend.
pub const DEFAULT_FLOAT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymbolicError {
    #[error("interval index {j} out of range 1..={max}")]
    IntervalIndexOutOfRange { j: usize, max: usize },
    #[error("cyclotomic order mismatch: expected n = {expected}, found n = {found}")]
    OrderMismatch { expected: usize, found: usize },
    #[error("interval elements belong to different rings")]
    IncompatibleIntervals,
    #[error("a sequence needs at least one interval")]
    NoIntervals,
    #[error("operator words must have at least one letter")]
    EmptyWord,
    #[error("invalid operator word: {0}")]
    InvalidWord(String),
    #[error("word length {0} exceeds the prepared maximum")]
    WordTooLong(usize),
    #[error("order n must be at least 1")]
    InvalidOrder,
    #[error("cyclotomic index must be at least 1")]
    InvalidCyclotomicIndex,
    #[error("intervals must be strictly positive")]
    NonPositiveInterval,
    #[error("worker pool: {0}")]
    WorkerPool(String),
}

/// `4τ_j/t` for UDD with `n` pulses, as
/// `α^(j-1) + α^-(j-1) − α^j − α^-j`.
pub fn udd_interval_element(j: usize, n: usize) -> Result<CyclotomicElement, SymbolicError> {
    if j == 0 || j > n + 1 {
        return Err(SymbolicError::IntervalIndexOutOfRange { j, max: n + 1 });
    }
    let j = j as i64;
    let a = |k: i64| CyclotomicElement::alpha_pow(n, k);
    let plus = &a(j - 1) + &a(-(j - 1));
    let minus = &a(j) + &a(-j);
    Ok(&plus - &minus)
}

/// All UDD interval elements for `n` pulses, in time order.
pub fn udd_interval_elements(n: usize) -> Vec<CyclotomicElement> {
    (1..=n + 1)
        .map(|j| udd_interval_element(j, n).expect("index in range"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Ring {
    Cyclotomic,
    Rational,
    Float,
}

/// A nonzero coefficient found by the verifier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub word: OperatorWord,
    pub order: usize,
    /// Integerized Δ coefficient in the backend's representation.
    pub value: Vec<String>,
    /// Physical `C_word` at `t = 1`.
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum VerificationStatus {
    Certified,
    Falsified(Witness),
    Inconclusive { reached_order: usize },
}

impl VerificationStatus {
    pub fn is_certified(&self) -> bool {
        matches!(self, VerificationStatus::Certified)
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            VerificationStatus::Falsified(w) => Some(w),
            _ => None,
        }
    }
}

/// One row of the per-word listing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WordRecord {
    pub word: OperatorWord,
    pub order: usize,
    pub is_zero: bool,
    pub value: Vec<String>,
    pub numeric: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub n: usize,
    pub backend: Backend,
    pub ring: Ring,
    pub max_order_requested: usize,
    pub max_order_checked: usize,
    #[serde(flatten)]
    pub status: VerificationStatus,
    pub words_checked: u64,
    pub even_words_skipped: u64,
    pub tolerance: Option<f64>,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub words: Vec<WordRecord>,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Give up (Inconclusive) once this much wall time has passed.
    pub time_limit: Option<Duration>,
    /// Float backend relative tolerance.
    pub tolerance: f64,
    /// Keep a record of every odd-weight word.
    pub record_words: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            workers: None,
            time_limit: None,
            tolerance: DEFAULT_FLOAT_TOLERANCE,
            record_words: false,
        }
    }
}

/// Exact certification of UDD with `n` pulses through word length `max_order`.
pub fn verify_udd(n: usize, max_order: usize) -> Result<VerificationReport, SymbolicError> {
    verify_udd_with(n, max_order, &VerifyOptions::default())
}

pub fn verify_udd_with(
    n: usize,
    max_order: usize,
    opts: &VerifyOptions,
) -> Result<VerificationReport, SymbolicError> {
    if n == 0 {
        return Err(SymbolicError::InvalidOrder);
    }
    verify_intervals(
        &udd_interval_elements(n),
        max_order,
        opts,
        Backend::Exact,
        Ring::Cyclotomic,
    )
}

/// Exact certification for rational intervals (any positive values; scale
/// does not affect which coefficients vanish).
pub fn verify_sequence_rational(
    intervals: &[BigRational],
    max_order: usize,
    opts: &VerifyOptions,
) -> Result<VerificationReport, SymbolicError> {
    if intervals
        .iter()
        .any(|x| *x <= BigRational::from_integer(BigInt::from(0)))
    {
        return Err(SymbolicError::NonPositiveInterval);
    }
    verify_intervals(intervals, max_order, opts, Backend::Exact, Ring::Rational)
}

/// Float certification of UDD with relative tolerance `tolerance`.
pub fn verify_udd_float(
    n: usize,
    max_order: usize,
    tolerance: f64,
) -> Result<VerificationReport, SymbolicError> {
    if n == 0 {
        return Err(SymbolicError::InvalidOrder);
    }
    let opts = VerifyOptions {
        tolerance,
        ..VerifyOptions::default()
    };
    let seq = sequence::udd_intervals(n, 1.0).expect("t = 1 is valid");
    verify_sequence_float(seq.intervals(), max_order, &opts)
}

pub fn verify_sequence_float(
    intervals: &[f64],
    max_order: usize,
    opts: &VerifyOptions,
) -> Result<VerificationReport, SymbolicError> {
    if intervals.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(SymbolicError::NonPositiveInterval);
    }
    let terms: Vec<FloatTerm> = intervals.iter().map(|&x| FloatTerm::new(x)).collect();
    verify_intervals(&terms, max_order, opts, Backend::Float, Ring::Float)
}

enum WordOutcome {
    Done(WordRecord),
    TimedOut,
}

/// Exhaustive check of all odd-weight words of length `1..=max_order`.
///
/// Orders are visited in ascending order; the first order containing a
/// nonzero coefficient ends the run, and its lexicographically first nonzero
/// word is the witness.
pub fn verify_intervals<R: CoefficientRing>(
    intervals: &[R],
    max_order: usize,
    opts: &VerifyOptions,
    backend: Backend,
    ring: Ring,
) -> Result<VerificationReport, SymbolicError> {
    let start = Instant::now();
    let engine = CoefficientEngine::new(intervals, max_order)?;
    let run = || run_orders(&engine, max_order, opts, start);
    let (status, checked_order, words_checked, skipped, words) = match opts.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| SymbolicError::WorkerPool(e.to_string()))?
            .install(run),
        None => run(),
    };
    Ok(VerificationReport {
        n: intervals.len() - 1,
        backend,
        ring,
        max_order_requested: max_order,
        max_order_checked: checked_order,
        status,
        words_checked,
        even_words_skipped: skipped,
        tolerance: (backend == Backend::Float).then_some(opts.tolerance),
        wall_time_s: start.elapsed().as_secs_f64(),
        words: if opts.record_words { words } else { Vec::new() },
    })
}

type OrderRun = (VerificationStatus, usize, u64, u64, Vec<WordRecord>);

fn run_orders<R: CoefficientRing>(
    engine: &CoefficientEngine<R>,
    max_order: usize,
    opts: &VerifyOptions,
    start: Instant,
) -> OrderRun {
    let deadline = opts.time_limit.map(|d| start + d);
    let mut words_checked = 0u64;
    let mut skipped = 0u64;
    let mut records = Vec::new();
    for m in 1..=max_order {
        let outcomes: Vec<WordOutcome> = (0..1u64 << m)
            .into_par_iter()
            .filter_map(|idx| {
                let word = OperatorWord::from_index(m, idx);
                if !word.is_odd() {
                    return None;
                }
                if deadline.is_some_and(|d| Instant::now() > d) {
                    return Some(WordOutcome::TimedOut);
                }
                let value = engine.delta(&word).expect("word within prepared length");
                let scale = coefficient_scale::<R>(m);
                let numeric =
                    value.approx() * num_traits::ToPrimitive::to_f64(&scale).unwrap_or(f64::NAN);
                Some(WordOutcome::Done(WordRecord {
                    is_zero: value.is_negligible(opts.tolerance),
                    value: value.repr(),
                    numeric,
                    order: m,
                    word,
                }))
            })
            .collect();
        if outcomes.iter().any(|o| matches!(o, WordOutcome::TimedOut)) {
            return (
                VerificationStatus::Inconclusive {
                    reached_order: m - 1,
                },
                m - 1,
                words_checked,
                skipped,
                records,
            );
        }
        let order_records: Vec<WordRecord> = outcomes
            .into_iter()
            .map(|o| match o {
                WordOutcome::Done(r) => r,
                WordOutcome::TimedOut => unreachable!(),
            })
            .collect();
        words_checked += order_records.len() as u64;
        skipped += (1u64 << m) - order_records.len() as u64;
        let failure = order_records.iter().find(|r| !r.is_zero).cloned();
        records.extend(order_records);
        if let Some(r) = failure {
            let witness = Witness {
                word: r.word,
                order: m,
                value: r.value,
                numeric: r.numeric,
            };
            return (
                VerificationStatus::Falsified(witness),
                m,
                words_checked,
                skipped,
                records,
            );
        }
    }
    (
        VerificationStatus::Certified,
        max_order,
        words_checked,
        skipped,
        records,
    )
}
