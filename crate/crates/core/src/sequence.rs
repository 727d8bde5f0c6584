// Copyright 2026 The udd-echo Contributors
// SPDX-License-Identifier: Apache-2.0

//! Ideal π-pulse sequences stored as their free-evolution intervals.
//!
//! Every generator returns a [`PulseSequence`] whose intervals are strictly
//! positive and sum to the total time. Exact counterparts of the intervals
//! (cyclotomic for UDD, rational otherwise) are available through
//! [`SequenceKind::exact_intervals`].

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symbolic::{self, CyclotomicElement};

/// Raw CDD pulse lists grow as `2^(l+1)`; beyond this level they are not
/// worth materializing.
pub const MAX_CDD_LEVEL: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SequenceError {
    #[error("total time must be positive and finite, got {0}")]
    NonPositiveTime(f64),
    #[error("{kind} requires order >= {min}, got {order}")]
    InvalidOrder {
        kind: &'static str,
        order: usize,
        min: usize,
    },
    #[error("interval {index} must be positive and finite, got {value}")]
    NonPositiveInterval { index: usize, value: f64 },
    #[error("a sequence needs at least one interval")]
    Empty,
    #[error("CDD level {0} exceeds the supported maximum {MAX_CDD_LEVEL}")]
    LevelTooLarge(usize),
    #[error("unknown sequence {0:?} (expected free, hahn, udd<N>, periodic<N>, cdd<L>)")]
    UnknownKind(String),
}

/// Which generator produced a sequence, with its order parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "order", rename_all = "lowercase")]
pub enum SequenceKind {
    Free,
    Hahn,
    /// CPMG-style equal spacing with `n` pulses.
    Periodic(usize),
    /// Uhrig sequence with `n` pulses.
    Udd(usize),
    /// Concatenated sequence at the given level.
    Cdd(usize),
}

impl SequenceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SequenceKind::Free => "free",
            SequenceKind::Hahn => "hahn",
            SequenceKind::Periodic(_) => "periodic",
            SequenceKind::Udd(_) => "udd",
            SequenceKind::Cdd(_) => "cdd",
        }
    }

    /// Pulse count for Periodic/UDD, level for CDD, 1 for Hahn, 0 for Free.
    pub fn order(&self) -> usize {
        match *self {
            SequenceKind::Free => 0,
            SequenceKind::Hahn => 1,
            SequenceKind::Periodic(n) | SequenceKind::Udd(n) | SequenceKind::Cdd(n) => n,
        }
    }

    /// Parses a kind name and an order, as given on the command line.
    pub fn from_parts(name: &str, order: usize) -> Result<Self, SequenceError> {
        let kind = match name.to_ascii_lowercase().as_str() {
            "free" => SequenceKind::Free,
            "hahn" => SequenceKind::Hahn,
            "periodic" | "cpmg" => SequenceKind::Periodic(order),
            "udd" => SequenceKind::Udd(order),
            "cdd" => SequenceKind::Cdd(order),
            other => return Err(SequenceError::UnknownKind(other.to_string())),
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<(), SequenceError> {
        match *self {
            SequenceKind::Periodic(0) => Err(SequenceError::InvalidOrder {
                kind: "periodic",
                order: 0,
                min: 1,
            }),
            SequenceKind::Cdd(l) if l > MAX_CDD_LEVEL => Err(SequenceError::LevelTooLarge(l)),
            _ => Ok(()),
        }
    }

    /// Generates the sequence with total time `t`.
    pub fn build(&self, t: f64) -> Result<PulseSequence, SequenceError> {
        match *self {
            SequenceKind::Free => free_evolution(t),
            SequenceKind::Hahn => hahn(t),
            SequenceKind::Periodic(n) => periodic_intervals(n, t),
            SequenceKind::Udd(n) => udd_intervals(n, t),
            SequenceKind::Cdd(l) => cdd_intervals(l, t),
        }
    }

    /// Intervals at `t = 1` in exact arithmetic. UDD elements encode `4τ_j`.
    pub fn exact_intervals(&self) -> Result<ExactIntervals, SequenceError> {
        self.validate()?;
        let q = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        Ok(match *self {
            SequenceKind::Free | SequenceKind::Udd(0) => ExactIntervals::Rational(vec![q(1, 1)]),
            SequenceKind::Hahn => ExactIntervals::Rational(vec![q(1, 2), q(1, 2)]),
            SequenceKind::Periodic(n) => {
                let n = n as i64;
                let mut v = vec![q(1, 2 * n)];
                v.extend((1..n).map(|_| q(1, n)));
                v.push(q(1, 2 * n));
                ExactIntervals::Rational(v)
            }
            SequenceKind::Udd(n) => ExactIntervals::Cyclotomic(symbolic::udd_interval_elements(n)),
            SequenceKind::Cdd(l) => {
                let layout = cdd_layout(l);
                let denom = BigInt::one() << l;
                ExactIntervals::Rational(
                    layout
                        .interval_units()
                        .into_iter()
                        .map(|k| BigRational::new(BigInt::from(k), denom.clone()))
                        .collect(),
                )
            }
        })
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceKind::Free | SequenceKind::Hahn => write!(f, "{}", self.name()),
            other => write!(f, "{}{}", other.name(), other.order()),
        }
    }
}

impl FromStr for SequenceKind {
    type Err = SequenceError;

    /// Accepts `free`, `hahn`, and `udd3` / `udd:3` style names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        if s == "free" || s == "hahn" {
            return Self::from_parts(&s, 0);
        }
        let split = s
            .find(|c: char| c.is_ascii_digit())
            .ok_or_else(|| SequenceError::UnknownKind(s.clone()))?;
        let (name, rest) = s.split_at(split);
        let name = name.trim_end_matches([':', '-', '_']);
        let order: usize = rest
            .parse()
            .map_err(|_| SequenceError::UnknownKind(s.clone()))?;
        Self::from_parts(name, order)
    }
}

/// Exact interval lists handed to the symbolic verifier.
#[derive(Debug, Clone, PartialEq)]
pub enum ExactIntervals {
    /// `4τ_j/t` as elements of `Z[x]/(x^(n+1)+1)`.
    Cyclotomic(Vec<CyclotomicElement>),
    /// `τ_j/t`.
    Rational(Vec<BigRational>),
}

impl ExactIntervals {
    pub fn len(&self) -> usize {
        match self {
            ExactIntervals::Cyclotomic(v) => v.len(),
            ExactIntervals::Rational(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `τ_j/t` as floats.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            ExactIntervals::Cyclotomic(v) => v.iter().map(|e| e.evaluate().re / 4.0).collect(),
            ExactIntervals::Rational(v) => {
                v.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect()
            }
        }
    }
}

/// Ordered positive intervals `τ_1..τ_(n+1)` separated by `n` ideal π pulses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseSequence {
    kind: SequenceKind,
    total_time: f64,
    intervals: Vec<f64>,
    trailing_pulse: bool,
}

impl PulseSequence {
    /// Validates and wraps an interval list.
    pub fn from_intervals(
        kind: SequenceKind,
        intervals: Vec<f64>,
        trailing_pulse: bool,
    ) -> Result<Self, SequenceError> {
        if intervals.is_empty() {
            return Err(SequenceError::Empty);
        }
        if let Some((index, &value)) = intervals
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v > 0.0 && v.is_finite()))
        {
            return Err(SequenceError::NonPositiveInterval { index, value });
        }
        let total_time = intervals.iter().sum();
        Ok(Self {
            kind,
            total_time,
            intervals,
            trailing_pulse,
        })
    }

    pub fn kind(&self) -> SequenceKind {
        self.kind
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn intervals(&self) -> &[f64] {
        &self.intervals
    }

    /// Number of interior pulses `n`.
    pub fn pulse_count(&self) -> usize {
        self.intervals.len() - 1
    }

    /// Whether an uncancelled π remains at `t`. It flips the final qubit
    /// state and leaves `‖⟨W⟩‖` unchanged, so propagators ignore it.
    pub fn trailing_pulse(&self) -> bool {
        self.trailing_pulse
    }

    /// The same shape with total time `t`.
    pub fn rescaled(&self, t: f64) -> Result<Self, SequenceError> {
        check_time(t)?;
        let f = t / self.total_time;
        let intervals = self.intervals.iter().map(|x| x * f).collect();
        Self::from_intervals(self.kind, intervals, self.trailing_pulse)
    }

    /// `Σ_k s_k τ_k` with `s_k = (-1)^(k-1)`: the net static phase weight.
    pub fn signed_sum(&self) -> f64 {
        self.intervals
            .iter()
            .enumerate()
            .map(|(k, x)| if k % 2 == 0 { *x } else { -*x })
            .sum()
    }

    pub fn describe(&self) -> SequenceDescription {
        SequenceDescription {
            kind: self.kind.name(),
            order: self.kind.order(),
            total_time: self.total_time,
            pulse_count: self.pulse_count(),
            intervals: self.intervals.clone(),
            pulse_times: pulse_times(self),
            trailing_pulse: self.trailing_pulse,
        }
    }
}

/// JSON form of a sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDescription {
    pub kind: &'static str,
    pub order: usize,
    pub total_time: f64,
    pub pulse_count: usize,
    pub intervals: Vec<f64>,
    pub pulse_times: Vec<f64>,
    pub trailing_pulse: bool,
}

fn check_time(t: f64) -> Result<(), SequenceError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(SequenceError::NonPositiveTime(t))
    }
}

pub fn free_evolution(t: f64) -> Result<PulseSequence, SequenceError> {
    check_time(t)?;
    PulseSequence::from_intervals(SequenceKind::Free, vec![t], false)
}

pub fn hahn(t: f64) -> Result<PulseSequence, SequenceError> {
    check_time(t)?;
    PulseSequence::from_intervals(SequenceKind::Hahn, vec![t / 2.0, t / 2.0], false)
}

/// Uhrig intervals `τ_j = ½[cos(π(j−1)/(n+1)) − cos(πj/(n+1))]·t`.
///
/// Evaluated in the product form `sin(π/(2(n+1)))·sin(π(2j−1)/(2(n+1)))·t`,
/// which is the same quantity without the cancellation of two cosines.
pub fn udd_intervals(n: usize, t: f64) -> Result<PulseSequence, SequenceError> {
    check_time(t)?;
    let m = 2.0 * (n as f64 + 1.0);
    let edge = (PI / m).sin();
    let intervals = (1..=n + 1)
        .map(|j| t * edge * (PI * (2 * j - 1) as f64 / m).sin())
        .collect();
    PulseSequence::from_intervals(SequenceKind::Udd(n), intervals, false)
}

/// Equal spacing `(t/2n, t/n, …, t/n, t/2n)`.
pub fn periodic_intervals(n: usize, t: f64) -> Result<PulseSequence, SequenceError> {
    SequenceKind::Periodic(n).validate()?;
    check_time(t)?;
    let nf = n as f64;
    let mut intervals = vec![t / (2.0 * nf)];
    intervals.extend((1..n).map(|_| t / nf));
    intervals.push(t / (2.0 * nf));
    PulseSequence::from_intervals(SequenceKind::Periodic(n), intervals, false)
}

/// Concatenated sequence `p_l = p_(l−1) π p_(l−1) π`, `p_0 = τ`, with each
/// pair of coincident pulses removed.
pub fn cdd_intervals(level: usize, t: f64) -> Result<PulseSequence, SequenceError> {
    SequenceKind::Cdd(level).validate()?;
    check_time(t)?;
    let layout = cdd_layout(level);
    let unit = t / (1u64 << level) as f64;
    let intervals = layout
        .interval_units()
        .into_iter()
        .map(|k| k as f64 * unit)
        .collect();
    PulseSequence::from_intervals(SequenceKind::Cdd(level), intervals, layout.trailing)
}

/// CDD pulse positions in units of `t / 2^l`, after cancellation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CddLayout {
    pub level: usize,
    /// Interior pulse instants, strictly inside `(0, 2^l)`.
    pub interior: Vec<u64>,
    pub trailing: bool,
}

impl CddLayout {
    fn interval_units(&self) -> Vec<u64> {
        let end = 1u64 << self.level;
        let mut out = Vec::with_capacity(self.interior.len() + 1);
        let mut prev = 0;
        for &p in self.interior.iter().chain(std::iter::once(&end)) {
            out.push(p - prev);
            prev = p;
        }
        out
    }
}

/// Literal recursion followed by cancellation of coincident pulse pairs.
pub fn cdd_layout(level: usize) -> CddLayout {
    fn raw(level: usize) -> Vec<u64> {
        if level == 0 {
            return Vec::new();
        }
        let half = 1u64 << (level - 1);
        let inner = raw(level - 1);
        let mut out = Vec::with_capacity(2 * inner.len() + 2);
        out.extend_from_slice(&inner);
        out.push(half);
        out.extend(inner.iter().map(|p| p + half));
        out.push(2 * half);
        out
    }
    let pulses = raw(level);
    let end = 1u64 << level;
    let mut kept: Vec<u64> = Vec::with_capacity(pulses.len());
    for p in pulses {
        if kept.last() == Some(&p) {
            // two ideal π pulses at one instant compose to the identity
            kept.pop();
        } else {
            kept.push(p);
        }
    }
    let trailing = kept.last() == Some(&end);
    if trailing {
        kept.pop();
    }
    CddLayout {
        level,
        interior: kept,
        trailing,
    }
}

/// Normalized pulse instants `δ_j ∈ (0, 1]`; a trailing pulse appears as 1.
pub fn pulse_times(seq: &PulseSequence) -> Vec<f64> {
    let t = seq.total_time;
    let n = seq.pulse_count();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(n + 1);
    for x in &seq.intervals[..n] {
        acc += x;
        out.push(acc / t);
    }
    if seq.trailing_pulse {
        out.push(1.0);
    }
    out
}
