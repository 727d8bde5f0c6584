// Copyright 2026 The udd-echo Contributors
// SPDX-License-Identifier: Apache-2.0

//! Exact evolution of finite dephasing models `H± = X₀ ± X₁` under ideal
//! π-pulse sequences.
//!
//! For intervals `τ_1..τ_(n+1)` and `s_k = (−1)^(k−1)`,
//!
//! ```text
//!   U± = … exp(−i H_{±s_2} τ_2) exp(−i H_{±s_1} τ_1)
//! ```
//!
//! and the echo is `v_E = |⟨U₋† U₊⟩|`. Every interval exponential comes from
//! the eigendecomposition of `H₊` or `H₋`, computed once per model.
//!
//! Small deficits `1 − v_E` are evaluated from `Δ = U₊ − U₋` through
//! `Re⟨W⟩ = 1 − ⟨Δ†Δ⟩/2`, which keeps full relative precision where the
//! direct `1 − |⟨W⟩|` would cancel to zero.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::fit::{loglog_fit, LineFit};
use crate::sequence::{PulseSequence, SequenceError, SequenceKind};

pub type CMatrix = DMatrix<Complex64>;

/// Tolerance for Hermiticity checks (max entry of `A − A†`).
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Below this, `1 − |⟨W⟩|` evaluated directly is rounding noise.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Noise floor of the deficit evaluated through `Δ`: entries of `U₊ − U₋`
/// carry an absolute error near `1e-15`, so `⟨Δ†Δ⟩/2` keeps several
/// significant digits down to about this level.
pub const DELTA_NOISE_FLOOR: f64 = 1e-24;

/// Default bound on `t_max (‖X₀‖ + ‖X₁‖)` for scaling fits.
pub const CONVERGENCE_LIMIT: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagatorError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("dimension must be at least {min}, got {dim}")]
    InvalidDimension { dim: usize, min: usize },
    #[error("bath weights must be nonnegative and sum to 1 (sum = {sum})")]
    WeightsNotNormalized { sum: f64 },
    #[error("expected {expected} bath weights, got {found}")]
    WeightsLength { expected: usize, found: usize },
    #[error(
        "all grid points have 1 - v_E below the noise floor {floor:.1e} (largest {largest:.3e}); \
         increase t_max or use a grid closer to the convergence limit"
    )]
    Underflow { floor: f64, largest: f64 },
    #[error(
        "t_max * (|X0| + |X1|) = {value:.3} exceeds {limit}; the time expansion may not converge"
    )]
    OutsideConvergenceRegion { value: f64, limit: f64 },
    #[error("time grid is empty or not strictly positive")]
    BadGrid,
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

/// A Hermitian matrix, checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    pub fn new(matrix: CMatrix) -> Result<Self, PropagatorError> {
        if !matrix.is_square() {
            return Err(PropagatorError::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        let residual = hermiticity_residual(&matrix);
        if residual > HERMITIAN_TOLERANCE {
            return Err(PropagatorError::NotHermitian { residual });
        }
        Ok(Self(matrix))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| Complex64::new(x, 0.0)));
        Self(CMatrix::from_diagonal(&d))
    }

    /// Builds from a real symmetric row-major array.
    pub fn from_real_rows(dim: usize, rows: &[f64]) -> Result<Self, PropagatorError> {
        let m = CMatrix::from_row_iterator(dim, dim, rows.iter().map(|&x| Complex64::new(x, 0.0)));
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// Largest singular value; for a Hermitian matrix, the largest `|λ|`.
    pub fn operator_norm(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.spectrum()
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn hermiticity_residual(&self) -> f64 {
        hermiticity_residual(&self.0)
    }

    pub fn spectrum(&self) -> Spectrum {
        let n = self.dim();
        if n == 0 {
            return Spectrum {
                values: Vec::new(),
                vectors: CMatrix::zeros(0, 0),
            };
        }
        let a = faer::Mat::<Complex64>::from_fn(n, n, |i, j| self.0[(i, j)]);
        let eig = a
            .self_adjoint_eigen(faer::Side::Lower)
            .expect("self-adjoint eigendecomposition converges");
        let (u, s) = (eig.U(), eig.S().column_vector());
        Spectrum {
            values: (0..n).map(|k| s[k].re).collect(),
            vectors: CMatrix::from_fn(n, n, |i, j| u[(i, j)]),
        }
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        let m = &self.0 + &other.0 * Complex64::new(sign, 0.0);
        // exact symmetrization keeps the eigen solver on Hermitian input
        Self((&m + m.adjoint()) * Complex64::new(0.5, 0.0))
    }
}

fn hermiticity_residual(m: &CMatrix) -> f64 {
    let diff = m - m.adjoint();
    diff.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Eigendecomposition `H = V diag(λ) V†`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    /// `exp(−i H τ)`.
    pub fn evolve(&self, tau: f64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            let phase = Complex64::from_polar(1.0, -self.values[j] * tau);
            col *= phase;
        }
        scaled * self.vectors.adjoint()
    }
}

/// The pair `(X₀, X₁)` defining `H± = X₀ ± X₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct DephasingModel {
    x0: HermitianOperator,
    x1: HermitianOperator,
    pub label: Option<String>,
    pub seed: Option<u64>,
}

impl DephasingModel {
    pub fn new(x0: HermitianOperator, x1: HermitianOperator) -> Result<Self, PropagatorError> {
        if x0.dim() != x1.dim() {
            return Err(PropagatorError::DimensionMismatch(x0.dim(), x1.dim()));
        }
        Ok(Self {
            x0,
            x1,
            label: None,
            seed: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.x0.dim()
    }

    pub fn x0(&self) -> &HermitianOperator {
        &self.x0
    }

    pub fn x1(&self) -> &HermitianOperator {
        &self.x1
    }

    pub fn h_plus(&self) -> HermitianOperator {
        self.x0.combine(&self.x1, 1.0)
    }

    pub fn h_minus(&self) -> HermitianOperator {
        self.x0.combine(&self.x1, -1.0)
    }

    /// `‖X₀‖ + ‖X₁‖`.
    pub fn norm_sum(&self) -> f64 {
        self.x0.operator_norm() + self.x1.operator_norm()
    }

    /// Diagonalizes `H±` once for repeated evolution.
    pub fn prepare(&self) -> PreparedModel {
        PreparedModel {
            dim: self.dim(),
            plus: self.h_plus().spectrum(),
            minus: self.h_minus().spectrum(),
        }
    }
}

/// `H±` spectra of a model.
#[derive(Debug, Clone)]
pub struct PreparedModel {
    dim: usize,
    plus: Spectrum,
    minus: Spectrum,
}

impl PreparedModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(U₊, U₋)` for the sequence. The first interval evolves under `H₊`
    /// for `U₊` and under `H₋` for `U₋`; each pulse swaps the two.
    pub fn propagators(&self, seq: &PulseSequence) -> (CMatrix, CMatrix) {
        let mut up = CMatrix::identity(self.dim, self.dim);
        let mut um = CMatrix::identity(self.dim, self.dim);
        for (k, &tau) in seq.intervals().iter().enumerate() {
            let (a, b) = if k % 2 == 0 {
                (&self.plus, &self.minus)
            } else {
                (&self.minus, &self.plus)
            };
            up = a.evolve(tau) * up;
            um = b.evolve(tau) * um;
        }
        (up, um)
    }

    /// Echo quantities for one sequence.
    pub fn echo_breakdown(
        &self,
        seq: &PulseSequence,
        state: &BathState,
    ) -> Result<EchoBreakdown, PropagatorError> {
        let weights = state.weights(self.dim)?;
        let (up, um) = self.propagators(seq);
        Ok(breakdown(&up, &um, &weights))
    }
}

/// Bath density, diagonal in the computational basis.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum BathState {
    /// Weight `1/d` on every basis state.
    #[default]
    Uniform,
    Weights(Vec<f64>),
}

impl BathState {
    pub fn weights(&self, dim: usize) -> Result<Vec<f64>, PropagatorError> {
        match self {
            BathState::Uniform => Ok(vec![1.0 / dim as f64; dim]),
            BathState::Weights(w) => {
                if w.len() != dim {
                    return Err(PropagatorError::WeightsLength {
                        expected: dim,
                        found: w.len(),
                    });
                }
                let sum: f64 = w.iter().sum();
                if w.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                    return Err(PropagatorError::WeightsNotNormalized { sum });
                }
                Ok(w.clone())
            }
        }
    }
}

/// `⟨W⟩` two ways, plus an accurate `1 − v_E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EchoBreakdown {
    /// `|⟨U₋†U₊⟩|` evaluated directly.
    pub v_e: f64,
    /// `Re⟨U₋†U₊⟩` evaluated directly.
    pub re_w: f64,
    /// `⟨Δ†Δ⟩/2`.
    pub half_delta_norm: f64,
    /// `Im⟨U₋†Δ⟩ = Im⟨W⟩`.
    pub im_w: f64,
    /// `1 − v_E` from `half_delta_norm` and `im_w`.
    pub deficit: f64,
}

impl EchoBreakdown {
    pub fn identity() -> Self {
        Self {
            v_e: 1.0,
            re_w: 1.0,
            half_delta_norm: 0.0,
            im_w: 0.0,
            deficit: 0.0,
        }
    }

    /// `ln v_E`, accurate for `v_E` near 1.
    pub fn ln_v_e(&self) -> f64 {
        log_echo(self.half_delta_norm, self.im_w)
    }
}

/// `1 − |1 − a + i b|` without cancellation.
pub fn echo_deficit_from(a: f64, b: f64) -> f64 {
    let q = (1.0 - a).powi(2) + b * b;
    (2.0 * a - a * a - b * b) / (1.0 + q.sqrt())
}

/// `ln |1 − a + i b|` without cancellation.
pub fn log_echo(a: f64, b: f64) -> f64 {
    0.5 * (-2.0 * a + a * a + b * b).ln_1p()
}

fn breakdown(up: &CMatrix, um: &CMatrix, weights: &[f64]) -> EchoBreakdown {
    let w = um.adjoint() * up;
    let delta = up - um;
    let umd = um.adjoint() * &delta;
    let mut tr_w = Complex64::new(0.0, 0.0);
    let mut dd = 0.0;
    let mut im = 0.0;
    for (i, &wt) in weights.iter().enumerate() {
        tr_w += w[(i, i)] * wt;
        dd += wt * delta.column(i).iter().map(|z| z.norm_sqr()).sum::<f64>();
        im += wt * umd[(i, i)].im;
    }
    let a = 0.5 * dd;
    EchoBreakdown {
        v_e: tr_w.norm(),
        re_w: tr_w.re,
        half_delta_norm: a,
        im_w: im,
        deficit: echo_deficit_from(a, im),
    }
}

/// `(U₊, U₋)` for one model and sequence.
pub fn sequence_propagators(model: &DephasingModel, seq: &PulseSequence) -> (CMatrix, CMatrix) {
    model.prepare().propagators(seq)
}

/// `v_E = |Tr(ρ U₋†U₊)|`.
pub fn echo(
    model: &DephasingModel,
    seq: &PulseSequence,
    state: &BathState,
) -> Result<f64, PropagatorError> {
    Ok(model.prepare().echo_breakdown(seq, state)?.v_e)
}

/// `(Re⟨W⟩, 1 − ⟨Δ†Δ⟩/2)` computed independently.
pub fn delta_check(
    model: &DephasingModel,
    seq: &PulseSequence,
    state: &BathState,
) -> Result<(f64, f64), PropagatorError> {
    let b = model.prepare().echo_breakdown(seq, state)?;
    Ok((b.re_w, 1.0 - b.half_delta_norm))
}

/// Echo at total time `t` for a sequence kind; `t = 0` is the identity.
pub fn echo_at(
    prepared: &PreparedModel,
    kind: SequenceKind,
    t: f64,
    state: &BathState,
) -> Result<EchoBreakdown, PropagatorError> {
    if t == 0.0 {
        state.weights(prepared.dim())?;
        return Ok(EchoBreakdown::identity());
    }
    let seq = kind.build(t)?;
    prepared.echo_breakdown(&seq, state)
}

/// One grid point of a scaling experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EchoSample {
    pub t: f64,
    pub v_e: f64,
    pub deficit: f64,
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    /// Fitted exponent `p` in `1 − v_E ∝ t^p`.
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub used_points: usize,
    pub samples: Vec<EchoSample>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingOptions {
    pub noise_floor: f64,
    /// Maximum allowed `t_max (‖X₀‖ + ‖X₁‖)`; `None` disables the check.
    pub convergence_limit: Option<f64>,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            noise_floor: DELTA_NOISE_FLOOR,
            convergence_limit: Some(CONVERGENCE_LIMIT),
        }
    }
}

/// Least-squares exponent of `1 − v_E` against `t` over the points above
/// the noise floor.
pub fn fidelity_scaling(
    model: &DephasingModel,
    kind: SequenceKind,
    t_grid: &[f64],
    opts: &ScalingOptions,
) -> Result<ScalingFit, PropagatorError> {
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(PropagatorError::BadGrid);
    }
    kind.validate()?;
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    if let Some(limit) = opts.convergence_limit {
        let value = t_max * model.norm_sum();
        if value > limit * (1.0 + 1e-12) {
            return Err(PropagatorError::OutsideConvergenceRegion { value, limit });
        }
    }
    let prepared = model.prepare();
    let state = BathState::Uniform;
    let mut samples = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let b = echo_at(&prepared, kind, t, &state)?;
        samples.push(EchoSample {
            t,
            v_e: b.v_e,
            deficit: b.deficit,
            used: b.deficit > opts.noise_floor,
        });
    }
    let (ts, ys): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .filter(|s| s.used)
        .map(|s| (s.t, s.deficit))
        .unzip();
    let fit: Option<LineFit> = if ts.len() >= 2 {
        loglog_fit(&ts, &ys)
    } else {
        None
    };
    let Some(fit) = fit else {
        let largest = samples.iter().map(|s| s.deficit).fold(0.0, f64::max);
        return Err(PropagatorError::Underflow {
            floor: opts.noise_floor,
            largest,
        });
    };
    Ok(ScalingFit {
        slope: fit.slope,
        intercept: fit.intercept,
        residual: fit.residual,
        used_points: fit.points,
        samples,
    })
}

/// Leading power of `1 − Re⟨W⟩ = ⟨Δ†Δ⟩/2` at small `t`.
///
/// Local exponents `p_k = log2(D(t_k)/D(t_k/2))` at `t_k = t0/2^k` carry an
/// `O(t)` bias; one Richardson step `2p_(k+1) − p_k` removes it. Returns the
/// extrapolated value from the smallest pair whose deficits stay above the
/// noise floor.
pub fn leading_order_richardson(
    model: &DephasingModel,
    kind: SequenceKind,
    t0: f64,
    halvings: usize,
) -> Result<f64, PropagatorError> {
    let prepared = model.prepare();
    let state = BathState::Uniform;
    let mut d = Vec::new();
    let mut t = t0;
    for _ in 0..halvings + 3 {
        let b = echo_at(&prepared, kind, t, &state)?;
        if !(b.half_delta_norm > DELTA_NOISE_FLOOR) {
            break;
        }
        d.push(b.half_delta_norm);
        t /= 2.0;
    }
    if d.len() < 3 {
        return Err(PropagatorError::Underflow {
            floor: DELTA_NOISE_FLOOR,
            largest: d.first().copied().unwrap_or(0.0),
        });
    }
    let p: Vec<f64> = d.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let k = p.len() - 2;
    Ok(2.0 * p[k + 1] - p[k])
}

fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize, bound: f64) -> HermitianOperator {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let h = HermitianOperator((&g + g.adjoint()) * Complex64::new(0.5, 0.0));
    let norm = h.operator_norm();
    HermitianOperator(h.0 * Complex64::new(bound / norm, 0.0))
}

/// Gaussian-random Hermitian pair with `‖X₀‖ = ‖X₁‖ = bound`, determined by
/// `seed`.
pub fn random_dephasing_model(
    dim: usize,
    seed: u64,
    bound: f64,
) -> Result<DephasingModel, PropagatorError> {
    if dim < 2 {
        return Err(PropagatorError::InvalidDimension { dim, min: 2 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = random_hermitian(&mut rng, dim, bound);
    let x1 = random_hermitian(&mut rng, dim, bound);
    let mut model = DephasingModel::new(x0, x1)?;
    model.seed = Some(seed);
    model.label = Some(format!("gaussian-d{dim}-s{seed}"));
    Ok(model)
}

/// `‖U†U − 1‖` in the operator norm.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let d = u.nrows();
    let e = u.adjoint() * u - CMatrix::identity(d, d);
    let h = HermitianOperator((&e + e.adjoint()) * Complex64::new(0.5, 0.0));
    h.operator_norm()
}
