// Copyright 2026 The udd-echo Contributors
// SPDX-License-Identifier: Apache-2.0

//! Central-spin spectral diffusion with a spin-½ nuclear bath,
//!
//! ```text
//!   H = Σ_n A_n S_z I_nz + Σ_{n≠m} (b_nm I_n− I_m+ + c_nm I_nz I_mz),
//! ```
//!
//! so that for `S_z = ±½`, `H± = X₀ ± X₁` with `X₁ = ½ Σ_n A_n I_nz`.
//! The double sum runs over ordered pairs: an unordered pair contributes
//! `b (I_n− I_m+ + I_n+ I_m−) + 2c I_nz I_mz`.
//!
//! The echo is approximated by independent pair clusters,
//! `v_E ≈ exp(Σ_pairs Re{⟨W⟩_pair − 1})`, and checked against exact
//! evolution of the whole bath for small `N`.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::loglog_fit;
use crate::propagator::{log_echo, CMatrix, DephasingModel, HermitianOperator, PropagatorError};
use crate::sequence::{PulseSequence, SequenceError, SequenceKind};

/// Largest bath evolved exactly (`2^N`-dimensional state space).
pub const MAX_EXACT_NUCLEI: usize = 12;

/// Fraction of `Σ b²` allowed beyond the default pair cutoff.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.01;

/// `−ln v_E` below this is too flat for an exponent fit.
pub const EXPONENT_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SpinBathError {
    #[error("bath has {0} nuclei after sampling; at least 2 are required")]
    TooFewNuclei(usize),
    #[error("nuclei {0} and {1} occupy the same site")]
    CoincidentSites(usize, usize),
    #[error("invalid bath configuration: {0}")]
    InvalidConfig(String),
    #[error("coupling table is not symmetric with zero diagonal at ({0}, {1})")]
    AsymmetricCouplings(usize, usize),
    #[error("exact evolution supports at most {MAX_EXACT_NUCLEI} nuclei, bath has {0}")]
    TooLarge(usize),
    #[error("echo curve needs at least {needed} points with 0.9 < v_E and -ln v_E >= {floor:.0e}, found {found}")]
    InsufficientPoints {
        needed: usize,
        found: usize,
        floor: f64,
    },
    #[error("echo curve is too flat: -ln v_E below {floor:.0e} at every point; use larger t")]
    Underflow { floor: f64 },
    #[error(transparent)]
    Sequence(#[from] SequenceError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
}

/// Synthetic bath on a cubic lattice with a Gaussian hyperfine envelope and
/// dipolar intra-bath couplings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BathConfig {
    /// Lattice constant.
    pub lattice_spacing: f64,
    /// Sites span `-extent..=extent` along each axis.
    pub extent: u32,
    /// Probability that a site holds a nucleus.
    pub occupancy: f64,
    /// Pick exactly this many distinct sites instead of sampling occupancy.
    pub count: Option<usize>,
    /// Gaussian envelope width `w` in `A_n = A₀ exp(−|r_n|²/w²)`.
    pub envelope_width: f64,
    /// Envelope centre, in units of the lattice spacing.
    pub envelope_center: [f64; 3],
    pub hyperfine_a0: f64,
    /// `b_nm = b₀ (1 − 3cos²θ_nm) / |r_n − r_m|³`.
    pub flipflop_b0: f64,
    /// `c_nm = ising_ratio · b_nm`.
    pub ising_ratio: f64,
    pub seed: u64,
    /// Maximum pair distance; `None` picks the smallest distance leaving
    /// less than `tail_fraction` of `Σ b²` outside.
    pub pair_cutoff: Option<f64>,
    pub tail_fraction: f64,
}

impl Default for BathConfig {
    fn default() -> Self {
        Self {
            lattice_spacing: 1.0,
            extent: 4,
            occupancy: 0.5,
            count: None,
            envelope_width: 2.5,
            envelope_center: [0.0; 3],
            hyperfine_a0: 1.0,
            flipflop_b0: 0.05,
            ising_ratio: -4.0,
            seed: 1,
            pair_cutoff: None,
            tail_fraction: DEFAULT_TAIL_FRACTION,
        }
    }
}

/// Symmetric pair table with zero diagonal, packed upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    n: usize,
    data: Vec<f64>,
}

impl PairTable {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n.saturating_sub(1) / 2],
        }
    }

    fn index(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        a * (2 * self.n - a - 1) / 2 + (b - a - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.data[self.index(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert_ne!(i, j, "pair tables have zero diagonal");
        let k = self.index(i, j);
        self.data[k] = value;
    }

    /// From a full matrix, which must be symmetric with zero diagonal.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SpinBathError> {
        let n = rows.len();
        let mut t = Self::zeros(n);
        for i in 0..n {
            if rows[i].len() != n || rows[i][i] != 0.0 {
                return Err(SpinBathError::AsymmetricCouplings(i, i));
            }
            for j in i + 1..n {
                if rows[i][j] != rows[j][i] {
                    return Err(SpinBathError::AsymmetricCouplings(i, j));
                }
                t.set(i, j, rows[i][j]);
            }
        }
        Ok(t)
    }
}

/// Nuclear spin-½ bath.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinBathModel {
    positions: Vec<[f64; 3]>,
    hyperfine: Vec<f64>,
    flipflop: PairTable,
    ising: PairTable,
}

impl SpinBathModel {
    pub fn new(
        positions: Vec<[f64; 3]>,
        hyperfine: Vec<f64>,
        flipflop: PairTable,
        ising: PairTable,
    ) -> Result<Self, SpinBathError> {
        let n = hyperfine.len();
        if positions.len() != n || flipflop.n != n || ising.n != n {
            return Err(SpinBathError::InvalidConfig(format!(
                "{} positions, {} hyperfine couplings, pair tables of size {} and {}",
                positions.len(),
                n,
                flipflop.n,
                ising.n
            )));
        }
        Ok(Self {
            positions,
            hyperfine,
            flipflop,
            ising,
        })
    }

    pub fn len(&self) -> usize {
        self.hyperfine.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hyperfine.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn hyperfine(&self) -> &[f64] {
        &self.hyperfine
    }

    pub fn flipflop(&self, n: usize, m: usize) -> f64 {
        self.flipflop.get(n, m)
    }

    pub fn ising(&self, n: usize, m: usize) -> f64 {
        self.ising.get(n, m)
    }

    pub fn distance(&self, n: usize, m: usize) -> f64 {
        let (a, b) = (self.positions[n], self.positions[m]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    /// Pair clusters with `b_nm ≠ 0` and distance at most `cutoff`, sorted
    /// by `(n, m)`.
    pub fn pairs(&self, cutoff: Option<f64>) -> Vec<PairCluster> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let b = self.flipflop(i, j);
                if b == 0.0 || cutoff.is_some_and(|c| self.distance(i, j) > c) {
                    continue;
                }
                out.push(PairCluster {
                    indices: (i, j),
                    hyperfine: (self.hyperfine[i], self.hyperfine[j]),
                    flipflop: b,
                    ising: self.ising(i, j),
                });
            }
        }
        out
    }

    /// Smallest distance leaving less than `tail_fraction` of `Σ b²` beyond it.
    pub fn default_cutoff(&self, tail_fraction: f64) -> CutoffDiagnostics {
        let n = self.len();
        let mut entries: Vec<(f64, f64)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let b = self.flipflop(i, j);
                if b != 0.0 {
                    entries.push((self.distance(i, j), b * b));
                }
            }
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = entries.iter().map(|e| e.1).sum();
        let mut tail = total;
        let mut cutoff = 0.0;
        let mut within = 0;
        for (k, &(d, b2)) in entries.iter().enumerate() {
            if tail < tail_fraction * total && (k == 0 || d > entries[k - 1].0) {
                break;
            }
            tail -= b2;
            cutoff = d;
            within = k + 1;
        }
        CutoffDiagnostics {
            cutoff,
            pairs_within: within,
            pairs_total: entries.len(),
            total_b2: total,
            tail_b2_fraction: if total > 0.0 {
                tail.max(0.0) / total
            } else {
                0.0
            },
        }
    }

    /// Full-bath `X₀` and `X₁` restricted to states with `up` spins up.
    pub fn sector_model(&self, up: usize) -> DephasingModel {
        let n = self.len();
        let states: Vec<u32> = (0u32..1 << n)
            .filter(|s| s.count_ones() as usize == up)
            .collect();
        let dim = states.len();
        let mut x0 = CMatrix::zeros(dim, dim);
        let mut x1 = DVector::<f64>::zeros(dim);
        let z = |s: u32, k: usize| if s >> k & 1 == 1 { 0.5 } else { -0.5 };
        for (row, &s) in states.iter().enumerate() {
            let mut diag = 0.0;
            for i in 0..n {
                x1[row] += 0.5 * self.hyperfine[i] * z(s, i);
                for j in i + 1..n {
                    diag += 2.0 * self.ising(i, j) * z(s, i) * z(s, j);
                    let b = self.flipflop(i, j);
                    if b != 0.0 && (s >> i & 1) != (s >> j & 1) {
                        let flipped = s ^ (1 << i) ^ (1 << j);
                        let col = states.binary_search(&flipped).expect("same sector");
                        x0[(row, col)] += Complex64::new(b, 0.0);
                    }
                }
            }
            x0[(row, row)] += Complex64::new(diag, 0.0);
        }
        let x0 = HermitianOperator::new(x0).expect("symmetric by construction");
        let x1 = HermitianOperator::from_real_diagonal(x1.as_slice());
        DephasingModel::new(x0, x1).expect("equal dimensions")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffDiagnostics {
    pub cutoff: f64,
    pub pairs_within: usize,
    pub pairs_total: usize,
    pub total_b2: f64,
    pub tail_b2_fraction: f64,
}

/// Samples a bath from `config`.
pub fn build_bath(config: &BathConfig) -> Result<SpinBathModel, SpinBathError> {
    if !(config.lattice_spacing > 0.0) || !(config.envelope_width > 0.0) {
        return Err(SpinBathError::InvalidConfig(
            "lattice_spacing and envelope_width must be positive".into(),
        ));
    }
    if !(0.0..=1.0).contains(&config.occupancy) {
        return Err(SpinBathError::InvalidConfig(
            "occupancy must lie in [0, 1]".into(),
        ));
    }
    let e = config.extent as i64;
    let sites: Vec<[i64; 3]> = (-e..=e)
        .flat_map(|x| (-e..=e).flat_map(move |y| (-e..=e).map(move |z| [x, y, z])))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let chosen: Vec<[i64; 3]> = match config.count {
        Some(k) => {
            if k > sites.len() {
                return Err(SpinBathError::InvalidConfig(format!(
                    "count {k} exceeds the {} lattice sites",
                    sites.len()
                )));
            }
            let mut idx = sample(&mut rng, sites.len(), k).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| sites[i]).collect()
        }
        None => sites
            .into_iter()
            .filter(|_| rng.gen::<f64>() < config.occupancy)
            .collect(),
    };
    bath_from_sites(&chosen, config)
}

/// Couplings for explicit integer lattice sites (in units of the spacing).
pub fn bath_from_sites(
    sites: &[[i64; 3]],
    config: &BathConfig,
) -> Result<SpinBathModel, SpinBathError> {
    let n = sites.len();
    if n < 2 {
        return Err(SpinBathError::TooFewNuclei(n));
    }
    let a = config.lattice_spacing;
    let positions: Vec<[f64; 3]> = sites
        .iter()
        .map(|s| [s[0] as f64 * a, s[1] as f64 * a, s[2] as f64 * a])
        .collect();
    let w2 = config.envelope_width.powi(2);
    let o = config.envelope_center.map(|x| x * a);
    let hyperfine = positions
        .iter()
        .map(|p| {
            let r2 = (p[0] - o[0]).powi(2) + (p[1] - o[1]).powi(2) + (p[2] - o[2]).powi(2);
            config.hyperfine_a0 * (-r2 / w2).exp()
        })
        .collect();
    let mut flipflop = PairTable::zeros(n);
    let mut ising = PairTable::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let d = [
                sites[i][0] - sites[j][0],
                sites[i][1] - sites[j][1],
                sites[i][2] - sites[j][2],
            ];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if r2 == 0 {
                return Err(SpinBathError::CoincidentSites(i, j));
            }
            // (1 − 3cos²θ)/r³ = (r² − 3dz²)/r⁵; exact zero at the magic angle
            let angular = r2 - 3 * d[2] * d[2];
            let b = if angular == 0 {
                0.0
            } else {
                config.flipflop_b0 * angular as f64 / ((r2 as f64).powf(2.5) * a.powi(3))
            };
            flipflop.set(i, j, b);
            ising.set(i, j, config.ising_ratio * b);
        }
    }
    SpinBathModel::new(positions, hyperfine, flipflop, ising)
}

/// Two nuclei coupled by a nonzero flip-flop term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairCluster {
    pub indices: (usize, usize),
    pub hyperfine: (f64, f64),
    pub flipflop: f64,
    pub ising: f64,
}

impl PairCluster {
    pub fn swapped(&self) -> Self {
        Self {
            indices: (self.indices.1, self.indices.0),
            hyperfine: (self.hyperfine.1, self.hyperfine.0),
            ..*self
        }
    }

    /// The 4×4 `(X₀, X₁)` in the basis `|↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩`.
    pub fn model(&self) -> DephasingModel {
        let (an, am) = self.hyperfine;
        let (b, c) = (self.flipflop, self.ising);
        #[rustfmt::skip]
        let x0 = [
            c / 2.0, 0.0,      0.0,      0.0,
            0.0,     -c / 2.0, b,        0.0,
            0.0,     b,        -c / 2.0, 0.0,
            0.0,     0.0,      0.0,      c / 2.0,
        ];
        let x1 = [
            (an + am) / 4.0,
            (an - am) / 4.0,
            (am - an) / 4.0,
            -(an + am) / 4.0,
        ];
        DephasingModel::new(
            HermitianOperator::from_real_rows(4, &x0).expect("symmetric"),
            HermitianOperator::from_real_diagonal(&x1),
        )
        .expect("4x4")
    }
}

/// `⟨W⟩_cluster − 1` for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterContribution {
    pub indices: (usize, usize),
    #[serde(serialize_with = "ser_complex")]
    pub value: Complex64,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

type Mat2 = [[Complex64; 2]; 2];

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `exp(−i (b σx + d σz) τ)`.
fn mat2_evolve(b: f64, d: f64, tau: f64) -> Mat2 {
    let w = b.hypot(d);
    let (s, c) = (w * tau).sin_cos();
    let (sx, sz) = if w > 0.0 {
        (s * b / w, s * d / w)
    } else {
        (0.0, 0.0)
    };
    let i = Complex64::new(0.0, 1.0);
    [
        [Complex64::new(c, 0.0) - i * sz, -i * sx],
        [-i * sx, Complex64::new(c, 0.0) + i * sz],
    ]
}

/// `⟨W⟩_pair − 1` with equal weights over the four product states.
///
/// `H±` are block diagonal: `|↑↑⟩` and `|↓↓⟩` only pick up phases, and the
/// flip-flop block is `−c/2 + b σx ± δ σz` with `δ = (A_n − A_m)/4`. The
/// `−c/2` is common to `H₊` and `H₋` and drops out of `W`. The real part is
/// `−⟨Δ†Δ⟩/2`, which is never positive.
pub fn pair_contribution(cluster: &PairCluster, seq: &PulseSequence) -> ClusterContribution {
    let (an, am) = cluster.hyperfine;
    let b = cluster.flipflop;
    let delta = (an - am) / 4.0;
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut up: Mat2 = [[one, zero], [zero, one]];
    let mut um = up;
    for (k, &tau) in seq.intervals().iter().enumerate() {
        let s = if k % 2 == 0 { 1.0 } else { -1.0 };
        up = mat2_mul(&mat2_evolve(b, s * delta, tau), &up);
        um = mat2_mul(&mat2_evolve(b, -s * delta, tau), &um);
    }
    let mut dd = 0.0;
    let mut tr = zero;
    for i in 0..2 {
        for j in 0..2 {
            let d = up[i][j] - um[i][j];
            dd += d.norm_sqr();
            // (U₋†Δ)_jj = Σ_i conj(U₋_ij) Δ_ij
            tr += um[i][j].conj() * d;
        }
    }
    // |↑↑⟩ and |↓↓⟩: W = exp(∓2iσS), σ = (A_n + A_m)/4, S = Σ s_k τ_k
    let phase = (an + am) / 4.0 * seq.signed_sum();
    let ends_re = -8.0 * phase.sin().powi(2);
    let re = (-dd + ends_re) / 8.0;
    ClusterContribution {
        indices: cluster.indices,
        value: Complex64::new(re, tr.im / 4.0),
    }
}

/// Pair set of a bath, reusable across sequences and times.
#[derive(Debug, Clone)]
pub struct ClusterExpansion {
    pairs: Vec<PairCluster>,
    cutoff: Option<f64>,
}

impl ClusterExpansion {
    pub fn new(model: &SpinBathModel, cutoff: Option<f64>) -> Self {
        Self {
            pairs: model.pairs(cutoff),
            cutoff,
        }
    }

    pub fn pairs(&self) -> &[PairCluster] {
        &self.pairs
    }

    pub fn cutoff(&self) -> Option<f64> {
        self.cutoff
    }

    pub fn contributions(&self, seq: &PulseSequence) -> Vec<ClusterContribution> {
        self.pairs
            .par_iter()
            .map(|p| pair_contribution(p, seq))
            .collect()
    }

    /// `ln v_E = Σ_pairs Re{⟨W⟩_pair − 1}`, summed in pair order.
    pub fn log_echo(&self, seq: &PulseSequence) -> f64 {
        let re: Vec<f64> = self
            .pairs
            .par_iter()
            .map(|p| pair_contribution(p, seq).value.re)
            .collect();
        neumaier_sum(&re)
    }

    /// Echo curve over `times`; `t = 0` gives `v_E = 1`.
    pub fn curve(&self, kind: SequenceKind, times: &[f64]) -> Result<EchoCurve, SpinBathError> {
        times
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    return Ok(EchoPoint::new(0.0, 0.0));
                }
                let seq = kind.build(t)?;
                Ok(EchoPoint::new(t, self.log_echo(&seq)))
            })
            .collect()
    }
}

fn neumaier_sum(xs: &[f64]) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Pair-cluster echo `exp(Σ Re{⟨W⟩_pair − 1})`.
pub fn cluster_echo(model: &SpinBathModel, seq: &PulseSequence, pair_cutoff: Option<f64>) -> f64 {
    ClusterExpansion::new(model, pair_cutoff)
        .log_echo(seq)
        .exp()
}

/// `ln v_E` from exact evolution of the full bath, sector by sector in the
/// conserved total `I_z`.
pub fn exact_bath_log_echo(
    model: &SpinBathModel,
    seq: &PulseSequence,
) -> Result<f64, SpinBathError> {
    let n = model.len();
    if n > MAX_EXACT_NUCLEI {
        return Err(SpinBathError::TooLarge(n));
    }
    let sectors: Vec<(f64, f64)> = (0..=n)
        .into_par_iter()
        .map(|up| {
            let m = model.sector_model(up);
            let (u_plus, u_minus) = m.prepare().propagators(seq);
            let delta = &u_plus - &u_minus;
            let dd: f64 = delta.iter().map(|z| z.norm_sqr()).sum();
            let im = (u_minus.adjoint() * &delta).trace().im;
            (dd, im)
        })
        .collect();
    let total = (1u64 << n) as f64;
    let dd: Vec<f64> = sectors.iter().map(|s| s.0).collect();
    let im: Vec<f64> = sectors.iter().map(|s| s.1).collect();
    Ok(log_echo(
        neumaier_sum(&dd) / (2.0 * total),
        neumaier_sum(&im) / total,
    ))
}

/// `v_E = |Tr(U₋†U₊)| / 2^N` for a bath of at most [`MAX_EXACT_NUCLEI`].
pub fn exact_bath_echo(model: &SpinBathModel, seq: &PulseSequence) -> Result<f64, SpinBathError> {
    Ok(exact_bath_log_echo(model, seq)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoPoint {
    pub t: f64,
    pub v_e: f64,
    pub ln_v_e: f64,
}

impl EchoPoint {
    pub fn new(t: f64, ln_v_e: f64) -> Self {
        Self {
            t,
            v_e: ln_v_e.exp(),
            ln_v_e,
        }
    }
}

pub type EchoCurve = Vec<EchoPoint>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    /// `p` in `ln v_E ≈ −(t/T)^p`.
    pub exponent: f64,
    /// `T`.
    pub decay_time: f64,
    pub residual: f64,
    pub points: usize,
}

/// Fits `ln(−ln v_E)` against `ln t` over the points with `v_E > 0.9` and
/// `−ln v_E ≥ 1e-12`; at least five are required.
pub fn short_time_exponent(curve: &[EchoPoint]) -> Result<ExponentFit, SpinBathError> {
    const NEEDED: usize = 5;
    let high_fidelity: Vec<&EchoPoint> =
        curve.iter().filter(|p| p.t > 0.0 && p.v_e > 0.9).collect();
    let usable: Vec<&EchoPoint> = high_fidelity
        .iter()
        .copied()
        .filter(|p| -p.ln_v_e >= EXPONENT_FLOOR)
        .collect();
    if usable.is_empty() && !high_fidelity.is_empty() {
        return Err(SpinBathError::Underflow {
            floor: EXPONENT_FLOOR,
        });
    }
    if usable.len() < NEEDED {
        return Err(SpinBathError::InsufficientPoints {
            needed: NEEDED,
            found: usable.len(),
            floor: EXPONENT_FLOOR,
        });
    }
    let ts: Vec<f64> = usable.iter().map(|p| p.t).collect();
    let ys: Vec<f64> = usable.iter().map(|p| -p.ln_v_e).collect();
    let fit = loglog_fit(&ts, &ys).ok_or(SpinBathError::InsufficientPoints {
        needed: NEEDED,
        found: usable.len(),
        floor: EXPONENT_FLOOR,
    })?;
    Ok(ExponentFit {
        exponent: fit.slope,
        decay_time: (-fit.intercept / fit.slope).exp(),
        residual: fit.residual,
        points: fit.points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{hahn, udd_intervals};

    fn line_config() -> BathConfig {
        BathConfig {
            flipflop_b0: 0.05,
            ..BathConfig::default()
        }
    }

    #[test]
    fn pair_table_roundtrip() {
        let mut t = PairTable::zeros(4);
        t.set(1, 3, 2.5);
        t.set(2, 0, -1.0);
        assert_eq!(t.get(3, 1), 2.5);
        assert_eq!(t.get(0, 2), -1.0);
        assert_eq!(t.get(2, 2), 0.0);
        assert_eq!(t.get(0, 1), 0.0);
        assert!(PairTable::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(PairTable::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).is_err());
    }

    #[test]
    fn symmetric_sites_share_hyperfine() {
        let bath = bath_from_sites(&[[-2, 0, 0], [2, 0, 0]], &line_config()).unwrap();
        assert_eq!(bath.hyperfine()[0], bath.hyperfine()[1]);
    }

    #[test]
    fn magic_angle_pair_is_excluded() {
        let bath = bath_from_sites(&[[0, 0, 0], [1, 1, 1], [0, 0, 1]], &line_config()).unwrap();
        assert_eq!(bath.flipflop(0, 1), 0.0);
        assert_eq!(bath.ising(0, 1), 0.0);
        assert!(bath.pairs(None).iter().all(|p| p.indices != (0, 1)));
        // along z: 1 − 3 = −2
        assert!((bath.flipflop(0, 2) + 2.0 * 0.05).abs() < 1e-15);
        assert_eq!(bath.ising(0, 2), -4.0 * bath.flipflop(0, 2));
    }

    #[test]
    fn coincident_and_tiny_baths_rejected() {
        assert!(matches!(
            bath_from_sites(&[[0, 0, 0], [0, 0, 0]], &line_config()),
            Err(SpinBathError::CoincidentSites(0, 1))
        ));
        assert!(matches!(
            bath_from_sites(&[[0, 0, 0]], &line_config()),
            Err(SpinBathError::TooFewNuclei(1))
        ));
        let cfg = BathConfig {
            occupancy: 0.0,
            ..BathConfig::default()
        };
        assert!(matches!(
            build_bath(&cfg),
            Err(SpinBathError::TooFewNuclei(0))
        ));
    }

    #[test]
    fn seeded_bath_is_reproducible() {
        let cfg = BathConfig::default();
        assert_eq!(build_bath(&cfg).unwrap(), build_bath(&cfg).unwrap());
        let other = BathConfig {
            seed: 2,
            ..cfg.clone()
        };
        assert_ne!(build_bath(&cfg).unwrap(), build_bath(&other).unwrap());
        let counted = BathConfig {
            count: Some(6),
            ..cfg
        };
        assert_eq!(build_bath(&counted).unwrap().len(), 6);
    }

    #[test]
    fn commuting_pairs_give_zero() {
        let base = PairCluster {
            indices: (0, 1),
            hyperfine: (0.7, 0.7),
            flipflop: 0.3,
            ising: -1.2,
        };
        let seq = udd_intervals(3, 2.0).unwrap();
        assert!(pair_contribution(&base, &seq).value.norm() < 1e-15);
        let no_ff = PairCluster {
            hyperfine: (0.7, 0.2),
            flipflop: 0.0,
            ..base
        };
        assert!(pair_contribution(&no_ff, &hahn(2.0).unwrap()).value.norm() < 1e-15);
    }

    #[test]
    fn fast_pair_matches_four_by_four() {
        let p = PairCluster {
            indices: (3, 8),
            hyperfine: (0.9, 0.35),
            flipflop: 0.12,
            ising: -0.48,
        };
        for kind in [
            SequenceKind::Hahn,
            SequenceKind::Udd(3),
            SequenceKind::Free,
            SequenceKind::Cdd(3),
        ] {
            let seq = kind.build(1.7).unwrap();
            let fast = pair_contribution(&p, &seq).value;
            let (up, um) = p.model().prepare().propagators(&seq);
            let w = (um.adjoint() * up).trace() / Complex64::new(4.0, 0.0);
            let slow = w - Complex64::new(1.0, 0.0);
            assert!((fast - slow).norm() < 1e-13, "{kind}: {fast} vs {slow}");
        }
    }

    #[test]
    fn exponent_fit_errors() {
        let flat: EchoCurve = (1..=6).map(|k| EchoPoint::new(k as f64, -1e-15)).collect();
        assert!(matches!(
            short_time_exponent(&flat),
            Err(SpinBathError::Underflow { .. })
        ));
        let short: EchoCurve = (1..=3).map(|k| EchoPoint::new(k as f64, -1e-3)).collect();
        assert!(matches!(
            short_time_exponent(&short),
            Err(SpinBathError::InsufficientPoints { found: 3, .. })
        ));
    }

    #[test]
    fn exact_rejects_large_baths() {
        let cfg = BathConfig {
            count: Some(MAX_EXACT_NUCLEI + 1),
            ..BathConfig::default()
        };
        let bath = build_bath(&cfg).unwrap();
        assert!(matches!(
            exact_bath_echo(&bath, &hahn(1.0).unwrap()),
            Err(SpinBathError::TooLarge(13))
        ));
    }

    #[test]
    fn default_cutoff_keeps_most_of_b_squared() {
        let bath = build_bath(&BathConfig::default()).unwrap();
        let d = bath.default_cutoff(DEFAULT_TAIL_FRACTION);
        assert!(d.tail_b2_fraction < DEFAULT_TAIL_FRACTION);
        assert!(d.pairs_within < d.pairs_total);
        assert!(d.cutoff > 0.0);
    }
}
