// Copyright 2026 The udd-echo Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dynamical-decoupling pulse sequences, exact certification of the
//! time-expansion orders they cancel, and echo simulations for generic
//! dephasing models and nuclear spin baths.
//!
//! - [`sequence`]: UDD, CDD, Hahn, periodic and free-evolution generators.
//! - [`symbolic`]: operator-word coefficients of `Δ = U₊ − U₋` in cyclotomic,
//!   rational and float arithmetic, and the order-by-order verifier.
//! - [`propagator`]: exact evolution of `H± = X₀ ± X₁`, echoes and
//!   fidelity-scaling fits.
//! - [`spinbath`]: central-spin spectral diffusion via pair clusters, with an
//!   exact small-bath reference.
//! - [`cli`]: the `udd-echo` command line.

pub mod cli;
pub mod fit;
pub mod propagator;
pub mod sequence;
pub mod spinbath;
pub mod symbolic;
