// Copyright 2026 The udd-echo Contributors
// SPDX-License-Identifier: Apache-2.0

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use udd_echo::fit::geometric_grid;
use udd_echo::propagator::{
    echo_at, fidelity_scaling, leading_order_richardson, random_dephasing_model,
    unitarity_residual, BathState, CMatrix, DephasingModel, HermitianOperator, PropagatorError,
    ScalingOptions,
};
use udd_echo::sequence::{PulseSequence, SequenceKind};

/// `exp(−iHτ)` by Taylor series with scaling and squaring.
fn taylor_exp(h: &CMatrix, tau: f64) -> CMatrix {
    let d = h.nrows();
    let norm: f64 = h.iter().map(|z| z.norm()).sum::<f64>() * tau.abs();
    let squarings = norm.log2().ceil().max(0.0) as u32 + 2;
    let a = h * Complex64::new(0.0, -tau / f64::from(1u32 << squarings));
    let mut term = CMatrix::identity(d, d);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &a / Complex64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Literal product of interval exponentials, first interval on the right.
fn literal_propagators(model: &DephasingModel, seq: &PulseSequence) -> (CMatrix, CMatrix) {
    let (hp, hm) = (model.h_plus().into_matrix(), model.h_minus().into_matrix());
    let d = model.dim();
    let (mut up, mut um) = (CMatrix::identity(d, d), CMatrix::identity(d, d));
    for (k, &tau) in seq.intervals().iter().enumerate() {
        let (a, b) = if k % 2 == 0 { (&hp, &hm) } else { (&hm, &hp) };
        up = taylor_exp(a, tau) * up;
        um = taylor_exp(b, tau) * um;
    }
    (up, um)
}

fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn kinds() -> impl Strategy<Value = SequenceKind> {
    prop_oneof![
        Just(SequenceKind::Free),
        Just(SequenceKind::Hahn),
        (1usize..=8).prop_map(SequenceKind::Udd),
        (1usize..=8).prop_map(SequenceKind::Periodic),
        (1usize..=4).prop_map(SequenceKind::Cdd),
    ]
}

#[test]
fn propagators_match_taylor_oracle() {
    for (dim, seed) in [(2, 0), (3, 1), (4, 2), (6, 3)] {
        let model = random_dephasing_model(dim, seed, 1.3).unwrap();
        let prepared = model.prepare();
        for kind in [
            SequenceKind::Hahn,
            SequenceKind::Udd(5),
            SequenceKind::Cdd(3),
            SequenceKind::Periodic(4),
        ] {
            for t in [0.05, 0.7, 4.0] {
                let seq = kind.build(t).unwrap();
                let (up, um) = prepared.propagators(&seq);
                let (lp, lm) = literal_propagators(&model, &seq);
                assert!(max_diff(&up, &lp) < 1e-12, "{kind} d={dim} t={t}");
                assert!(max_diff(&um, &lm) < 1e-12, "{kind} d={dim} t={t}");
            }
        }
    }
}

#[test]
fn commuting_bath_has_closed_form() {
    // diagonal X₀, X₁: ⟨W⟩ = Σ_i w_i exp(−2i x1_i S), S the signed interval sum
    let x0 = [0.3, -1.1, 0.8, 0.05];
    let x1 = [0.7, -0.2, 1.4, -0.9];
    let model = DephasingModel::new(
        HermitianOperator::from_real_diagonal(&x0),
        HermitianOperator::from_real_diagonal(&x1),
    )
    .unwrap();
    let weights = vec![0.1, 0.2, 0.3, 0.4];
    let state = BathState::Weights(weights.clone());
    let prepared = model.prepare();
    for kind in [
        SequenceKind::Free,
        SequenceKind::Hahn,
        SequenceKind::Udd(3),
        SequenceKind::Cdd(3),
    ] {
        for t in [0.1, 1.0, 3.3] {
            let seq = kind.build(t).unwrap();
            let s = seq.signed_sum();
            let w: Complex64 = weights
                .iter()
                .zip(&x1)
                .map(|(p, x)| Complex64::from_polar(*p, -2.0 * x * s))
                .sum();
            let b = prepared.echo_breakdown(&seq, &state).unwrap();
            assert!((b.v_e - w.norm()).abs() < 1e-12, "{kind} t={t}");
            assert!((b.re_w - w.re).abs() < 1e-12, "{kind} t={t}");
        }
    }
}

#[test]
fn dimension_one_and_zero_time_are_trivial() {
    let model = random_dephasing_model(3, 9, 1.0).unwrap();
    let prepared = model.prepare();
    for kind in [SequenceKind::Udd(4), SequenceKind::Free] {
        let b = echo_at(&prepared, kind, 0.0, &BathState::Uniform).unwrap();
        assert_eq!((b.v_e, b.deficit, b.ln_v_e()), (1.0, 0.0, 0.0));
    }
    assert!(matches!(
        random_dephasing_model(1, 0, 1.0),
        Err(PropagatorError::InvalidDimension { .. })
    ));
    let bad = BathState::Weights(vec![0.5, 0.6, -0.1]);
    assert!(prepared
        .echo_breakdown(&SequenceKind::Hahn.build(1.0).unwrap(), &bad)
        .is_err());
}

#[test]
fn scaling_slopes_follow_sequence_order() {
    let grid = geometric_grid(0.01, 0.25, 25).unwrap();
    let model = random_dephasing_model(4, 11, 1.0).unwrap();
    for (kind, p) in [
        (SequenceKind::Free, 2.0),
        (SequenceKind::Hahn, 4.0),
        (SequenceKind::Udd(2), 6.0),
        (SequenceKind::Udd(3), 8.0),
        (SequenceKind::Periodic(3), 4.0),
        (SequenceKind::Cdd(2), 6.0),
    ] {
        let fit = fidelity_scaling(&model, kind, &grid, &ScalingOptions::default()).unwrap();
        assert!(
            (fit.slope - p).abs() < 0.05 * p,
            "{kind}: slope {}",
            fit.slope
        );
        let lead = leading_order_richardson(&model, kind, 0.2, 6).unwrap();
        assert!((lead - p).abs() < 0.02 * p, "{kind}: leading {lead}");
    }
}

#[test]
fn scaling_rejects_grids_outside_convergence() {
    let model = random_dephasing_model(4, 0, 1.0).unwrap();
    let err = fidelity_scaling(
        &model,
        SequenceKind::Hahn,
        &[0.1, 1.0],
        &ScalingOptions::default(),
    );
    assert!(matches!(
        err,
        Err(PropagatorError::OutsideConvergenceRegion { .. })
    ));
    let tiny = geometric_grid(1e-9, 1e-8, 5).unwrap();
    let err = fidelity_scaling(
        &model,
        SequenceKind::Udd(6),
        &tiny,
        &ScalingOptions::default(),
    );
    assert!(matches!(err, Err(PropagatorError::Underflow { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn propagators_are_unitary(dim in 2usize..=6, seed in 0u64..1000, kind in kinds(), t in 0.01f64..20.0) {
        let model = random_dephasing_model(dim, seed, 1.0).unwrap();
        let (up, um) = model.prepare().propagators(&kind.build(t).unwrap());
        prop_assert!(unitarity_residual(&up) < 1e-12);
        prop_assert!(unitarity_residual(&um) < 1e-12);
    }

    #[test]
    fn delta_route_matches_direct_echo(dim in 2usize..=6, seed in 0u64..1000, kind in kinds(), t in 0.01f64..5.0) {
        let model = random_dephasing_model(dim, seed, 1.0).unwrap();
        let b = model.prepare().echo_breakdown(&kind.build(t).unwrap(), &BathState::Uniform).unwrap();
        // Re⟨U₋†U₊⟩ = 1 − ⟨Δ†Δ⟩/2 for unitary U±
        prop_assert!((b.re_w - (1.0 - b.half_delta_norm)).abs() < 1e-12);
        prop_assert!((b.v_e - (1.0 - b.deficit)).abs() < 1e-12);
        prop_assert!(b.v_e <= 1.0 + 1e-12 && b.v_e >= 0.0);
        prop_assert!(b.deficit >= -1e-15 && b.deficit <= 1.0 + 1e-12);
        if b.v_e > 1e-6 {
            prop_assert!((b.ln_v_e() - b.v_e.ln()).abs() < 1e-10 / b.v_e);
        }
    }

    #[test]
    fn echo_depends_on_hamiltonian_times_time(seed in 0u64..1000, kind in kinds(), t in 0.05f64..3.0, lambda in 0.1f64..10.0) {
        let model = random_dephasing_model(3, seed, 1.0).unwrap();
        let scaled = DephasingModel::new(
            HermitianOperator::new(model.x0().matrix() * Complex64::new(lambda, 0.0)).unwrap(),
            HermitianOperator::new(model.x1().matrix() * Complex64::new(lambda, 0.0)).unwrap(),
        ).unwrap();
        let a = echo_at(&model.prepare(), kind, t, &BathState::Uniform).unwrap();
        let b = echo_at(&scaled.prepare(), kind, t / lambda, &BathState::Uniform).unwrap();
        prop_assert!((a.v_e - b.v_e).abs() < 1e-11);
    }

    #[test]
    fn no_x1_means_perfect_echo(dim in 2usize..=5, seed in 0u64..1000, kind in kinds(), t in 0.01f64..50.0) {
        let model = random_dephasing_model(dim, seed, 1.0).unwrap();
        let free = DephasingModel::new(model.x0().clone(), HermitianOperator::new(DMatrix::zeros(dim, dim)).unwrap()).unwrap();
        let b = echo_at(&free.prepare(), kind, t, &BathState::Uniform).unwrap();
        prop_assert!(b.deficit.abs() < 1e-13);
    }
}
