// Copyright 2026 The udd-echo Contributors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use proptest::prelude::*;
use udd_echo::sequence::{
    cdd_intervals, cdd_layout, hahn, periodic_intervals, pulse_times, udd_intervals,
    ExactIntervals, PulseSequence, SequenceError, SequenceKind,
};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Sign of each interval, `+1` for the first.
fn signs(seq: &PulseSequence) -> Vec<f64> {
    (0..seq.intervals().len())
        .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
        .collect()
}

#[test]
fn udd_matches_cosine_difference_form() {
    for n in 1..=60 {
        let seq = udd_intervals(n, 1.0).unwrap();
        for (j, &tau) in seq.intervals().iter().enumerate() {
            let j = j as f64 + 1.0;
            let m = n as f64 + 1.0;
            let want = 0.5 * ((PI * (j - 1.0) / m).cos() - (PI * j / m).cos());
            assert!(rel(tau, want) < 1e-12, "n={n} j={j}");
        }
        for (j, &d) in pulse_times(&seq).iter().enumerate() {
            let want = (PI * (j as f64 + 1.0) / (2.0 * (n as f64 + 1.0)))
                .sin()
                .powi(2);
            assert!((d - want).abs() < 1e-14, "n={n} pulse {j}");
        }
    }
}

#[test]
fn reference_sequences_coincide() {
    let t = 1.7;
    let h = hahn(t).unwrap();
    // the float generators agree to rounding; exact equality is checked on exact intervals
    let close = |a: &PulseSequence, b: &PulseSequence| {
        a.intervals().len() == b.intervals().len()
            && a.intervals()
                .iter()
                .zip(b.intervals())
                .all(|(x, y)| rel(*x, *y) < 4.0 * f64::EPSILON)
    };
    assert!(close(&udd_intervals(1, t).unwrap(), &h));
    assert_eq!(periodic_intervals(1, t).unwrap().intervals(), h.intervals());
    assert!(close(
        &udd_intervals(2, t).unwrap(),
        &periodic_intervals(2, t).unwrap()
    ));
    let c2 = cdd_intervals(2, 1.0).unwrap();
    assert_eq!(pulse_times(&c2), [0.25, 0.75]);
    assert!(!c2.trailing_pulse());
}

#[test]
fn exact_reference_sequences_coincide() {
    let r = |k: SequenceKind| match k.exact_intervals().unwrap() {
        ExactIntervals::Rational(v) => v,
        other => panic!("{k}: {other:?}"),
    };
    assert_eq!(r(SequenceKind::Hahn), r(SequenceKind::Periodic(1)));
    assert_eq!(r(SequenceKind::Cdd(2)), r(SequenceKind::Periodic(2)));
    // UDD(1) and UDD(2) in the cyclotomic ring reduce to the same rationals
    for (n, want) in [(1, SequenceKind::Hahn), (2, SequenceKind::Periodic(2))] {
        let ExactIntervals::Cyclotomic(c) = SequenceKind::Udd(n).exact_intervals().unwrap() else {
            unreachable!()
        };
        let w = r(want);
        for (e, q) in c.iter().zip(&w) {
            let four_q = q * num_rational::BigRational::from_integer(4.into());
            let as_int = num_rational::BigRational::from_integer(e.canonical()[0].clone());
            assert!(
                e.canonical()[1..].iter().all(|x| x == &0.into()),
                "udd{n}: {e}"
            );
            assert_eq!(as_int, four_q, "udd{n}");
        }
    }
}

#[test]
fn cdd_pulse_counts_after_cancellation() {
    let expected = [
        (0, 0, false),
        (1, 1, true),
        (2, 2, false),
        (3, 5, true),
        (4, 10, false),
        (5, 21, true),
    ];
    for (level, count, trailing) in expected {
        let seq = cdd_intervals(level, 1.0).unwrap();
        assert_eq!(
            (seq.pulse_count(), seq.trailing_pulse()),
            (count, trailing),
            "level {level}"
        );
        let layout = cdd_layout(level);
        assert_eq!(layout.interior.len(), count);
    }
}

#[test]
fn cdd_toggling_function_is_thue_morse() {
    // p_l = p_(l−1) π p_(l−1) π flips the sign of the second half, so the
    // sign on unit k is (−1)^popcount(k)
    for level in 0..=12 {
        let seq = cdd_intervals(level, (1u64 << level) as f64).unwrap();
        let mut k = 0u64;
        for (x, s) in seq.intervals().iter().zip(signs(&seq)) {
            let units = x.round() as u64;
            assert!((x - units as f64).abs() < 1e-9);
            for _ in 0..units {
                let want = if k.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                assert_eq!(s, want, "level {level} unit {k}");
                k += 1;
            }
        }
        assert_eq!(k, 1 << level);
    }
}

#[test]
fn exact_and_float_intervals_agree() {
    let kinds = [
        SequenceKind::Free,
        SequenceKind::Hahn,
        SequenceKind::Periodic(5),
        SequenceKind::Cdd(4),
        SequenceKind::Udd(1),
        SequenceKind::Udd(7),
        SequenceKind::Udd(16),
    ];
    for kind in kinds {
        let exact = kind.exact_intervals().unwrap().to_f64();
        let float = kind.build(1.0).unwrap();
        assert_eq!(exact.len(), float.intervals().len(), "{kind}");
        for (a, b) in exact.iter().zip(float.intervals()) {
            assert!(rel(*a, *b) < 1e-12, "{kind}: {a} vs {b}");
        }
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(matches!(
        udd_intervals(3, 0.0),
        Err(SequenceError::NonPositiveTime(_))
    ));
    assert!(matches!(
        hahn(f64::NAN),
        Err(SequenceError::NonPositiveTime(_))
    ));
    assert!(matches!(
        periodic_intervals(0, 1.0),
        Err(SequenceError::InvalidOrder { .. })
    ));
    assert!(matches!(
        cdd_intervals(99, 1.0),
        Err(SequenceError::LevelTooLarge(99))
    ));
    assert!(matches!(
        PulseSequence::from_intervals(SequenceKind::Free, vec![1.0, -1.0], false),
        Err(SequenceError::NonPositiveInterval { index: 1, .. })
    ));
    assert!("udd".parse::<SequenceKind>().is_err());
    assert!("wobble3".parse::<SequenceKind>().is_err());
    assert_eq!(
        "UDD:4".parse::<SequenceKind>().unwrap(),
        SequenceKind::Udd(4)
    );
    assert_eq!(
        "cdd3".parse::<SequenceKind>().unwrap(),
        SequenceKind::Cdd(3)
    );
}

#[test]
fn description_serializes_every_field() {
    let seq = cdd_intervals(3, 2.0).unwrap();
    let v: serde_json::Value = serde_json::to_value(seq.describe()).unwrap();
    assert_eq!(v["kind"], "cdd");
    assert_eq!(v["order"], 3);
    assert_eq!(v["pulse_count"], 5);
    assert_eq!(v["trailing_pulse"], true);
    assert_eq!(v["intervals"].as_array().unwrap().len(), 6);
    assert_eq!(v["pulse_times"].as_array().unwrap().len(), 6);
    assert_eq!(v["total_time"], 2.0);
}

fn any_kind() -> impl Strategy<Value = SequenceKind> {
    prop_oneof![
        Just(SequenceKind::Free),
        Just(SequenceKind::Hahn),
        (1usize..=40).prop_map(SequenceKind::Udd),
        (1usize..=40).prop_map(SequenceKind::Periodic),
        (0usize..=10).prop_map(SequenceKind::Cdd),
    ]
}

proptest! {
    #[test]
    fn intervals_are_positive_and_sum_to_t(kind in any_kind(), t in 1e-6f64..1e6) {
        let seq = kind.build(t).unwrap();
        prop_assert!(seq.intervals().iter().all(|&x| x > 0.0));
        let sum: f64 = seq.intervals().iter().sum();
        prop_assert!(rel(sum, t) < 1e-13);
        prop_assert_eq!(seq.intervals().len(), seq.pulse_count() + 1);
        prop_assert_eq!(seq.kind(), kind);
    }

    #[test]
    fn udd_and_periodic_are_time_symmetric(n in 1usize..=80, t in 1e-3f64..1e3) {
        for seq in [udd_intervals(n, t).unwrap(), periodic_intervals(n, t).unwrap()] {
            let iv = seq.intervals();
            for j in 0..iv.len() {
                prop_assert!(rel(iv[j], iv[iv.len() - 1 - j]) < 1e-12);
            }
        }
    }

    #[test]
    fn rescaling_is_linear(kind in any_kind(), t in 1e-3f64..1e3, f in 1e-3f64..1e3) {
        let a = kind.build(t).unwrap().rescaled(t * f).unwrap();
        let b = kind.build(t * f).unwrap();
        for (x, y) in a.intervals().iter().zip(b.intervals()) {
            prop_assert!(rel(*x, *y) < 1e-12);
        }
        prop_assert!(rel(a.signed_sum().abs() + 1.0, b.signed_sum().abs() + 1.0) < 1e-9);
    }

    #[test]
    fn pulse_times_are_increasing_in_unit_interval(kind in any_kind()) {
        let d = pulse_times(&kind.build(3.0).unwrap());
        prop_assert!(d.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(d.iter().all(|&x| x > 0.0 && x <= 1.0 + 1e-15));
    }

    #[test]
    fn kind_names_round_trip(kind in any_kind()) {
        prop_assert_eq!(kind.to_string().parse::<SequenceKind>().unwrap(), kind);
    }
}
