use lsr_core::cf::{ceil_rational_power, convergents, eval_enclosure, ContinuedFraction};
use lsr_core::experiments::{sample_measure, sample_records, summarize};
use lsr_core::mat2::Matrix2;
use lsr_core::spectrum::{rho_word, trace_word};
use lsr_core::words::{word_matrix, Word};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed};
use proptest::prelude::*;

fn word_strategy() -> impl Strategy<Value = Word> {
    prop::collection::vec((1u32..4, 1u32..4), 1..4).prop_map(|b| Word::new(b).unwrap())
}

fn cf_strategy() -> impl Strategy<Value = ContinuedFraction> {
    (-5i64..5, prop::collection::vec(1i64..40, 1..25))
        .prop_map(|(a0, qs)| ContinuedFraction::from_i64(a0, &qs).unwrap())
}

proptest! {
    #[test]
    fn word_text_round_trips(w in word_strategy()) {
        let back: Word = w.to_string().parse().unwrap();
        prop_assert_eq!(back, w);
    }

    #[test]
    fn trace_is_invariant_under_block_rotation(w in word_strategy(), lambda in 0.5f64..2.0, alpha in -2.0f64..2.0, theta in 0.1f64..3.0) {
        let mut blocks = w.blocks().to_vec();
        blocks.rotate_left(1);
        let rotated = Word::new(blocks).unwrap();
        let t0 = trace_word(lambda, alpha, theta, &w).unwrap();
        let t1 = trace_word(lambda, alpha, theta, &rotated).unwrap();
        prop_assert!((t0 - t1).abs() <= 1e-9 * t0.abs().max(1.0));
        prop_assert_eq!(rho_word(lambda, alpha, theta, &w).unwrap(), t0.abs());
    }

    #[test]
    fn closed_form_matches_explicit_product(w in word_strategy(), theta in 0.1f64..3.0, alpha in -1.5f64..1.5) {
        let h = Matrix2::from_rows([[1.0, alpha], [0.0, 0.0]]);
        let (s, c) = theta.sin_cos();
        let r = Matrix2::from_rows([[c, -s], [s, c]]);
        let explicit = word_matrix(&h, &r, &w).trace();
        let closed = trace_word(1.0, alpha, theta, &w).unwrap();
        prop_assert!((explicit - closed).abs() <= 1e-9 * explicit.abs().max(1.0));
    }

    #[test]
    fn convergent_determinant_alternates(cf in cf_strategy()) {
        for k in 0..cf.depth() as isize {
            let det = cf.p(k) * cf.q(k - 1) - cf.p(k - 1) * cf.q(k);
            let want = if k % 2 == 0 { -BigInt::one() } else { BigInt::one() };
            prop_assert_eq!(det, want);
        }
    }

    #[test]
    fn enclosures_are_nested(cf in cf_strategy()) {
        let exact = cf.convergent(cf.depth());
        let mut prev = eval_enclosure(&cf, 1).unwrap();
        for d in 1..=cf.depth() {
            let enc = eval_enclosure(&cf, d).unwrap();
            prop_assert!(prev.contains_interval(&enc));
            prop_assert!(enc.contains(&exact));
            let bound = BigRational::new(BigInt::one(), cf.q(d as isize - 1) * cf.q(d as isize));
            prop_assert!(enc.width() <= bound);
            prev = enc;
        }
    }

    #[test]
    fn ceil_rational_power_is_minimal(x in 1u64..10_000, p in 1u32..9, q in 1u32..6) {
        let y = ceil_rational_power(&BigUint::from(x), p, q).unwrap();
        let target = BigUint::from(x).pow(p);
        prop_assert!(y.pow(q) >= target);
        prop_assert!((&y - 1u32).pow(q) < target);
    }

    #[test]
    fn fractions_sum_to_one(seed in any::<u64>(), samples in 1u64..40) {
        let s = sample_measure(1.0, 0.3, samples, 200, seed).unwrap();
        let total = s.attained_positive_fraction + s.zero_fraction + s.undetermined_fraction;
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert_eq!(s.argmin_histogram.values().sum::<u64>(), samples);
    }
}

#[test]
fn single_sample_fractions_are_zero_or_one() {
    for seed in 0..20 {
        let s = sample_measure(1.0, 0.0, 1, 500, seed).unwrap();
        for f in [
            s.attained_positive_fraction,
            s.zero_fraction,
            s.undetermined_fraction,
        ] {
            assert!(f == 0.0 || f == 1.0);
        }
    }
}

#[test]
fn summary_is_order_independent() {
    let mut records = sample_records(1.0, 0.0, 300, 400, 9);
    let a = summarize(1.0, 0.0, 400, 9, &records);
    records.reverse();
    assert_eq!(a, summarize(1.0, 0.0, 400, 9, &records));
}

#[test]
fn larger_truncation_never_lowers_the_attained_fraction() {
    let f: Vec<f64> = [500, 1000, 2000]
        .iter()
        .map(|&n| {
            sample_measure(1.0, 0.0, 300, n, 42)
                .unwrap()
                .attained_positive_fraction
        })
        .collect();
    assert!(f.windows(2).all(|w| w[0] <= w[1]), "{f:?}");
}

#[test]
fn expanded_rational_round_trips() {
    let x = BigRational::new(BigInt::from(-355), BigInt::from(113));
    let (a0, qs) = lsr_core::cf::fraction::expand_rational(&x);
    let cf = convergents(a0, qs).unwrap();
    assert_eq!(cf.convergent(cf.depth()), x);
    assert!(cf.quotients().iter().all(|q| q.is_positive()));
}
