mod common;

use std::collections::BTreeMap;

use num_traits::Zero;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mgale_core::doob::{check_martingale, doob_decompose};
use mgale_core::frontend::{parse_program, parse_seed, print_program};
use mgale_core::montecarlo::{Interpreter, Moments, Num};
use mgale_core::recurrence::{extract_recurrences, lift_seed};
use mgale_core::symbolic::eval::{eval, Valuation};
use mgale_core::symbolic::parse::{parse_poly, ParseCtx};
use mgale_core::symbolic::{simplify_sum, Rational, TimeVar};

use common::{linear_program, martingale_program, mixed_program};

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn eval_at_i(p: &mgale_core::symbolic::Poly, i: i64) -> Rational {
    let params = BTreeMap::new();
    let none_p = |_: &str, _: i64| None;
    let none_s = |_: &str, _: i64, _: Option<u32>| None;
    let mut val = Valuation {
        params: &params,
        time: [(TimeVar::named("i"), i)].into_iter().collect(),
        process: &none_p,
        sample: &none_s,
        exp_as_body: false,
    };
    eval(p, &mut val).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn num_matches_rationals(a in -1000i64..1000, b in 1i64..50, c in -1000i64..1000, d in 1i64..50, e in 0u32..5) {
        let (x, y) = (Num::from_rational(&q(a, b)), Num::from_rational(&q(c, d)));
        prop_assert_eq!(x.add(&y).to_rational(), q(a, b) + q(c, d));
        prop_assert_eq!(x.sub(&y).to_rational(), q(a, b) - q(c, d));
        prop_assert_eq!(x.mul(&y).to_rational(), q(a, b) * q(c, d));
        prop_assert_eq!(x.cmp(&y), q(a, b).cmp(&q(c, d)));
        prop_assert_eq!(x.pow(e).to_rational(), num_traits::pow(q(a, b), e as usize));
        if c != 0 {
            prop_assert_eq!(x.div(&y).unwrap().to_rational(), q(a, b) / q(c, d));
        }
    }

    #[test]
    fn moments_merge_in_any_split(xs in prop::collection::vec(-50i64..50, 0..40), cut in 0usize..40) {
        let cut = cut.min(xs.len());
        let mut whole = Moments::default();
        let (mut left, mut right) = (Moments::default(), Moments::default());
        for (k, x) in xs.iter().enumerate() {
            whole.push(&q(*x, 1));
            if k < cut { left.push(&q(*x, 1)) } else { right.push(&q(*x, 1)) }
        }
        right.merge(&left);
        prop_assert_eq!(whole.sum(), right.sum());
        prop_assert_eq!(whole.sum_sq(), right.sum_sq());
        prop_assert_eq!(whole.n, right.n);
    }

    /// Closed forms agree with direct summation, including the signed
    /// convention for empty and reversed ranges.
    #[test]
    fn sum_closed_forms_evaluate_equal(lo in 0i64..4, shift in -2i64..3, c0 in -3i64..4, c1 in -3i64..4, c2 in -2i64..3, c4 in -1i64..2, i in 0i64..8) {
        let hi_text = match shift {
            0 => "i".to_string(),
            s if s > 0 => format!("i+{s}"),
            s => format!("i-{}", -s),
        };
        let text = format!("sum(j={lo}..{hi_text}, {c0} + {c1}*j + {c2}*j^2 + {c4}*j^4)");
        let p = parse_poly(&text, &ParseCtx::new()).unwrap();
        let s = simplify_sum(&p);
        prop_assert!(s.atoms().iter().all(|a| !matches!(a, mgale_core::symbolic::Atom::Sum(_))), "{}", s);
        let f = |j: i64| q(c0 + c1 * j + c2 * j * j + c4 * j.pow(4), 1);
        let hi = i + shift;
        let direct: Rational = if hi >= lo - 1 {
            (lo..=hi).map(f).sum()
        } else {
            -(hi + 1..lo).map(f).sum::<Rational>()
        };
        prop_assert_eq!(eval_at_i(&s, i), direct);
    }

    #[test]
    fn doob_output_is_a_martingale(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (src, seed) = linear_program(&mut rng);
        let prog = parse_program(&src).unwrap();
        let rs = extract_recurrences(&prog).unwrap();
        let sp = lift_seed(&rs, &parse_seed(&seed, &prog).unwrap()).unwrap();
        let form = doob_decompose(&rs, &sp).unwrap();
        prop_assert!(check_martingale(&rs, &form.mi).holds(), "{}\n{}", src, form);
    }

    #[test]
    fn doob_fixes_martingale_seeds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (src, seed) = martingale_program(&mut rng);
        let prog = parse_program(&src).unwrap();
        let rs = extract_recurrences(&prog).unwrap();
        let sp = lift_seed(&rs, &parse_seed(&seed, &prog).unwrap()).unwrap();
        prop_assume!(check_martingale(&rs, &sp.e_i).holds());
        let form = doob_decompose(&rs, &sp).unwrap();
        prop_assert_eq!(form.mi, sp.e_i);
        prop_assert_eq!(form.m0, sp.e_0);
    }

    #[test]
    fn interpreter_follows_recurrences(seed in any::<u64>(), steps in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = mixed_program(&mut rng);
        let prog = parse_program(&src).unwrap();
        let rs = extract_recurrences(&prog).unwrap();
        let interp = Interpreter::new(&prog, BTreeMap::new()).unwrap();
        let draws: Vec<_> = (0..steps).map(|_| interp.draw(&mut rng)).collect();
        prop_assert_eq!(interp.replay(&draws).unwrap(), rs.run_concrete(&BTreeMap::new(), &draws).unwrap());
    }

    #[test]
    fn printed_programs_reparse(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let src = mixed_program(&mut rng);
        let prog = parse_program(&src).unwrap();
        let again = parse_program(&print_program(&prog)).unwrap();
        prop_assert_eq!(print_program(&again), print_program(&prog));
        prop_assert_eq!(extract_recurrences(&again).unwrap(), extract_recurrences(&prog).unwrap());
    }
}

#[test]
fn empty_moments_have_zero_sum() {
    let m = Moments::default();
    assert!(m.sum().is_zero());
    assert_eq!(m.n, 0);
}
