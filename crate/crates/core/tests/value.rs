mod common;

use common::{canonical_i2, problem, rel, representative};
use switchopt::verify::{check_c1, GridSpec};
use switchopt::{build_solution, Action, CaseId, Interval, Solution, SwitchError};

fn solved(case: CaseId) -> Solution {
    let s = build_solution(&representative(case)).unwrap();
    assert_eq!(s.case, case);
    s
}

fn in_any(list: &[Interval], x: f64) -> bool {
    list.iter().any(|i| i.contains(x))
}

fn generated() -> Vec<Solution> {
    let mut rng = common::rng(31);
    (0..200)
        .map(|i| build_solution(&common::instance(CaseId::ALL[i % 8], &mut rng)).unwrap())
        .collect()
}

#[test]
fn case_i1_pieces() {
    let s = solved(CaseId::I1);
    for x in [1e-3, 0.1, 1.0, 7.0, 1e3] {
        let gap = s.eval(1, x, 0).unwrap() - s.eval(0, x, 0).unwrap();
        assert!((gap - 1.0).abs() < 1e-12);
        assert_eq!(s.optimal_action(1, x), Action::Continue);
        assert_eq!(s.optimal_action(0, x), Action::SwitchTo(1));
    }
    assert_eq!(s.regions.production, vec![Interval::all()]);
    assert_eq!(s.regions.switch_in, vec![Interval::all()]);
}

#[test]
fn canonical_i2_values_and_slopes() {
    let s = build_solution(&canonical_i2()).unwrap();
    assert!(rel(s.eval(0, 1.0, 0).unwrap(), 0.25) < 1e-12);
    assert!(rel(s.eval(0, 3.0, 0).unwrap(), 2.0) < 1e-12);
    let pieces = s.pieces(0);
    let p = s.problem();
    let left = pieces[0].eval_form(p, 2.0, 1);
    let right = pieces[1].eval_form(p, 2.0, 1);
    assert!((left - 1.0).abs() < 1e-12 && (right - 1.0).abs() < 1e-12);
    assert!((s.eval(0, 2.0 * (1.0 - 1e-12), 1).unwrap() - 1.0).abs() < 1e-9);
    assert!((s.eval(0, 2.0 * (1.0 + 1e-12), 1).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn canonical_i2_actions() {
    let s = build_solution(&canonical_i2()).unwrap();
    assert_eq!(s.optimal_action(0, 3.0), Action::SwitchTo(1));
    assert_eq!(s.optimal_action(0, 2.0), Action::SwitchTo(1));
    assert_eq!(s.optimal_action(0, 1.999), Action::Continue);
    for x in [1e-4, 1.0, 2.0, 50.0] {
        assert_eq!(s.optimal_action(1, x), Action::Continue);
    }
}

#[test]
fn case_iii2_regions() {
    let s = solved(CaseId::III2);
    let b = s.boundaries;
    let (d, g, beta, z) = (
        b.delta.unwrap(),
        b.gamma.unwrap(),
        b.beta.unwrap(),
        b.zeta.unwrap(),
    );
    assert_eq!(s.regions.abandon_open, vec![Interval::open_closed(0.0, d)]);
    assert_eq!(s.regions.switch_out, vec![Interval::closed(g, beta)]);
    assert_eq!(
        s.regions.abandon_closed,
        vec![Interval::open_closed(0.0, z)]
    );
    assert_eq!(s.optimal_action(1, d), Action::Abandon);
    assert_eq!(s.optimal_action(1, (d * g).sqrt()), Action::Continue);
    assert_eq!(s.optimal_action(1, g), Action::SwitchTo(0));
    assert_eq!(s.optimal_action(1, beta * 1.01), Action::Continue);
    assert_eq!(s.optimal_action(0, z), Action::Abandon);
}

#[test]
fn second_derivative_is_undefined_at_boundaries() {
    for case in CaseId::ALL {
        let s = solved(case);
        for z in [1u8, 0] {
            for x in s.breakpoints(z) {
                assert!(matches!(
                    s.eval(z, x, 2),
                    Err(SwitchError::UndefinedSecondDerivative(_))
                ));
                assert!(s.eval(z, x, 1).is_ok());
            }
        }
    }
}

#[test]
fn second_derivative_is_undefined_at_steps() {
    let mut d = canonical_i2();
    d.payoff = d.payoff.with_step(0.5, 5.0);
    let s = build_solution(&d).unwrap();
    assert!(matches!(
        s.eval(1, 5.0, 2),
        Err(SwitchError::UndefinedSecondDerivative(_))
    ));
    assert!(s.eval(1, 5.0 * (1.0 + 1e-9), 2).is_ok());
}

#[test]
fn eval_rejects_bad_arguments() {
    let s = build_solution(&canonical_i2()).unwrap();
    assert!(s.eval(0, 0.0, 0).is_err());
    assert!(s.eval(0, -1.0, 0).is_err());
    assert!(s.eval(0, f64::NAN, 0).is_err());
    assert!(s.eval(0, 1.0, 3).is_err());
}

#[test]
fn pieces_tile_the_half_line() {
    for case in CaseId::ALL {
        let s = solved(case);
        for z in [1u8, 0] {
            let pieces = s.pieces(z);
            assert_eq!(pieces[0].interval.lo, 0.0);
            assert!(!pieces[0].interval.lo_closed);
            assert!(pieces.last().unwrap().interval.hi.is_infinite());
            for w in pieces.windows(2) {
                let (a, b) = (w[0].interval, w[1].interval);
                assert_eq!(a.hi, b.lo, "{case}");
                assert!(
                    a.hi_closed != b.lo_closed,
                    "{case}: endpoint {} owned twice or never",
                    a.hi
                );
            }
        }
    }
}

#[test]
fn c1_pasting_on_generated_instances() {
    for s in generated() {
        for gap in check_c1(&s) {
            assert!(gap.passes(), "{}: {gap:?}", s.case);
        }
    }
}

#[test]
fn values_are_nondecreasing() {
    for s in generated() {
        let xs = GridSpec::around(&s).sample();
        for z in [1u8, 0] {
            let w: Vec<f64> = xs.iter().map(|&x| s.eval(z, x, 0).unwrap()).collect();
            for (i, pair) in w.windows(2).enumerate() {
                let slack = 1e-12 * (1.0 + pair[0].abs());
                assert!(
                    pair[1] >= pair[0] - slack,
                    "{} z={z} at {}: {pair:?}",
                    s.case,
                    xs[i]
                );
            }
        }
    }
}

#[test]
fn region_identities_hold() {
    for s in generated() {
        let costs = s.problem().costs();
        let (k1, k0, k) = (costs.open_cost, costs.close_cost, costs.abandon_cost);
        let rm = &s.regions;
        for x in GridSpec::around(&s).sample() {
            let w1 = s.eval(1, x, 0).unwrap();
            let w0 = s.eval(0, x, 0).unwrap();
            let tol = 1e-12 * (1.0 + w1.abs().max(w0.abs()));
            if in_any(&rm.switch_out, x) {
                assert!((w1 - (w0 - k0)).abs() <= tol, "{} S_out at {x}", s.case);
            }
            if in_any(&rm.switch_in, x) {
                assert!((w0 - (w1 - k1)).abs() <= tol, "{} S_in at {x}", s.case);
            }
            if in_any(&rm.abandon_open, x) {
                assert_eq!(w1, -k);
            }
            if in_any(&rm.abandon_closed, x) {
                assert_eq!(w0, -k);
            }
        }
    }
}

#[test]
fn regions_partition_the_half_line() {
    for case in CaseId::ALL {
        let s = solved(case);
        let rm = &s.regions;
        let mut xs = GridSpec::around(&s).sample();
        xs.extend(s.boundaries.named().into_iter().map(|(_, v)| v));
        for x in xs {
            let open = [&rm.production, &rm.switch_out, &rm.abandon_open]
                .iter()
                .filter(|l| in_any(l, x))
                .count();
            let closed = [&rm.waiting, &rm.switch_in, &rm.abandon_closed]
                .iter()
                .filter(|l| in_any(l, x))
                .count();
            assert_eq!((open, closed), (1, 1), "{case} at {x}");
        }
    }
}

#[test]
fn solution_json_round_trip_is_lossless() {
    for s in generated().into_iter().take(40) {
        let back = Solution::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        for x in [0.3, 1.0, 4.0] {
            assert_eq!(back.eval(0, x, 0).unwrap(), s.eval(0, x, 0).unwrap());
        }
    }
    assert!(Solution::from_json("{").is_err());
}

#[test]
fn forced_solution_on_the_wrong_case_is_still_assembled() {
    let p = problem(&canonical_i2());
    let s = switchopt::value::build_solution_forced(&p, CaseId::I1).unwrap();
    assert_eq!(s.case, CaseId::I1);
}
