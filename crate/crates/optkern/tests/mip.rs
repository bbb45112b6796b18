use optkern::{solve_mip, CallbackAction, Constraint, LinearProgram, MipOptions, MipProblem, MipStatus, Sense};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn knapsack(values: &[f64], weights: &[f64], cap: f64) -> MipProblem {
    let mut mip = MipProblem::new(LinearProgram::new(Sense::Maximize));
    let vars: Vec<_> = values.iter().enumerate().map(|(i, &v)| mip.add_binary(format!("x{i}"), v)).collect();
    let row = vars.iter().zip(weights).map(|(&v, &w)| (v, w)).collect();
    mip.lp.add_constraint(Constraint::le(row, cap));
    mip
}

fn enumerate(values: &[f64], weights: &[f64], cap: f64) -> f64 {
    let n = values.len();
    (0u32..1 << n)
        .filter_map(|mask| {
            let (mut v, mut w) = (0.0, 0.0);
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    v += values[i];
                    w += weights[i];
                }
            }
            (w <= cap + 1e-9).then_some(v)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn two_item_knapsack() {
    let mip = knapsack(&[3.0, 4.0], &[2.0, 3.0], 3.0);
    let res = solve_mip(&mip, &MipOptions::default(), None).unwrap();
    assert_eq!(res.status, MipStatus::Optimal);
    assert!((res.objective.unwrap() - 4.0).abs() < 1e-9);
}

#[test]
fn lazy_cut_excludes_second_item() {
    let mip = knapsack(&[3.0, 4.0], &[2.0, 3.0], 3.0);
    let x2 = optkern::VarId(1);
    let mut seen = 0;
    let mut cb = |c: &[f64]| {
        seen += 1;
        if c[1] > 0.5 {
            CallbackAction::AddCuts(vec![Constraint::le(vec![(x2, 1.0)], 0.0)])
        } else {
            CallbackAction::Accept
        }
    };
    let res = solve_mip(&mip, &MipOptions::default(), Some(&mut cb)).unwrap();
    assert!((res.objective.unwrap() - 3.0).abs() < 1e-9);
    assert_eq!(res.stats.lazy_cuts, 1);
    assert!(seen >= 2);
    assert_eq!(res.incumbent.unwrap()[1], 0.0);
}

#[test]
fn unviolated_cut_is_an_error() {
    let mip = knapsack(&[3.0, 4.0], &[2.0, 3.0], 3.0);
    let mut cb = |_: &[f64]| CallbackAction::AddCuts(vec![Constraint::le(vec![(optkern::VarId(0), 1.0)], 5.0)]);
    assert!(matches!(
        solve_mip(&mip, &MipOptions::default(), Some(&mut cb)),
        Err(optkern::KernelError::CutNotViolated { .. })
    ));
}

#[test]
fn infeasible_mip() {
    let mut mip = MipProblem::new(LinearProgram::new(Sense::Minimize));
    let a = mip.add_binary("a", 1.0);
    let b = mip.add_binary("b", 1.0);
    mip.lp.add_constraint(Constraint::eq(vec![(a, 2.0), (b, 2.0)], 1.0));
    let res = solve_mip(&mip, &MipOptions::default(), None).unwrap();
    assert_eq!(res.status, MipStatus::Infeasible);
    assert!(res.incumbent.is_none());
}

#[test]
fn cutoff_hides_worse_solutions() {
    let mip = knapsack(&[3.0, 4.0], &[2.0, 3.0], 3.0);
    let opts = MipOptions { cutoff: Some(4.0), ..Default::default() };
    let res = solve_mip(&mip, &opts, None).unwrap();
    assert_eq!(res.status, MipStatus::Infeasible);
    let opts = MipOptions { cutoff: Some(3.5), ..Default::default() };
    let res = solve_mip(&mip, &opts, None).unwrap();
    assert!((res.objective.unwrap() - 4.0).abs() < 1e-9);
}

#[test]
fn node_limit_reports_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 25;
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(10..60) as f64).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(10..60) as f64).collect();
    let cap = w.iter().sum::<f64>() / 2.0 + 0.5;
    let mip = knapsack(&v, &w, cap);
    let opts = MipOptions { node_limit: Some(3), ..Default::default() };
    let res = solve_mip(&mip, &opts, None).unwrap();
    assert_eq!(res.status, MipStatus::NodeLimit);
    if let Some(obj) = res.objective {
        assert!(res.bound >= obj - 1e-9);
    }
}

#[test]
fn continuous_variables_mix_with_binaries() {
    // min 5y + z  s.t. z >= 2.5 - 3y, z >= 0, y binary  ->  y = 0, z = 2.5.
    let mut mip = MipProblem::new(LinearProgram::new(Sense::Minimize));
    let y = mip.add_binary("y", 5.0);
    let z = mip.lp.add_var("z", 0.0, f64::INFINITY, 1.0);
    mip.lp.add_constraint(Constraint::ge(vec![(z, 1.0), (y, 3.0)], 2.5));
    let res = solve_mip(&mip, &MipOptions::default(), None).unwrap();
    assert!((res.objective.unwrap() - 2.5).abs() < 1e-9);
}

fn items() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..13).prop_flat_map(|n| {
        (proptest::collection::vec(1u32..40, n), proptest::collection::vec(1u32..40, n), 0u32..100).prop_map(
            |(v, w, pct)| {
                let total: u32 = w.iter().sum();
                let cap = (total * pct / 100) as f64;
                (v.into_iter().map(f64::from).collect(), w.into_iter().map(f64::from).collect(), cap)
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn knapsack_matches_enumeration((v, w, cap) in items()) {
        let res = solve_mip(&knapsack(&v, &w, cap), &MipOptions::default(), None).unwrap();
        prop_assert_eq!(res.status, MipStatus::Optimal);
        prop_assert!((res.objective.unwrap() - enumerate(&v, &w, cap)).abs() < 1e-6);
    }

    #[test]
    fn accepting_callback_is_neutral((v, w, cap) in items()) {
        let mip = knapsack(&v, &w, cap);
        let plain = solve_mip(&mip, &MipOptions::default(), None).unwrap();
        let mut cb = |_: &[f64]| CallbackAction::Accept;
        let with = solve_mip(&mip, &MipOptions::default(), Some(&mut cb)).unwrap();
        prop_assert!((plain.objective.unwrap() - with.objective.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn bound_trace_is_monotone((v, w, cap) in items()) {
        let opts = MipOptions { record_trace: true, ..Default::default() };
        let res = solve_mip(&knapsack(&v, &w, cap), &opts, None).unwrap();
        let mut prev_bound = f64::INFINITY;
        let mut prev_inc = f64::NEG_INFINITY;
        for p in &res.stats.trace {
            prop_assert!(p.bound <= prev_bound + 1e-9);
            if let Some(i) = p.incumbent {
                prop_assert!(i >= prev_inc - 1e-9);
                prop_assert!(p.bound >= i - 1e-9);
                prev_inc = i;
            }
            prev_bound = p.bound;
        }
    }

    #[test]
    fn lazy_no_good_cuts_find_second_best((v, w, cap) in items()) {
        // Forbidding the optimum one solution at a time must reproduce enumeration order.
        let mip = knapsack(&v, &w, cap);
        let best = solve_mip(&mip, &MipOptions::default(), None).unwrap();
        let star = best.incumbent.unwrap();
        let n = v.len();
        let mut cb = |c: &[f64]| {
            if c.iter().zip(&star).all(|(a, b)| (a - b).abs() < 0.5) {
                let ones = star.iter().filter(|&&s| s > 0.5).count() as f64;
                let row = (0..n).map(|j| (optkern::VarId(j), if star[j] > 0.5 { 1.0 } else { -1.0 })).collect();
                CallbackAction::AddCuts(vec![Constraint::le(row, ones - 1.0)])
            } else {
                CallbackAction::Accept
            }
        };
        let res = solve_mip(&mip, &MipOptions::default(), Some(&mut cb)).unwrap();
        let mut vals: Vec<f64> = (0u32..1 << n).filter_map(|mask| {
            let sel: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let wt: f64 = (0..n).filter(|&i| sel[i]).map(|i| w[i]).sum();
            let same = (0..n).all(|i| sel[i] == (star[i] > 0.5));
            (wt <= cap + 1e-9 && !same).then(|| (0..n).filter(|&i| sel[i]).map(|i| v[i]).sum())
        }).collect();
        vals.sort_by(f64::total_cmp);
        match vals.last() {
            Some(&second) => prop_assert!((res.objective.unwrap() - second).abs() < 1e-6),
            None => prop_assert_eq!(res.status, MipStatus::Infeasible),
        }
    }
}
