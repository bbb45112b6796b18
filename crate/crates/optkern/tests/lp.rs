use optkern::{solve_lp, Constraint, LinearProgram, LpStatus, Sense};
use proptest::prelude::*;

#[test]
fn single_row_lp_has_expected_dual() {
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x = lp.add_var("x", 0.0, 10.0, -1.0);
    lp.add_constraint(Constraint::le(vec![(x, 1.0)], 3.0));
    let sol = solve_lp(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective + 3.0).abs() < 1e-9);
    assert!((sol.duals[0] + 1.0).abs() < 1e-9);
}

#[test]
fn contradictory_rows_are_infeasible() {
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x = lp.add_var("x", 0.0, 10.0, 1.0);
    lp.add_constraint(Constraint::le(vec![(x, 1.0)], 1.0));
    lp.add_constraint(Constraint::ge(vec![(x, 1.0)], 2.0));
    assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
}

#[test]
fn free_variable_ray_is_unbounded() {
    let mut lp = LinearProgram::new(Sense::Maximize);
    let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
    let y = lp.add_var("y", 0.0, 1.0, 0.0);
    lp.add_constraint(Constraint::ge(vec![(x, 1.0), (y, -1.0)], 0.0));
    assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn free_variables_need_primal_phase_one() {
    // min x + y  s.t. x + 2y >= 4, 3x + y >= 6, x, y free.
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
    let y = lp.add_var("y", f64::NEG_INFINITY, f64::INFINITY, 1.0);
    lp.add_constraint(Constraint::ge(vec![(x, 1.0), (y, 2.0)], 4.0));
    lp.add_constraint(Constraint::ge(vec![(x, 3.0), (y, 1.0)], 6.0));
    let sol = solve_lp(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    // Vertex (8/5, 6/5).
    assert!((sol.objective - 2.8).abs() < 1e-9);
    assert!((sol.primal[0] - 1.6).abs() < 1e-9 && (sol.primal[1] - 1.2).abs() < 1e-9);
    assert!(sol.duals.iter().all(|&d| d >= -1e-9));
    assert!((sol.dual_objective(&lp) - sol.objective).abs() < 1e-9);
}

#[test]
fn equality_rows_and_max_sense() {
    // max 2a + 3b  s.t. a + b = 1, a,b in [0,1]  -> b = 1, dual of the row = 3.
    let mut lp = LinearProgram::new(Sense::Maximize);
    let a = lp.add_var("a", 0.0, 1.0, 2.0);
    let b = lp.add_var("b", 0.0, 1.0, 3.0);
    lp.add_constraint(Constraint::eq(vec![(a, 1.0), (b, 1.0)], 1.0));
    let sol = solve_lp(&lp).unwrap();
    assert!((sol.objective - 3.0).abs() < 1e-9);
    assert!((sol.dual_objective(&lp) - 3.0).abs() < 1e-9);
}

#[test]
fn malformed_models_are_rejected() {
    let mut lp = LinearProgram::new(Sense::Minimize);
    lp.add_var("x", 1.0, 0.0, 1.0);
    assert!(solve_lp(&lp).is_err());
    let mut lp = LinearProgram::new(Sense::Minimize);
    lp.add_var("x", 0.0, 1.0, 1.0);
    lp.add_constraint(Constraint::le(vec![(optkern::VarId(3), 1.0)], 1.0));
    assert!(solve_lp(&lp).is_err());
}

/// Checks an optimality certificate: primal feasibility, sign-correct duals,
/// complementary slackness and equal primal/dual objectives.
fn certify(lp: &LinearProgram, sol: &optkern::LpSolution) {
    let tol = 1e-7;
    for (j, v) in lp.variables.iter().enumerate() {
        let x = sol.primal[j];
        assert!(x >= v.lower - tol && x <= v.upper + tol, "bound {j}");
        let d = sol.reduced_costs[j];
        if x > v.lower + tol && x < v.upper - tol {
            assert!(d.abs() < tol, "basic-ish var {j} has reduced cost {d}");
        } else if (x - v.lower).abs() <= tol && v.lower < v.upper {
            assert!(d >= -tol, "var {j} at lower with d = {d}");
        } else if (x - v.upper).abs() <= tol && v.lower < v.upper {
            assert!(d <= tol, "var {j} at upper with d = {d}");
        }
    }
    for (i, c) in lp.constraints.iter().enumerate() {
        assert!(c.violation(&sol.primal) < tol, "row {i}");
        let slack = c.rhs - c.activity(&sol.primal);
        let y = sol.duals[i];
        match c.sense {
            optkern::RowSense::Le => assert!(y <= tol),
            optkern::RowSense::Ge => assert!(y >= -tol),
            optkern::RowSense::Eq => {}
        }
        assert!((slack * y).abs() < 1e-6, "complementary slackness row {i}");
    }
    assert!((sol.dual_objective(lp) - sol.objective).abs() < 1e-9 * (1.0 + sol.objective.abs()));
}

fn random_lp() -> impl Strategy<Value = LinearProgram> {
    (2usize..8, 1usize..8).prop_flat_map(|(n, m)| {
        (
            proptest::collection::vec(-5i32..6, n),
            proptest::collection::vec((proptest::collection::vec(-4i32..5, n), 0u8..3, -6i32..12), m),
            proptest::collection::vec((0i32..3, 1i32..6), n),
        )
            .prop_map(move |(c, rows, bounds)| {
                let mut lp = LinearProgram::new(Sense::Minimize);
                let vars: Vec<_> = (0..n)
                    .map(|j| {
                        lp.add_var(format!("x{j}"), bounds[j].0 as f64, (bounds[j].0 + bounds[j].1) as f64, c[j] as f64)
                    })
                    .collect();
                for (coef, s, rhs) in rows {
                    let row = vars.iter().zip(&coef).map(|(&v, &a)| (v, a as f64)).collect();
                    let sense = [optkern::RowSense::Le, optkern::RowSense::Ge, optkern::RowSense::Eq][s as usize];
                    lp.add_constraint(Constraint::new(row, sense, rhs as f64));
                }
                lp
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]
    #[test]
    fn optimal_solutions_carry_a_valid_certificate(lp in random_lp()) {
        let sol = solve_lp(&lp).unwrap();
        if sol.status == LpStatus::Optimal {
            certify(&lp, &sol);
        } else {
            prop_assert_eq!(sol.status, LpStatus::Infeasible);
        }
    }

    #[test]
    fn maximization_mirrors_minimization(lp in random_lp()) {
        let mut neg = lp.clone();
        neg.sense = Sense::Maximize;
        for v in &mut neg.variables { v.objective = -v.objective; }
        let a = solve_lp(&lp).unwrap();
        let b = solve_lp(&neg).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.status == LpStatus::Optimal {
            prop_assert!((a.objective + b.objective).abs() < 1e-7);
            certify_max(&neg, &b);
        }
    }
}

fn certify_max(lp: &LinearProgram, sol: &optkern::LpSolution) {
    assert!((sol.dual_objective(lp) - sol.objective).abs() < 1e-7 * (1.0 + sol.objective.abs()));
}
