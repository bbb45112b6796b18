mod common;

use common::*;
use proptest::prelude::*;
use surgsched::bnp::{solve_bnp, BnpOptions};
use surgsched::domain::Rational;
use surgsched::solution::{load_solution, parse_solution, save_solution, SolutionError, SolutionFile};
use surgsched::SolveStatus;

fn t1_solution() -> SolutionFile {
    let inst = t1();
    let out = solve_bnp(&inst, &BnpOptions::default()).unwrap();
    SolutionFile::from_outcome(&inst, "t1", &out)
}

#[test]
fn solved_t1_round_trips_and_validates() {
    let inst = t1();
    let sol = t1_solution();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert_eq!(sol.value, Some(Rational::from(2)));
    assert_eq!(sol.f, vec![(0, 4), (1, 2)]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t1.solution.json");
    save_solution(&sol, &path).unwrap();
    let back = load_solution(&path).unwrap();
    assert_eq!(back, sol);
    let asg = back.validate(&inst).unwrap().unwrap();
    assert_eq!(asg.x.len(), 3);
}

#[test]
fn fractional_values_use_the_quotient_form() {
    let text = r#"{"instance_id":"a","status":"TIME_LIMIT","F":"37/2","bound":18.25,"y":[],"x":[],"f":[]}"#;
    let sol = parse_solution(text).unwrap();
    assert_eq!(sol.value, Some(Rational::new(37, 2)));
    assert_eq!(sol.status, SolveStatus::TimeLimit);
    assert!(sol.to_json().contains("\"37/2\""));
}

#[test]
fn empty_result_has_no_assignment() {
    let inst = t1();
    let sol = SolutionFile::new(&inst, "t1", SolveStatus::TimeLimit, None, f64::NEG_INFINITY);
    assert_eq!(sol.bound, None);
    assert_eq!(parse_solution(&sol.to_json()).unwrap(), sol);
    assert!(sol.validate(&inst).unwrap().is_none());
}

#[test]
fn inconsistent_files_are_rejected() {
    let inst = t1();
    let good = t1_solution();

    let mut wrong_f = good.clone();
    wrong_f.value = Some(Rational::from(3));
    assert!(matches!(wrong_f.validate(&inst), Err(SolutionError::Mismatch { .. })));

    let mut wrong_follower = good.clone();
    wrong_follower.f[0].1 += 1;
    assert!(matches!(wrong_follower.validate(&inst), Err(SolutionError::Mismatch { .. })));

    let mut unknown_patient = good.clone();
    unknown_patient.x.push((99, 0));
    assert!(matches!(unknown_patient.validate(&inst), Err(SolutionError::UnknownId { kind: "patient", id: 99 })));

    let mut unknown_block = good.clone();
    unknown_block.y.push((0, 10_000));
    assert!(matches!(unknown_block.validate(&inst), Err(SolutionError::UnknownId { kind: "block", .. })));

    let mut no_value = good;
    no_value.value = None;
    assert!(matches!(no_value.validate(&inst), Err(SolutionError::MissingValue(_))));
}

#[test]
fn malformed_documents_are_parse_errors() {
    for text in [
        "",
        "[]",
        r#"{"instance_id":"a","status":"SOLVED","F":1,"bound":1,"y":[],"x":[],"f":[]}"#,
        r#"{"instance_id":"a","status":"OPTIMAL","F":"1/0","bound":1,"y":[],"x":[],"f":[]}"#,
        r#"{"instance_id":"a","status":"OPTIMAL","F":1,"bound":1,"y":[[0]],"x":[],"f":[]}"#,
    ] {
        assert!(matches!(parse_solution(text), Err(SolutionError::Parse(_))), "{text}");
    }
    assert!(matches!(load_solution("/nonexistent/sol.json"), Err(SolutionError::Io { .. })));
}

proptest! {
    #[test]
    fn documents_round_trip(
        num in -10_000i128..10_000,
        den in 1i128..50,
        bound in proptest::option::of(-1e6f64..1e6),
        y in proptest::collection::vec((0u32..5, 0usize..40), 0..6),
        f in proptest::collection::vec((0u32..5, -50i64..50), 0..6),
    ) {
        let sol = SolutionFile {
            instance_id: "p".into(),
            status: SolveStatus::Optimal,
            value: Some(Rational::new(num, den)),
            bound,
            y: y.clone(),
            x: y,
            f,
        };
        prop_assert_eq!(parse_solution(&sol.to_json()).unwrap(), sol);
    }
}
