mod common;

use std::collections::BTreeSet;

use common::*;
use surgsched::cuts::CutKind;
use surgsched::domain::{leader_objective, Instance, Rational, SurgeonSpec};
use surgsched::follower::is_bilevel_feasible;
use surgsched::inith::{allocate_step, initial_heuristic, knapsack_per_length, CandidateAssignment};

fn block_at(inst: &Instance, start: u32, length: u32) -> usize {
    inst.blocks.iter().position(|b| b.start == start && b.length == length).unwrap()
}

fn candidate(inst: &Instance, s: usize, b: usize, patients: Vec<usize>) -> CandidateAssignment {
    CandidateAssignment {
        surgeon: s,
        block: b,
        delta_bar: patients.iter().map(|&p| inst.patients[p].duration as i64).sum(),
        rho_bar: patients.iter().map(|&p| inst.patients[p].prio_leader as i64).sum(),
        patients,
    }
}

/// Step-1 candidates for every surgeon and block, built from the knapsack.
fn round_one(inst: &Instance) -> Vec<CandidateAssignment> {
    let mut out = Vec::new();
    for s in 0..inst.surgeons.len() {
        for b in 0..inst.blocks.len() {
            let ps = knapsack_per_length(inst, &inst.surgeons[s].patients, inst.blocks[b].length);
            out.push(candidate(inst, s, b, ps));
        }
    }
    out
}

#[test]
fn knapsack_examples() {
    let inst = t1();
    let chosen = knapsack_per_length(&inst, &[0, 1], 16);
    assert_eq!(chosen, vec![0, 1]);
    assert_eq!(candidate(&inst, 0, 0, chosen).value(&inst), Rational::from(16 + 3));
    assert!(knapsack_per_length(&inst, &[2], 8).is_empty());
    assert!(knapsack_per_length(&inst, &[0, 1, 2], 0).is_empty());
    assert!(knapsack_per_length(&inst, &[], 32).is_empty());
}

#[test]
fn knapsack_matches_subset_enumeration() {
    for inst in small_suite(20) {
        for s in 0..inst.surgeons.len() {
            let pool = &inst.surgeons[s].patients;
            for &l in &inst.lengths {
                let got = knapsack_per_length(&inst, pool, l);
                let used: u32 = got.iter().map(|&p| inst.patients[p].duration).sum();
                assert!(used <= l);
                let value = |set: &[usize]| -> Rational { set.iter().map(|&p| inst.leader_gain(p)).sum() };
                let best = packable_subsets(&inst, s, &[l]).into_iter().map(|(set, _)| value(&set)).max().unwrap();
                assert_eq!(value(&got), best);
            }
        }
    }
}

#[test]
fn first_t1_round_gives_each_surgeon_a_block() {
    let inst = t1();
    let added = allocate_step(&inst, &round_one(&inst), &BTreeSet::new());
    assert_eq!(added.len(), 2);
    assert_eq!(added.iter().map(|&(s, _)| s).collect::<BTreeSet<_>>(), BTreeSet::from([0, 1]));
}

#[test]
fn saturated_schedule_admits_nothing() {
    let inst = t1();
    let phi = BTreeSet::from([(0, block_at(&inst, 0, 32))]);
    assert!(allocate_step(&inst, &round_one(&inst), &phi).is_empty());
}

#[test]
fn equal_values_prefer_the_earlier_start() {
    let inst = t1();
    let late = candidate(&inst, 1, block_at(&inst, 16, 16), vec![2]);
    let early = candidate(&inst, 1, block_at(&inst, 8, 16), vec![2]);
    assert_eq!(allocate_step(&inst, &[late, early], &BTreeSet::new()), vec![(1, block_at(&inst, 8, 16))]);
}

#[test]
fn t1_heuristic_is_feasible_and_no_worse_than_empty() {
    let inst = t1();
    let h = initial_heuristic(&inst);
    assert!(is_bilevel_feasible(&inst, &h.assignment));
    assert!(h.value <= Rational::from(38));
    assert_eq!(h.value, leader_objective(&inst, &h.assignment));
    assert_eq!(h.patterns.len(), 2);
}

#[test]
fn no_patients_gives_the_empty_schedule() {
    let inst = Instance::new(single_day_spec(vec![SurgeonSpec { id: 0, patients: vec![] }])).unwrap();
    let h = initial_heuristic(&inst);
    assert!(h.assignment.y.is_empty() && h.assignment.x.is_empty());
    assert_eq!(h.value, inst.alpha * Rational::from(inst.capacity as i128));
}

#[test]
fn heuristic_is_an_upper_bound_with_valid_seed_cuts() {
    for inst in small_suite(30) {
        let h = initial_heuristic(&inst);
        assert!(is_bilevel_feasible(&inst, &h.assignment));
        assert!(h.value >= oracle_optimum(&inst));
        assert!(h.assignment.y.len() <= inst.surgeons.len() * inst.v_horizon as usize);
        for p in &h.patterns {
            assert_eq!(p.blocks, h.assignment.blocks_of(p.surgeon));
        }
        for cut in &h.cuts {
            match cut.kind {
                CutKind::Olc => {
                    for (blocks, patients) in bilevel_feasible_plans(&inst, cut.surgeon) {
                        assert!(cut.is_satisfied_by(&inst, &blocks, &patients), "{cut}");
                    }
                }
                // Follower ties may be cut off; the optimistic response must survive.
                CutKind::Alc => {
                    let lengths: Vec<u32> = cut
                        .profile
                        .0
                        .iter()
                        .enumerate()
                        .flat_map(|(l, &n)| std::iter::repeat_n(inst.lengths[l], n as usize))
                        .collect();
                    let (best_f, best_cost) = optimistic_response(&inst, cut.surgeon, &lengths);
                    let f: i64 = cut.pa_set.iter().map(|&p| inst.patients[p].prio_follower as i64).sum();
                    assert_eq!(f, best_f, "{cut}");
                    assert_eq!(leader_cost(&inst, cut.surgeon, &cut.pa_set), best_cost, "{cut}");
                }
            }
        }
    }
}
