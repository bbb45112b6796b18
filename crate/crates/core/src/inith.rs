//! Constructive initial heuristic: grow a block schedule greedily with
//! tentative patient plans, then let every surgeon plan its own patients.

use std::collections::BTreeSet;

use optkern::{solve_mip, Constraint, LinearProgram, MipOptions, MipProblem, MipStatus, Sense, VarId};
use rayon::prelude::*;

use crate::bnp::Pattern;
use crate::cuts::{BlockCountProfile, LazyCut};
use crate::domain::{leader_objective, Assignment, Instance, Rational};
use crate::follower::{solve_follower, FollowerMode};

/// A tentative (surgeon, block) allocation with the patients it would serve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateAssignment {
    pub surgeon: usize,
    pub block: usize,
    pub patients: Vec<usize>,
    /// Σ δ over `patients`.
    pub delta_bar: i64,
    /// Σ π^LP over `patients`.
    pub rho_bar: i64,
}

impl CandidateAssignment {
    /// `α Δ̄ + β ρ̄`.
    pub fn value(&self, inst: &Instance) -> Rational {
        inst.alpha * Rational::from(self.delta_bar as i128) + inst.beta * Rational::from(self.rho_bar as i128)
    }
}

/// Leader gain of a patient scaled to an integer by the weight denominator.
fn scaled_gain(inst: &Instance, p: usize) -> i128 {
    let g = inst.leader_gain(p) * Rational::from(inst.weight_denominator());
    debug_assert!(g.is_integer());
    g.to_integer()
}

/// Patients of `pool` fitting into `l` slots with maximum leader gain.
pub fn knapsack_per_length(inst: &Instance, pool: &[usize], l: u32) -> Vec<usize> {
    let cap = l as usize;
    let n = pool.len();
    // best[i][c]: best value using the first i items within capacity c.
    let mut best = vec![vec![0i128; cap + 1]; n + 1];
    for (i, &p) in pool.iter().enumerate() {
        let w = inst.patients[p].duration as usize;
        let v = scaled_gain(inst, p);
        for c in 0..=cap {
            let skip = best[i][c];
            let take = if w <= c { best[i][c - w] + v } else { i128::MIN };
            best[i + 1][c] = skip.max(take);
        }
    }
    let mut chosen = Vec::new();
    let mut c = cap;
    for i in (0..n).rev() {
        if best[i + 1][c] != best[i][c] {
            chosen.push(pool[i]);
            c -= inst.patients[pool[i]].duration as usize;
        }
    }
    chosen.sort_unstable();
    chosen
}

fn day_count(phi: &BTreeSet<(usize, usize)>, inst: &Instance, s: usize, d: usize) -> u32 {
    phi.range((s, 0)..(s + 1, 0)).filter(|&&(_, b)| inst.blocks[b].day == d).count() as u32
}

fn held(phi: &BTreeSet<(usize, usize)>, s: usize) -> u32 {
    phi.range((s, 0)..(s + 1, 0)).count() as u32
}

/// Chooses at most one new block per surgeon, maximising leader value with a
/// preference for early starts, subject to rooms and limits given `phi`.
pub fn allocate_step(
    inst: &Instance,
    candidates: &[CandidateAssignment],
    phi: &BTreeSet<(usize, usize)>,
) -> Vec<(usize, usize)> {
    let mut used = vec![0u32; inst.num_points()];
    for &(_, b) in phi {
        for &pt in inst.block_points(b) {
            used[pt] += 1;
        }
    }
    let start_sum: f64 = inst.blocks.iter().map(|b| b.start as f64).sum();
    let scale = Rational::from(inst.weight_denominator());
    let mut mip = MipProblem::new(LinearProgram::new(Sense::Maximize));
    let mut vars: Vec<(usize, VarId)> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let (s, b) = (c.surgeon, c.block);
        let blk = inst.blocks[b];
        let admissible = !c.patients.is_empty()
            && !inst.is_unavailable(s, b)
            && !phi.contains(&(s, b))
            && held(phi, s) < inst.v_horizon
            && day_count(phi, inst, s, blk.day) < inst.v_day
            && inst.block_points(b).iter().all(|&pt| used[pt] < inst.rooms);
        if !admissible {
            continue;
        }
        let value = (c.value(inst) * scale).to_integer() as f64;
        let v = mip.add_binary(format!("z_{s}_{b}"), value - blk.start as f64 / (1.0 + start_sum));
        vars.push((i, v));
    }
    if vars.is_empty() {
        return Vec::new();
    }
    for (pt, &busy) in used.iter().enumerate() {
        let row: Vec<(VarId, f64)> = vars
            .iter()
            .filter(|&&(i, _)| inst.block_points(candidates[i].block).contains(&pt))
            .map(|&(_, v)| (v, 1.0))
            .collect();
        if row.len() as u32 > inst.rooms - busy {
            mip.lp.add_constraint(Constraint::le(row, (inst.rooms - busy) as f64));
        }
    }
    for s in 0..inst.surgeons.len() {
        let row: Vec<(VarId, f64)> =
            vars.iter().filter(|&&(i, _)| candidates[i].surgeon == s).map(|&(_, v)| (v, 1.0)).collect();
        if row.len() > 1 {
            mip.lp.add_constraint(Constraint::le(row, 1.0));
        }
    }
    let res = match solve_mip(&mip, &MipOptions { gap_tol: 1e-9, ..Default::default() }, None) {
        Ok(r) if r.status == MipStatus::Optimal => r,
        _ => return Vec::new(),
    };
    let values = res.incumbent.expect("optimal selection has a solution");
    vars.iter()
        .filter(|&&(_, v)| values[v.0] > 0.5)
        .map(|&(i, _)| (candidates[i].surgeon, candidates[i].block))
        .collect()
}

/// Heuristic result: one bilevel-feasible assignment, its columns and seed cuts.
#[derive(Debug, Clone)]
pub struct InitialSolution {
    pub assignment: Assignment,
    pub value: Rational,
    /// One pattern per surgeon, in surgeon order.
    pub patterns: Vec<Pattern>,
    /// One objective-based and one assignment-based cut per surgeon holding blocks.
    pub cuts: Vec<LazyCut>,
}

pub fn initial_heuristic(inst: &Instance) -> InitialSolution {
    let ns = inst.surgeons.len();
    let mut pools: Vec<Vec<usize>> = inst.surgeons.iter().map(|sg| sg.patients.clone()).collect();
    let mut phi: BTreeSet<(usize, usize)> = BTreeSet::new();
    loop {
        let per_surgeon: Vec<Vec<CandidateAssignment>> = (0..ns)
            .into_par_iter()
            .map(|s| {
                if held(&phi, s) >= inst.v_horizon || pools[s].is_empty() {
                    return Vec::new();
                }
                let by_length: Vec<Vec<usize>> =
                    inst.lengths.iter().map(|&l| knapsack_per_length(inst, &pools[s], l)).collect();
                (0..inst.blocks.len())
                    .filter(|&b| !inst.is_unavailable(s, b) && !phi.contains(&(s, b)))
                    .map(|b| {
                        let patients = by_length[inst.length_index(b)].clone();
                        CandidateAssignment {
                            surgeon: s,
                            block: b,
                            delta_bar: patients.iter().map(|&p| inst.patients[p].duration as i64).sum(),
                            rho_bar: inst.leader_priority_sum(patients.iter().copied()),
                            patients,
                        }
                    })
                    .collect()
            })
            .collect();
        let candidates: Vec<CandidateAssignment> = per_surgeon.into_iter().flatten().collect();
        let added = allocate_step(inst, &candidates, &phi);
        if added.is_empty() {
            break;
        }
        for (s, b) in added {
            phi.insert((s, b));
            let c = candidates.iter().find(|c| c.surgeon == s && c.block == b).expect("added candidate");
            pools[s].retain(|p| !c.patients.contains(p));
        }
    }

    let mut assignment = Assignment::new();
    assignment.y = phi.clone();
    let mut patterns = Vec::with_capacity(ns);
    let mut cuts = Vec::new();
    for s in 0..ns {
        let blocks: Vec<usize> = phi.range((s, 0)..(s + 1, 0)).map(|&(_, b)| b).collect();
        let resp = solve_follower(inst, s, &blocks, FollowerMode::OptimisticSubproblem);
        assignment.x.extend(resp.assignment.iter().copied());
        if !blocks.is_empty() {
            let profile = BlockCountProfile::of_blocks(inst, &blocks);
            cuts.push(LazyCut::olc(s, profile.clone(), resp.f_prime));
            cuts.push(LazyCut::alc(s, profile, resp.patients()));
        }
        patterns.push(Pattern::from_response(s, blocks, resp));
    }
    let value = leader_objective(inst, &assignment);
    InitialSolution { assignment, value, patterns, cuts }
}
