//! The surgeon's own planning problem: a multiple knapsack over the blocks the
//! leader granted, optionally tie-broken in the leader's favour.

use std::collections::HashMap;
use std::sync::RwLock;

use optkern::{solve_mip, Constraint, KernelError, LinearProgram, MipOptions, MipProblem, MipStatus, Sense};

use crate::domain::{check_single_level_feasibility, follower_objective, Assignment, Instance, Rational};
use crate::ratio::to_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FollowerMode {
    /// Maximise the surgeon's priority sum only.
    Pure,
    /// Break ties by the leader objective of the whole model.
    OptimisticCompact,
    /// Break ties by the leader's share within one pricing subproblem.
    OptimisticSubproblem,
}

impl FollowerMode {
    pub fn is_optimistic(self) -> bool {
        !matches!(self, FollowerMode::Pure)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FollowerResult {
    /// (patient, block) pairs, sorted.
    pub assignment: Vec<(usize, usize)>,
    /// Optimal follower value.
    pub f_prime: i64,
    /// Slots used by scheduled patients.
    pub delta: i64,
    /// Σ π^LP over the surgeon's unscheduled patients.
    pub rho: i64,
}

impl FollowerResult {
    pub fn patients(&self) -> Vec<usize> {
        let mut ps: Vec<usize> = self.assignment.iter().map(|&(p, _)| p).collect();
        ps.sort_unstable();
        ps
    }

    /// Leader cost of this response, `β ρ − α Δ`.
    pub fn leader_cost(&self, inst: &Instance) -> Rational {
        inst.beta * Rational::from(self.rho as i128) - inst.alpha * Rational::from(self.delta as i128)
    }
}

/// Σ π^FP over the surgeon's patients.
pub fn follower_big_m(inst: &Instance, s: usize) -> i64 {
    inst.surgeons[s].patients.iter().map(|&p| inst.patients[p].prio_follower as i64).sum()
}

/// Normaliser of the optimistic tie-break term: `α C + β Σ_{p ∈ P_s} π^LP + 1`.
pub fn optimistic_normaliser(inst: &Instance, s: usize) -> Rational {
    inst.alpha * Rational::from(inst.capacity as i128)
        + inst.beta * Rational::from(inst.leader_priority_sum(inst.surgeons[s].patients.iter().copied()) as i128)
        + Rational::from(1)
}

fn finish(inst: &Instance, s: usize, mut assignment: Vec<(usize, usize)>) -> FollowerResult {
    assignment.sort_unstable();
    let f_prime = assignment.iter().map(|&(p, _)| inst.patients[p].prio_follower as i64).sum();
    let delta = assignment.iter().map(|&(p, _)| inst.patients[p].duration as i64).sum();
    let scheduled: i64 = assignment.iter().map(|&(p, _)| inst.patients[p].prio_leader as i64).sum();
    let rho = inst.leader_priority_sum(inst.surgeons[s].patients.iter().copied()) - scheduled;
    FollowerResult { assignment, f_prime, delta, rho }
}

/// Blocks ordered by descending length then id; the search fills bins in this order.
fn bin_order(inst: &Instance, blocks: &[usize]) -> Vec<usize> {
    let mut bins = blocks.to_vec();
    bins.sort_by_key(|&b| (std::cmp::Reverse(inst.blocks[b].length), b));
    bins.dedup();
    bins
}

struct Search<'a> {
    dur: &'a [u32],
    prim: &'a [i64],
    sec: &'a [i128],
    caps: Vec<u32>,
    placed: Vec<Option<usize>>,
    cur: (i64, i128),
    best: (i64, i128),
    best_placed: Vec<Option<usize>>,
}

impl Search<'_> {
    fn run(&mut self, i: usize) {
        if self.cur > self.best {
            self.best = self.cur;
            self.best_placed.clone_from(&self.placed);
        }
        if i == self.dur.len() {
            return;
        }
        let max_cap = self.caps.iter().copied().max().unwrap_or(0);
        let (mut bp, mut bs) = self.cur;
        for j in i..self.dur.len() {
            if self.dur[j] <= max_cap {
                bp += self.prim[j];
                bs += self.sec[j];
            }
        }
        if (bp, bs) <= self.best {
            return;
        }
        let d = self.dur[i];
        for bin in 0..self.caps.len() {
            let cap = self.caps[bin];
            // Bins with equal residual capacity are interchangeable.
            if cap < d || self.caps[..bin].contains(&cap) {
                continue;
            }
            self.caps[bin] -= d;
            self.placed[i] = Some(bin);
            self.cur.0 += self.prim[i];
            self.cur.1 += self.sec[i];
            self.run(i + 1);
            self.cur.0 -= self.prim[i];
            self.cur.1 -= self.sec[i];
            self.placed[i] = None;
            self.caps[bin] += d;
        }
        self.run(i + 1);
    }
}

/// Solves the follower problem exactly for surgeon `s` on `blocks`.
///
/// All modes return the same `f_prime`; the optimistic modes additionally
/// maximise `α Δ − β ρ` among follower-optimal responses. The two optimistic
/// modes differ only by constants in the objective and share one argmax.
pub fn solve_follower(inst: &Instance, s: usize, blocks: &[usize], mode: FollowerMode) -> FollowerResult {
    let bins = bin_order(inst, blocks);
    let max_len = bins.iter().map(|&b| inst.blocks[b].length).max().unwrap_or(0);
    let scale = inst.weight_denominator();
    let a = (inst.alpha * Rational::from(scale)).to_integer();
    let b = (inst.beta * Rational::from(scale)).to_integer();
    let mut items: Vec<usize> =
        inst.surgeons[s].patients.iter().copied().filter(|&p| inst.patients[p].duration <= max_len).collect();
    let sec_of = |p: usize| -> i128 {
        if mode.is_optimistic() {
            a * inst.patients[p].duration as i128 + b * inst.patients[p].prio_leader as i128
        } else {
            0
        }
    };
    items.sort_by_key(|&p| {
        let pt = &inst.patients[p];
        (std::cmp::Reverse(pt.prio_follower), std::cmp::Reverse(sec_of(p)), pt.duration, p)
    });
    let dur: Vec<u32> = items.iter().map(|&p| inst.patients[p].duration).collect();
    let prim: Vec<i64> = items.iter().map(|&p| inst.patients[p].prio_follower as i64).collect();
    let sec: Vec<i128> = items.iter().map(|&p| sec_of(p)).collect();
    let mut search = Search {
        dur: &dur,
        prim: &prim,
        sec: &sec,
        caps: bins.iter().map(|&b| inst.blocks[b].length).collect(),
        placed: vec![None; items.len()],
        cur: (0, 0),
        best: (0, 0),
        best_placed: vec![None; items.len()],
    };
    search.run(0);
    let assignment = items.iter().zip(&search.best_placed).filter_map(|(&p, bin)| bin.map(|k| (p, bins[k]))).collect();
    finish(inst, s, assignment)
}

/// Reference path: the same problem as a 0-1 program solved by optkern.
pub fn solve_follower_mip(
    inst: &Instance,
    s: usize,
    blocks: &[usize],
    mode: FollowerMode,
) -> Result<FollowerResult, KernelError> {
    let bins = bin_order(inst, blocks);
    let norm = to_f64(&optimistic_normaliser(inst, s));
    let mut mip = MipProblem::new(LinearProgram::new(Sense::Maximize));
    let mut vars = Vec::new();
    let mut once: Vec<Vec<_>> = vec![Vec::new(); inst.surgeons[s].patients.len()];
    let mut cap: Vec<Vec<_>> = vec![Vec::new(); bins.len()];
    for (k, &p) in inst.surgeons[s].patients.iter().enumerate() {
        let pt = &inst.patients[p];
        let mut obj = pt.prio_follower as f64;
        if mode.is_optimistic() {
            obj += to_f64(&inst.leader_gain(p)) / norm;
        }
        for (j, &b) in bins.iter().enumerate() {
            if pt.duration <= inst.blocks[b].length {
                let v = mip.add_binary(format!("x_{p}_{b}"), obj);
                vars.push((v, p, b));
                once[k].push((v, 1.0));
                cap[j].push((v, pt.duration as f64));
            }
        }
    }
    for row in once.into_iter().filter(|r| r.len() > 1) {
        mip.lp.add_constraint(Constraint::le(row, 1.0));
    }
    for (j, row) in cap.into_iter().enumerate() {
        if !row.is_empty() {
            mip.lp.add_constraint(Constraint::le(row, inst.blocks[bins[j]].length as f64));
        }
    }
    let opts = MipOptions { gap_tol: 1e-9, ..Default::default() };
    let res = solve_mip(&mip, &opts, None)?;
    if res.status != MipStatus::Optimal {
        return Err(KernelError::Numerical(format!("follower MIP ended with {:?}", res.status)));
    }
    let x = res.incumbent.expect("optimal MIP has an incumbent");
    let assignment = vars.iter().filter(|(v, _, _)| x[v.0] > 0.5).map(|&(_, p, b)| (p, b)).collect();
    Ok(finish(inst, s, assignment))
}

/// Memoises follower solutions by surgeon and block-length multiset, which is
/// all the follower problem depends on.
type CacheKey = (usize, bool, Vec<u32>);
type CacheEntry = (Vec<(usize, usize)>, FollowerResult);

#[derive(Debug, Default)]
pub struct FollowerCache {
    /// Detail is stored as (patient, bin position) in [`bin_order`].
    map: RwLock<HashMap<CacheKey, CacheEntry>>,
}

impl FollowerCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&self, inst: &Instance, s: usize, blocks: &[usize], mode: FollowerMode) -> FollowerResult {
        let bins = bin_order(inst, blocks);
        let key = (s, mode.is_optimistic(), bins.iter().map(|&b| inst.blocks[b].length).collect::<Vec<_>>());
        if let Some((positions, r)) = self.map.read().expect("follower cache poisoned").get(&key) {
            let mut r = r.clone();
            r.assignment = positions.iter().map(|&(p, k)| (p, bins[k])).collect();
            r.assignment.sort_unstable();
            return r;
        }
        let r = solve_follower(inst, s, &bins, mode);
        let positions =
            r.assignment.iter().map(|&(p, b)| (p, bins.iter().position(|&x| x == b).expect("bin of result"))).collect();
        self.map.write().expect("follower cache poisoned").insert(key, (positions, r.clone()));
        r
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("follower cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Outcome of the bilevel check for one surgeon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurgeonCheck {
    pub surgeon: usize,
    /// Follower value implied by the leader's patient assignment.
    pub f: i64,
    /// Optimal follower value for the leader's blocks.
    pub f_opt: i64,
    pub feasible: bool,
}

/// Compares each surgeon's value under the leader's plan with the optimum
/// the surgeon could reach on the same blocks.
pub fn check_bilevel_feasibility(inst: &Instance, asg: &Assignment) -> Vec<SurgeonCheck> {
    (0..inst.surgeons.len())
        .map(|s| {
            let f = follower_objective(inst, s, asg);
            let f_opt = solve_follower(inst, s, &asg.blocks_of(s), FollowerMode::Pure).f_prime;
            SurgeonCheck { surgeon: s, f, f_opt, feasible: f == f_opt }
        })
        .collect()
}

/// Single-level feasible and follower-optimal for every surgeon.
pub fn is_bilevel_feasible(inst: &Instance, asg: &Assignment) -> bool {
    asg.check_indices(inst).is_ok()
        && check_single_level_feasibility(inst, asg).ok()
        && check_bilevel_feasibility(inst, asg).iter().all(|c| c.feasible)
}
