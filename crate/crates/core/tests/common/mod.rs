//! Fixtures and an exhaustive-enumeration oracle written independently of
//! the solver code paths.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use surgsched::domain::{Instance, InstanceSpec, PatientSpec, Rational, SurgeonSpec};
use surgsched::instgen::{generate_instance, GenParams};

pub fn patient(id: u32, duration: u32, prio_leader: u32, prio_follower: u32) -> PatientSpec {
    PatientSpec { id, duration, prio_leader, prio_follower }
}

/// One day, one room, 32 slots, lengths {8,16,24,32}, starts {0,8,16,24}, one block per surgeon.
pub fn single_day_spec(surgeons: Vec<SurgeonSpec>) -> InstanceSpec {
    InstanceSpec {
        days: 1,
        rooms: 1,
        slots_per_day: 32,
        lengths: vec![8, 16, 24, 32],
        starts: vec![0, 8, 16, 24],
        v_day: 1,
        v_horizon: 1,
        alpha: Rational::from(1),
        beta: Rational::from(1),
        capacity: None,
        unavailability: Vec::new(),
        surgeons,
        seed: None,
        params: None,
    }
}

pub fn t1() -> Instance {
    Instance::new(single_day_spec(vec![
        SurgeonSpec { id: 0, patients: vec![patient(0, 10, 2, 1), patient(1, 6, 1, 3)] },
        SurgeonSpec { id: 1, patients: vec![patient(2, 14, 3, 2)] },
    ]))
    .unwrap()
}

pub fn t2() -> Instance {
    Instance::new(single_day_spec(vec![SurgeonSpec {
        id: 0,
        patients: vec![patient(0, 12, 4, 1), patient(1, 10, 1, 3)],
    }]))
    .unwrap()
}

/// T2 restricted to blocks of 8 and 16 slots: the leader's preferred patient
/// no longer fits alongside the surgeon's preferred one.
pub fn t2_conflict() -> Instance {
    let mut spec =
        single_day_spec(vec![SurgeonSpec { id: 0, patients: vec![patient(0, 12, 4, 1), patient(1, 10, 1, 3)] }]);
    spec.lengths = vec![8, 16];
    Instance::new(spec).unwrap()
}

/// Small generated instances: up to 3 surgeons, up to 2 days, one room, 2 to 8 patients.
pub fn small_suite(count: usize) -> Vec<Instance> {
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < count {
        let surgeons = 1 + (seed % 3) as usize;
        let days = 1 + ((seed / 3) % 2) as usize;
        let lf = [0.8, 1.1, 1.4][((seed / 6) % 3) as usize] / days as f64;
        let mut p = GenParams::new(surgeons, 1, lf, 1000 + seed);
        p.days = days;
        p.lf_tolerance = 0.1;
        seed += 1;
        let Ok(inst) = generate_instance(&p) else { continue };
        if (2..=8).contains(&inst.patients.len()) {
            out.push(inst);
        }
    }
    out
}

/// Block sets one surgeon may hold on its own: per-day and horizon limits,
/// availability, and at most `rooms` of its blocks in progress at any grid point.
pub fn surgeon_block_sets(inst: &Instance, s: usize) -> Vec<Vec<usize>> {
    fn rec(inst: &Instance, s: usize, next: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(cur.clone());
        if cur.len() as u32 >= inst.v_horizon {
            return;
        }
        for b in next..inst.blocks.len() {
            if inst.unavailable.contains(&(s, b)) {
                continue;
            }
            let blk = inst.blocks[b];
            let same_day = cur.iter().filter(|&&c| inst.blocks[c].day == blk.day).count() as u32;
            if same_day >= inst.v_day {
                continue;
            }
            cur.push(b);
            if room_ok(inst, &[cur.as_slice()]) {
                rec(inst, s, b + 1, cur, out);
            }
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(inst, s, 0, &mut Vec::new(), &mut out);
    out
}

fn room_ok(inst: &Instance, sets: &[&[usize]]) -> bool {
    for d in 0..inst.days {
        for &t in &inst.starts {
            let n: usize = sets
                .iter()
                .map(|set| {
                    set.iter()
                        .filter(|&&b| {
                            let blk = inst.blocks[b];
                            blk.day == d && blk.start <= t && t < blk.start + blk.length
                        })
                        .count()
                })
                .sum();
            if n > inst.rooms as usize {
                return false;
            }
        }
    }
    true
}

/// Whether the durations fit into bins of the given capacities.
pub fn packable(durations: &[u32], caps: &mut [u32]) -> bool {
    fn rec(d: &[u32], caps: &mut [u32]) -> bool {
        let Some((&first, rest)) = d.split_first() else { return true };
        for i in 0..caps.len() {
            if caps[i] >= first {
                caps[i] -= first;
                let ok = rec(rest, caps);
                caps[i] += first;
                if ok {
                    return true;
                }
            }
        }
        false
    }
    let mut d = durations.to_vec();
    d.sort_unstable_by(|a, b| b.cmp(a));
    rec(&d, caps)
}

/// Every packable patient subset of surgeon `s` on blocks of the given lengths, with its follower value.
pub fn packable_subsets(inst: &Instance, s: usize, lengths: &[u32]) -> Vec<(Vec<usize>, i64)> {
    let ps = &inst.surgeons[s].patients;
    let mut out = Vec::new();
    for mask in 0u32..(1 << ps.len()) {
        let set: Vec<usize> = (0..ps.len()).filter(|i| mask >> i & 1 == 1).map(|i| ps[i]).collect();
        let durations: Vec<u32> = set.iter().map(|&p| inst.patients[p].duration).collect();
        if packable(&durations, &mut lengths.to_vec()) {
            let f = set.iter().map(|&p| inst.patients[p].prio_follower as i64).sum();
            out.push((set, f));
        }
    }
    out
}

/// `β ρ − α Δ` of scheduling exactly `set` among surgeon `s`'s patients.
pub fn leader_cost(inst: &Instance, s: usize, set: &[usize]) -> Rational {
    let delta: i64 = set.iter().map(|&p| inst.patients[p].duration as i64).sum();
    let rho: i64 = inst.surgeons[s]
        .patients
        .iter()
        .filter(|p| !set.contains(p))
        .map(|&p| inst.patients[p].prio_leader as i64)
        .sum();
    inst.beta * Rational::from(rho as i128) - inst.alpha * Rational::from(delta as i128)
}

/// Follower optimum and the best leader cost among follower-optimal subsets.
pub fn optimistic_response(inst: &Instance, s: usize, lengths: &[u32]) -> (i64, Rational) {
    let subsets = packable_subsets(inst, s, lengths);
    let best_f = subsets.iter().map(|(_, f)| *f).max().unwrap_or(0);
    let cost = subsets.iter().filter(|(_, f)| *f == best_f).map(|(set, _)| leader_cost(inst, s, set)).min().unwrap();
    (best_f, cost)
}

fn lengths_of(inst: &Instance, blocks: &[usize]) -> Vec<u32> {
    let mut l: Vec<u32> = blocks.iter().map(|&b| inst.blocks[b].length).collect();
    l.sort_unstable();
    l
}

/// Optimal bilevel leader objective by exhaustive enumeration.
pub fn oracle_optimum(inst: &Instance) -> Rational {
    let ns = inst.surgeons.len();
    let mut options: Vec<Vec<(Vec<usize>, Rational)>> = Vec::with_capacity(ns);
    for s in 0..ns {
        let mut memo: HashMap<Vec<u32>, Rational> = HashMap::new();
        let mut opts: Vec<(Vec<usize>, Rational)> = surgeon_block_sets(inst, s)
            .into_iter()
            .map(|set| {
                let l = lengths_of(inst, &set);
                let cost = *memo.entry(l.clone()).or_insert_with(|| optimistic_response(inst, s, &l).1);
                (set, cost)
            })
            .collect();
        opts.sort_by_key(|o| o.1);
        options.push(opts);
    }
    let floor: Vec<Rational> = options.iter().map(|o| o[0].1).collect();
    let mut suffix = vec![Rational::from(0); ns + 1];
    for s in (0..ns).rev() {
        suffix[s] = suffix[s + 1] + floor[s];
    }
    let mut best: Option<Rational> = None;
    let mut chosen: Vec<&[usize]> = Vec::new();
    fn rec<'a>(
        inst: &Instance,
        options: &'a [Vec<(Vec<usize>, Rational)>],
        suffix: &[Rational],
        s: usize,
        acc: Rational,
        chosen: &mut Vec<&'a [usize]>,
        best: &mut Option<Rational>,
    ) {
        if best.is_some_and(|b| acc + suffix[s] >= b) {
            return;
        }
        if s == options.len() {
            *best = Some(acc);
            return;
        }
        for (set, cost) in &options[s] {
            chosen.push(set);
            if room_ok(inst, chosen) {
                rec(inst, options, suffix, s + 1, acc + *cost, chosen, best);
            }
            chosen.pop();
        }
    }
    rec(inst, &options, &suffix, 0, Rational::from(0), &mut chosen, &mut best);
    let constant = inst.alpha * Rational::from(inst.capacity as i128);
    constant + best.expect("the empty schedule is always feasible")
}

/// Every (blocks, patients) plan of surgeon `s` that can appear in a bilevel-feasible solution.
pub fn bilevel_feasible_plans(inst: &Instance, s: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    let mut memo: BTreeMap<Vec<u32>, Vec<Vec<usize>>> = BTreeMap::new();
    for set in surgeon_block_sets(inst, s) {
        let l = lengths_of(inst, &set);
        let optimal = memo.entry(l.clone()).or_insert_with(|| {
            let subsets = packable_subsets(inst, s, &l);
            let best = subsets.iter().map(|(_, f)| *f).max().unwrap_or(0);
            subsets.into_iter().filter(|(_, f)| *f == best).map(|(p, _)| p).collect()
        });
        for ps in optimal.iter() {
            out.push((set.clone(), ps.clone()));
        }
    }
    out
}
