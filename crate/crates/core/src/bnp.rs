//! Branch-and-price over bilevel-feasible surgeon patterns.
//!
//! The restricted master problem picks one pattern per surgeon subject to the
//! room capacity at every grid point. Pricing solves one leader-style MIP per
//! surgeon whose lazy callback only accepts follower-optimal patient plans.
//! Branching fixes single `y_sb` variables.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::time::{Duration, Instant};

use optkern::{
    solve_lp, solve_mip, CallbackAction, Constraint, LinearProgram, LpStatus, MipOptions, MipProblem, MipStatus, Sense,
    VarId,
};
use rayon::prelude::*;

use crate::cuts::{build_cut, w_max, BlockCountProfile, CutEvent, CutKind, LazyCut, LcrStore, QLink};
use crate::domain::{leader_objective, Assignment, Instance, Rational};
use crate::follower::{FollowerCache, FollowerMode, FollowerResult};
use crate::inith::initial_heuristic;
use crate::outcome::{SolveError, SolveOutcome, SolveStats, SolveStatus};
use crate::ratio::to_f64;

/// Minimum reduced cost of a column worth adding.
pub const EPS_RC: f64 = 1e-6;
/// Distance from an integer above which a `y` value counts as fractional.
pub const FRAC_TOL: f64 = 1e-6;

/// One surgeon's block schedule together with a follower-optimal patient plan.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    pub surgeon: usize,
    /// Held blocks, sorted.
    pub blocks: Vec<usize>,
    /// (patient, block) pairs, sorted.
    pub patients: Vec<(usize, usize)>,
    /// Slots of scheduled surgery.
    pub delta: i64,
    /// Σ π^LP over the surgeon's unscheduled patients.
    pub rho: i64,
}

impl Pattern {
    pub fn from_response(s: usize, mut blocks: Vec<usize>, resp: FollowerResult) -> Self {
        blocks.sort_unstable();
        Pattern { surgeon: s, blocks, patients: resp.assignment, delta: resp.delta, rho: resp.rho }
    }

    fn from_plan(inst: &Instance, s: usize, mut blocks: Vec<usize>, mut patients: Vec<(usize, usize)>) -> Self {
        blocks.sort_unstable();
        patients.sort_unstable();
        let delta = patients.iter().map(|&(p, _)| inst.patients[p].duration as i64).sum();
        let scheduled: i64 = patients.iter().map(|&(p, _)| inst.patients[p].prio_leader as i64).sum();
        let rho = inst.leader_priority_sum(inst.surgeons[s].patients.iter().copied()) - scheduled;
        Pattern { surgeon: s, blocks, patients, delta, rho }
    }

    /// Master cost `β ρ − α Δ`.
    pub fn cost(&self, inst: &Instance) -> Rational {
        inst.beta * Rational::from(self.rho as i128) - inst.alpha * Rational::from(self.delta as i128)
    }

    pub fn follower_value(&self, inst: &Instance) -> i64 {
        self.patients.iter().map(|&(p, _)| inst.patients[p].prio_follower as i64).sum()
    }

    /// Number of the pattern's blocks in progress at each grid point.
    fn coverage(&self, inst: &Instance) -> HashMap<usize, u32> {
        let mut cov = HashMap::new();
        for &b in &self.blocks {
            for &pt in inst.block_points(b) {
                *cov.entry(pt).or_insert(0) += 1;
            }
        }
        cov
    }
}

/// Ordered branching decisions `(surgeon, block, value)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BranchHistory {
    triples: Vec<(usize, usize, bool)>,
}

impl BranchHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn triples(&self) -> &[(usize, usize, bool)] {
        &self.triples
    }

    /// Appends a decision; `false` if it contradicts an earlier one.
    pub fn push(&mut self, s: usize, b: usize, value: bool) -> bool {
        match self.fixed(s, b) {
            Some(v) => v == value,
            None => {
                self.triples.push((s, b, value));
                true
            }
        }
    }

    pub fn with(&self, s: usize, b: usize, value: bool) -> Option<Self> {
        let mut h = self.clone();
        h.push(s, b, value).then_some(h)
    }

    pub fn fixed(&self, s: usize, b: usize) -> Option<bool> {
        self.triples.iter().find(|&&(ts, tb, _)| ts == s && tb == b).map(|&(_, _, v)| v)
    }

    /// Blocks fixed to 1 for `s`, sorted.
    pub fn ones(&self, s: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.triples.iter().filter(|t| t.0 == s && t.2).map(|t| t.1).collect();
        v.sort_unstable();
        v
    }

    /// Whether the pattern respects every decision on its surgeon.
    pub fn admits(&self, pattern: &Pattern) -> bool {
        self.triples
            .iter()
            .filter(|t| t.0 == pattern.surgeon)
            .all(|&(_, b, v)| pattern.blocks.binary_search(&b).is_ok() == v)
    }
}

/// Whether one surgeon may hold exactly these blocks on its own.
fn blocks_feasible_for(inst: &Instance, s: usize, blocks: &[usize]) -> bool {
    if blocks.len() as u32 > inst.v_horizon || blocks.iter().any(|&b| inst.is_unavailable(s, b)) {
        return false;
    }
    let mut per_day = vec![0u32; inst.days];
    let mut per_point = vec![0u32; inst.num_points()];
    for &b in blocks {
        per_day[inst.blocks[b].day] += 1;
        for &pt in inst.block_points(b) {
            per_point[pt] += 1;
        }
    }
    per_day.iter().all(|&n| n <= inst.v_day) && per_point.iter().all(|&n| n <= inst.rooms)
}

/// The pattern holding exactly the blocks fixed to 1, with a follower-optimal
/// plan; `None` when those blocks are infeasible for the surgeon.
pub fn default_pattern(inst: &Instance, s: usize, history: &BranchHistory, cache: &FollowerCache) -> Option<Pattern> {
    let blocks = history.ones(s);
    if !blocks_feasible_for(inst, s, &blocks) {
        return None;
    }
    let resp = cache.solve(inst, s, &blocks, FollowerMode::Pure);
    Some(Pattern::from_response(s, blocks, resp))
}

/// Dual prices of the master: `lambda[pt] <= 0` per grid point, `mu[s]` per surgeon.
#[derive(Debug, Clone, PartialEq)]
pub struct RmpDuals {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

impl RmpDuals {
    pub fn zero(inst: &Instance) -> Self {
        RmpDuals { lambda: vec![0.0; inst.num_points()], mu: vec![0.0; inst.surgeons.len()] }
    }

    /// Σ of `lambda` over the grid points block `b` covers.
    pub fn block_price(&self, inst: &Instance, b: usize) -> f64 {
        inst.block_points(b).iter().map(|&pt| self.lambda[pt]).sum()
    }

    /// `Σ λ a + μ_s − cost`.
    pub fn reduced_cost(&self, inst: &Instance, pattern: &Pattern) -> f64 {
        pattern.blocks.iter().map(|&b| self.block_price(inst, b)).sum::<f64>() + self.mu[pattern.surgeon]
            - to_f64(&pattern.cost(inst))
    }
}

#[derive(Debug, Clone)]
pub struct RmpSolution {
    /// Leader objective of the relaxation, constant included.
    pub objective: f64,
    /// `theta[i]` belongs to `columns[i]`; inadmissible columns get 0.
    pub theta: Vec<f64>,
    pub duals: RmpDuals,
}

/// `α C`: the leader objective minus the summed column costs.
fn master_constant(inst: &Instance) -> Rational {
    inst.alpha * Rational::from(inst.capacity as i128)
}

/// Master LP over the columns admissible under `history`.
pub fn solve_rmp(inst: &Instance, columns: &[Pattern], history: &BranchHistory) -> Result<RmpSolution, SolveError> {
    let mut lp = LinearProgram::new(Sense::Minimize);
    let ns = inst.surgeons.len();
    let mut vars: Vec<Option<VarId>> = vec![None; columns.len()];
    let mut point_rows: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); inst.num_points()];
    let mut conv_rows: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); ns];
    for (i, col) in columns.iter().enumerate() {
        if !history.admits(col) {
            continue;
        }
        let v = lp.add_var(format!("theta_{i}"), 0.0, f64::INFINITY, to_f64(&col.cost(inst)));
        vars[i] = Some(v);
        for (pt, n) in col.coverage(inst) {
            point_rows[pt].push((v, n as f64));
        }
        conv_rows[col.surgeon].push((v, 1.0));
    }
    let mut row_of_point = vec![None; inst.num_points()];
    for (pt, row) in point_rows.into_iter().enumerate() {
        if !row.is_empty() {
            row_of_point[pt] = Some(lp.add_constraint(Constraint::le(row, inst.rooms as f64)));
        }
    }
    let mut row_of_surgeon = Vec::with_capacity(ns);
    for (s, row) in conv_rows.into_iter().enumerate() {
        if row.is_empty() {
            return Err(SolveError::Internal(format!("no admissible column for surgeon {s}")));
        }
        row_of_surgeon.push(lp.add_constraint(Constraint::eq(row, 1.0)));
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(SolveError::Internal(format!("restricted master ended {:?}", sol.status)));
    }
    let lambda = row_of_point.iter().map(|r| r.map_or(0.0, |r| sol.duals[r].min(0.0))).collect();
    let mu = row_of_surgeon.iter().map(|&r| sol.duals[r]).collect();
    let theta = vars.iter().map(|v| v.map_or(0.0, |v| sol.primal[v.0])).collect();
    Ok(RmpSolution { objective: sol.objective + to_f64(&master_constant(inst)), theta, duals: RmpDuals { lambda, mu } })
}

/// Result of one pricing subproblem.
#[derive(Debug, Clone, Default)]
pub struct PricingOutcome {
    /// A pattern with reduced cost above [`EPS_RC`], if one exists.
    pub pattern: Option<Pattern>,
    /// Proven upper bound on the best reduced cost of the surgeon.
    pub rc_bound: f64,
    /// Cuts generated by this subproblem's callback, in order.
    pub cuts: Vec<CutEvent>,
    pub callbacks: usize,
    /// Branch-and-bound nodes of the pricing MIP.
    pub nodes: usize,
    pub t_cb: Duration,
}

/// Follower mode used by the pricing callback for a cut family.
pub fn pricing_follower_mode(kind: CutKind) -> FollowerMode {
    match kind {
        CutKind::Olc => FollowerMode::Pure,
        CutKind::Alc => FollowerMode::OptimisticSubproblem,
    }
}

/// The best-priced block set of one surgeon for one length profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileChoice {
    /// Blocks held per length index.
    pub profile: Vec<u32>,
    /// Σ of block prices over `blocks`.
    pub price: f64,
    /// Sorted block ids.
    pub blocks: Vec<usize>,
}

/// Block subsets of one day the surgeon may hold: at most `v_d` blocks, every
/// block fixed to 1 on that day, and at most `R` of them in progress at once.
fn day_options(inst: &Instance, s: usize, d: usize, history: &BranchHistory, duals: &RmpDuals) -> Vec<ProfileChoice> {
    let cands: Vec<usize> = (0..inst.blocks.len())
        .filter(|&b| inst.blocks[b].day == d && !inst.is_unavailable(s, b) && history.fixed(s, b) != Some(false))
        .collect();
    let forced: Vec<usize> = cands.iter().copied().filter(|&b| history.fixed(s, b) == Some(true)).collect();
    let mut best: HashMap<Vec<u32>, ProfileChoice> = HashMap::new();
    let mut order: Vec<Vec<u32>> = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    let mut load = vec![0u32; inst.num_points()];

    #[allow(clippy::too_many_arguments)]
    fn rec(
        inst: &Instance,
        duals: &RmpDuals,
        cands: &[usize],
        forced: &[usize],
        next: usize,
        cur: &mut Vec<usize>,
        load: &mut [u32],
        best: &mut HashMap<Vec<u32>, ProfileChoice>,
        order: &mut Vec<Vec<u32>>,
    ) {
        if forced.iter().all(|b| cur.contains(b)) {
            let mut profile = vec![0u32; inst.lengths.len()];
            for &b in cur.iter() {
                profile[inst.length_index(b)] += 1;
            }
            let price = cur.iter().map(|&b| duals.block_price(inst, b)).sum();
            match best.get_mut(&profile) {
                Some(e) if e.price >= price => {}
                Some(e) => *e = ProfileChoice { profile: profile.clone(), price, blocks: cur.clone() },
                None => {
                    order.push(profile.clone());
                    best.insert(profile.clone(), ProfileChoice { profile, price, blocks: cur.clone() });
                }
            }
        }
        if cur.len() as u32 >= inst.v_day {
            return;
        }
        for i in next..cands.len() {
            let b = cands[i];
            if inst.block_points(b).iter().any(|&pt| load[pt] >= inst.rooms) {
                continue;
            }
            cur.push(b);
            for &pt in inst.block_points(b) {
                load[pt] += 1;
            }
            rec(inst, duals, cands, forced, i + 1, cur, load, best, order);
            for &pt in inst.block_points(b) {
                load[pt] -= 1;
            }
            cur.pop();
        }
    }
    rec(inst, duals, &cands, &forced, 0, &mut cur, &mut load, &mut best, &mut order);
    order.into_iter().map(|p| best.remove(&p).expect("recorded profile")).collect()
}

/// For every length profile the surgeon may hold under `history`, the block
/// set of maximum total price. Sorted by profile.
pub fn block_profiles(inst: &Instance, s: usize, duals: &RmpDuals, history: &BranchHistory) -> Vec<ProfileChoice> {
    let mut acc: BTreeMap<Vec<u32>, ProfileChoice> = BTreeMap::new();
    let zero = vec![0u32; inst.lengths.len()];
    acc.insert(zero.clone(), ProfileChoice { profile: zero, price: 0.0, blocks: Vec::new() });
    for d in 0..inst.days {
        let options = day_options(inst, s, d, history, duals);
        let mut next: BTreeMap<Vec<u32>, ProfileChoice> = BTreeMap::new();
        for base in acc.values() {
            for opt in &options {
                let total: u32 = base.profile.iter().sum::<u32>() + opt.blocks.len() as u32;
                if total > inst.v_horizon {
                    continue;
                }
                let profile: Vec<u32> = base.profile.iter().zip(&opt.profile).map(|(a, b)| a + b).collect();
                let price = base.price + opt.price;
                if next.get(&profile).is_some_and(|e| e.price >= price) {
                    continue;
                }
                let mut blocks = base.blocks.clone();
                blocks.extend(&opt.blocks);
                next.insert(profile.clone(), ProfileChoice { profile, price, blocks });
            }
        }
        acc = next;
    }
    acc.into_values()
        .map(|mut c| {
            c.blocks.sort_unstable();
            c
        })
        .collect()
}

struct PricingModel {
    mip: MipProblem,
    choices: Vec<ProfileChoice>,
    /// `z[i]` selects `choices[i]`.
    z: Vec<VarId>,
    /// Per patient position: ((length index, copy), var).
    x: Vec<Vec<((usize, usize), VarId)>>,
    x_vars: Vec<Vec<VarId>>,
    qlink: QLink,
}

/// Pricing MIP of one surgeon.
///
/// The block schedule is chosen through its length profile, each profile
/// standing for its best-priced block set. Patients are packed into bins
/// `(l, k)`, the `k`-th held block of length `l`, which exist when
/// `Σ_{w ≥ k} q_lw = 1`. Since a surgeon's own plan only depends on the
/// lengths it holds, this is equivalent to packing into the blocks themselves.
fn build_pricing_model(inst: &Instance, s: usize, duals: &RmpDuals, history: &BranchHistory) -> PricingModel {
    let mut mip = MipProblem::new(LinearProgram::new(Sense::Maximize));
    let choices = block_profiles(inst, s, duals, history);
    let z: Vec<VarId> = choices.iter().enumerate().map(|(i, c)| mip.add_binary(format!("z_{i}"), c.price)).collect();
    mip.lp.add_constraint(Constraint::eq(z.iter().map(|&v| (v, 1.0)).collect(), 1.0));
    let mut q = Vec::with_capacity(inst.lengths.len());
    for l in 0..inst.lengths.len() {
        let vars: Vec<VarId> = (0..=w_max(inst, l)).map(|w| mip.add_binary(format!("q_{l}_{w}"), 0.0)).collect();
        for (w, &qv) in vars.iter().enumerate() {
            let mut row = vec![(qv, 1.0)];
            row.extend(choices.iter().zip(&z).filter(|(c, _)| c.profile[l] as usize == w).map(|(_, &zv)| (zv, -1.0)));
            mip.lp.add_constraint(Constraint::eq(row, 0.0));
        }
        q.push(vars);
    }
    let qlink = QLink { q };

    // Larger patients first; patient j may only use copies 1..=j+1 of a length.
    let sg = &inst.surgeons[s];
    let mut order: Vec<usize> = (0..sg.patients.len()).collect();
    order.sort_by_key(|&k| (std::cmp::Reverse(inst.patients[sg.patients[k]].duration), k));
    let mut x = vec![Vec::new(); sg.patients.len()];
    let mut cap: BTreeMap<(usize, usize), Vec<(VarId, f64)>> = BTreeMap::new();
    for (j, &k) in order.iter().enumerate() {
        let p = sg.patients[k];
        let pt = &inst.patients[p];
        let gain = to_f64(&inst.leader_gain(p));
        for (l, &len) in inst.lengths.iter().enumerate() {
            if pt.duration > len {
                continue;
            }
            for copy in 1..qlink.q[l].len().min(j + 2) {
                let v = mip.add_binary(format!("x_{p}_{l}_{copy}"), gain);
                let mut link = vec![(v, 1.0)];
                link.extend(qlink.q[l][copy..].iter().map(|&qv| (qv, -1.0)));
                mip.lp.add_constraint(Constraint::le(link, 0.0));
                x[k].push(((l, copy), v));
                cap.entry((l, copy)).or_default().push((v, pt.duration as f64));
            }
        }
        if x[k].len() > 1 {
            mip.lp.add_constraint(Constraint::le(x[k].iter().map(|&(_, v)| (v, 1.0)).collect(), 1.0));
        }
    }
    for ((l, copy), mut row) in cap {
        if row.len() > 1 {
            let len = inst.lengths[l] as f64;
            row.extend(qlink.q[l][copy..].iter().map(|&qv| (qv, -len)));
            mip.lp.add_constraint(Constraint::le(row, 0.0));
        }
    }
    let x_vars = x.iter().map(|row| row.iter().map(|&(_, v)| v).collect()).collect();
    PricingModel { mip, choices, z, x, x_vars, qlink }
}

impl PricingModel {
    /// Held blocks and (patient position, block) pairs of a candidate.
    fn decode(&self, inst: &Instance, values: &[f64]) -> (Vec<usize>, Vec<(usize, usize)>) {
        let chosen = self.z.iter().position(|v| values[v.0] > 0.5).expect("one profile is selected");
        let blocks = self.choices[chosen].blocks.clone();
        let mut by_length: Vec<Vec<usize>> = vec![Vec::new(); inst.lengths.len()];
        for &b in &blocks {
            by_length[inst.length_index(b)].push(b);
        }
        let mut pairs = Vec::new();
        for (k, row) in self.x.iter().enumerate() {
            for &((l, copy), v) in row {
                if values[v.0] > 0.5 {
                    pairs.push((k, by_length[l][copy - 1]));
                }
            }
        }
        (blocks, pairs)
    }
}

/// Exact pricing by enumerating length profiles: each profile's best block
/// set is paired with the follower response that is best for the leader.
pub fn price_surgeon_by_profiles(
    inst: &Instance,
    s: usize,
    duals: &RmpDuals,
    history: &BranchHistory,
    cache: &FollowerCache,
) -> PricingOutcome {
    let mut best: Option<(f64, Pattern)> = None;
    for choice in block_profiles(inst, s, duals, history) {
        let resp = cache.solve(inst, s, &choice.blocks, FollowerMode::OptimisticSubproblem);
        let pattern = Pattern::from_response(s, choice.blocks, resp);
        let rc = duals.reduced_cost(inst, &pattern);
        if best.as_ref().is_none_or(|(b, _)| rc > *b) {
            best = Some((rc, pattern));
        }
    }
    let (rc, pattern) = best.expect("the empty profile is always available when the default pattern is");
    PricingOutcome { rc_bound: rc, pattern: (rc > EPS_RC).then_some(pattern), ..Default::default() }
}

/// Finds the surgeon's pattern of maximum reduced cost among bilevel-feasible ones.
///
/// Every remembered cut of the surgeon is added up front. New cuts are
/// returned, not recorded; the caller decides where they go.
#[allow(clippy::too_many_arguments)]
pub fn price_surgeon(
    inst: &Instance,
    s: usize,
    duals: &RmpDuals,
    history: &BranchHistory,
    remembered: &[LazyCut],
    cut_kind: CutKind,
    cache: &FollowerCache,
    time_limit: Option<Duration>,
) -> Result<PricingOutcome, SolveError> {
    let mut model = build_pricing_model(inst, s, duals, history);
    for cut in remembered {
        let row = build_cut(inst, cut, &model.qlink, &model.x_vars)
            .map_err(|e| SolveError::Internal(format!("remembered cut: {e}")))?;
        model.mip.lp.add_constraint(row);
    }
    let sg = &inst.surgeons[s];
    let constant = duals.mu[s]
        - to_f64(&(inst.beta * Rational::from(inst.leader_priority_sum(sg.patients.iter().copied()) as i128)));
    let mode = pricing_follower_mode(cut_kind);
    let mut out = PricingOutcome::default();
    let mut cut_error = None;

    let model_ref = &model;
    let mut callback = |values: &[f64]| -> CallbackAction {
        let t0 = Instant::now();
        out.callbacks += 1;
        let (blocks, pairs) = model_ref.decode(inst, values);
        let own: Vec<usize> = pairs.iter().map(|&(k, _)| sg.patients[k]).collect();
        let f: i64 = own.iter().map(|&p| inst.patients[p].prio_follower as i64).sum();
        let resp = cache.solve(inst, s, &blocks, mode);
        let action = if f >= resp.f_prime {
            CallbackAction::Accept
        } else {
            let profile = BlockCountProfile::of_blocks(inst, &blocks);
            let cut = match cut_kind {
                CutKind::Olc => LazyCut::olc(s, profile, resp.f_prime),
                CutKind::Alc => LazyCut::alc(s, profile, resp.patients()),
            };
            match build_cut(inst, &cut, &model_ref.qlink, &model_ref.x_vars) {
                Ok(row) => {
                    let mut trigger_patients = own;
                    trigger_patients.sort_unstable();
                    out.cuts.push(CutEvent { cut, trigger_blocks: blocks, trigger_patients });
                    CallbackAction::AddCuts(vec![row])
                }
                Err(e) => {
                    cut_error.get_or_insert(e);
                    CallbackAction::Accept
                }
            }
        };
        out.t_cb += t0.elapsed();
        action
    };
    let opts = MipOptions { time_limit, gap_tol: 1e-7, cutoff: Some(EPS_RC - constant), ..Default::default() };
    let res = solve_mip(&model.mip, &opts, Some(&mut callback))?;
    if let Some(e) = cut_error {
        return Err(SolveError::Internal(format!("pricing cut: {e}")));
    }
    out.nodes = res.stats.nodes;
    match res.status {
        MipStatus::Optimal | MipStatus::Infeasible | MipStatus::TimeLimit | MipStatus::NodeLimit => {}
        MipStatus::Unbounded => return Err(SolveError::Internal("pricing model unbounded".into())),
    }
    out.rc_bound = match res.status {
        MipStatus::Infeasible => EPS_RC,
        _ => res.bound + constant,
    };
    if let Some(values) = &res.incumbent {
        let (blocks, pairs) = model.decode(inst, values);
        let plan = pairs.iter().map(|&(k, b)| (sg.patients[k], b)).collect();
        let pattern = Pattern::from_plan(inst, s, blocks, plan);
        if duals.reduced_cost(inst, &pattern) > EPS_RC {
            out.pattern = Some(pattern);
        }
    }
    Ok(out)
}

/// Picks the fractional `y` closest to 0.5; ties go to the smaller (surgeon, block).
pub fn select_branch_variable(y_values: &[((usize, usize), f64)]) -> Option<(usize, usize)> {
    y_values
        .iter()
        .filter(|(_, v)| (v - v.round()).abs() > FRAC_TOL)
        .min_by(|a, b| {
            let da = (a.1 - 0.5).abs();
            let db = (b.1 - 0.5).abs();
            da.partial_cmp(&db).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0))
        })
        .map(|&(k, _)| k)
}

/// Integer master over `columns` admissible under `history`; returns the best
/// assignment strictly better than `cutoff` (leader objective) if found within the budget.
pub fn master_heuristic(
    inst: &Instance,
    columns: &[Pattern],
    history: &BranchHistory,
    cutoff: Option<Rational>,
    node_limit: Option<usize>,
    time_limit: Option<Duration>,
) -> Result<Option<Assignment>, SolveError> {
    let mut mip = MipProblem::new(LinearProgram::new(Sense::Minimize));
    let ns = inst.surgeons.len();
    let mut chosen: Vec<(usize, VarId)> = Vec::new();
    let mut point_rows: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); inst.num_points()];
    let mut conv_rows: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); ns];
    for (i, col) in columns.iter().enumerate() {
        if !history.admits(col) {
            continue;
        }
        let v = mip.add_binary(format!("theta_{i}"), to_f64(&col.cost(inst)));
        chosen.push((i, v));
        for (pt, n) in col.coverage(inst) {
            point_rows[pt].push((v, n as f64));
        }
        conv_rows[col.surgeon].push((v, 1.0));
    }
    for row in point_rows {
        if row.len() > inst.rooms as usize {
            mip.lp.add_constraint(Constraint::le(row, inst.rooms as f64));
        }
    }
    for row in conv_rows {
        if row.is_empty() {
            return Ok(None);
        }
        mip.lp.add_constraint(Constraint::eq(row, 1.0));
    }
    let constant = master_constant(inst);
    let opts = MipOptions {
        time_limit,
        node_limit,
        gap_tol: 1e-9,
        cutoff: cutoff.map(|c| to_f64(&(c - constant))),
        objective_step: Some(1.0 / inst.weight_denominator() as f64),
        ..Default::default()
    };
    let res = solve_mip(&mip, &opts, None)?;
    let Some(values) = res.incumbent else { return Ok(None) };
    let mut asg = Assignment::new();
    for &(i, v) in &chosen {
        if values[v.0] > 0.5 {
            let col = &columns[i];
            asg.y.extend(col.blocks.iter().map(|&b| (col.surgeon, b)));
            asg.x.extend(col.patients.iter().copied());
        }
    }
    if cutoff.is_some_and(|c| leader_objective(inst, &asg) >= c) {
        return Ok(None);
    }
    Ok(Some(asg))
}

/// How pricing subproblems are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PricingEngine {
    /// MIP over length profiles and patient bins with a lazy-cut callback.
    Mip,
    /// Enumeration of length profiles with cached follower responses.
    Profiles,
}

#[derive(Debug, Clone)]
pub struct BnpOptions {
    pub cut_kind: CutKind,
    pub pricing: PricingEngine,
    /// Price every surgeon per iteration and add all improving patterns.
    pub multi_pattern: bool,
    /// Remember lazy cuts across pricing runs.
    pub use_lcr: bool,
    pub use_initial_heuristic: bool,
    pub time_limit: Option<Duration>,
    /// Node budget of the master heuristic.
    pub heuristic_node_limit: usize,
}

impl Default for BnpOptions {
    fn default() -> Self {
        BnpOptions {
            cut_kind: CutKind::Alc,
            pricing: PricingEngine::Mip,
            multi_pattern: true,
            use_lcr: true,
            use_initial_heuristic: true,
            time_limit: None,
            heuristic_node_limit: 2000,
        }
    }
}

/// State of column generation at one node.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    /// Converged relaxation value, or the best valid bound when interrupted.
    pub bound: f64,
    pub converged: bool,
    /// `(surgeon, block) -> Σ_k a_kb θ_k`, sorted by key.
    pub y: Vec<((usize, usize), f64)>,
    pub rmp: Option<RmpSolution>,
    /// Stopped because the bound proves the node cannot improve the incumbent.
    pub pruned_early: bool,
}

#[derive(Debug)]
struct OpenNode {
    bound: f64,
    seq: u64,
    history: BranchHistory,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    /// Reversed so the max-heap pops the smallest bound, then the oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then(other.seq.cmp(&self.seq))
    }
}

/// Branch-and-price driver with a global column pool.
pub struct BranchAndPrice<'a> {
    inst: &'a Instance,
    opts: BnpOptions,
    cache: FollowerCache,
    store: LcrStore,
    pool: Vec<Pattern>,
    keys: HashSet<Pattern>,
    stats: SolveStats,
    incumbent: Option<(Rational, Assignment)>,
    incumbents: Vec<(Rational, Assignment)>,
    cut_log: Vec<CutEvent>,
    pricing_nodes: usize,
    start: Instant,
    deadline: Option<Instant>,
}

impl<'a> BranchAndPrice<'a> {
    pub fn new(inst: &'a Instance, opts: BnpOptions) -> Self {
        let start = Instant::now();
        BranchAndPrice {
            inst,
            cache: FollowerCache::new(),
            store: LcrStore::new(inst.surgeons.len()),
            pool: Vec::new(),
            keys: HashSet::new(),
            stats: SolveStats::default(),
            incumbent: None,
            incumbents: Vec::new(),
            cut_log: Vec::new(),
            pricing_nodes: 0,
            start,
            deadline: opts.time_limit.map(|t| start + t),
            opts,
        }
    }

    pub fn pool(&self) -> &[Pattern] {
        &self.pool
    }

    pub fn lcr_store(&self) -> &LcrStore {
        &self.store
    }

    pub fn incumbent(&self) -> Option<&(Rational, Assignment)> {
        self.incumbent.as_ref()
    }

    /// Adds a column unless an identical one is pooled.
    pub fn add_column(&mut self, pattern: Pattern) -> bool {
        if self.keys.contains(&pattern) {
            return false;
        }
        self.keys.insert(pattern.clone());
        self.pool.push(pattern);
        true
    }

    fn remaining(&self) -> Option<Duration> {
        self.deadline.map(|d| d.saturating_duration_since(Instant::now()))
    }

    fn out_of_time(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    fn offer_incumbent(&mut self, asg: Assignment) {
        let value = leader_objective(self.inst, &asg);
        if self.incumbent.as_ref().is_none_or(|(v, _)| value < *v) {
            log::debug!("incumbent {value}");
            self.incumbents.push((value, asg.clone()));
            self.incumbent = Some((value, asg));
        }
    }

    /// Value a node bound must stay below to possibly improve the incumbent.
    fn improvement_threshold(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|(v, _)| to_f64(v) - 1.0 / self.inst.weight_denominator() as f64)
    }

    fn cannot_improve(&self, bound: f64) -> bool {
        self.improvement_threshold().is_some_and(|t| bound - 1e-6 * (1.0 + bound.abs()) > t)
    }

    /// Ensures the pool holds every surgeon's default pattern under `history`.
    fn ensure_defaults(&mut self, history: &BranchHistory) -> bool {
        for s in 0..self.inst.surgeons.len() {
            match default_pattern(self.inst, s, history, &self.cache) {
                Some(p) => {
                    self.add_column(p);
                }
                None => return false,
            }
        }
        true
    }

    /// Seeds the pool with empty-schedule columns and, when enabled, the initial heuristic.
    pub fn seed(&mut self) {
        self.ensure_defaults(&BranchHistory::new());
        if self.opts.use_initial_heuristic {
            let seed = initial_heuristic(self.inst);
            for p in seed.patterns {
                self.add_column(p);
            }
            if self.opts.use_lcr {
                for c in seed.cuts.into_iter().filter(|c| c.kind == self.opts.cut_kind) {
                    self.store.record(c);
                }
            }
            self.offer_incumbent(seed.assignment);
        }
    }

    fn record_pricing(&mut self, out: PricingOutcome) -> Option<Pattern> {
        self.pricing_nodes += out.nodes;
        self.stats.n_cbs += out.callbacks;
        self.stats.n_lcs += out.cuts.len();
        self.stats.t_cb += out.t_cb;
        for mut ev in out.cuts {
            ev.cut.counter = self.cut_log.len();
            if self.opts.use_lcr {
                self.store.record(ev.cut.clone());
            }
            self.cut_log.push(ev);
        }
        out.pattern
    }

    fn price(&self, s: usize, duals: &RmpDuals, history: &BranchHistory) -> Result<PricingOutcome, SolveError> {
        if self.opts.pricing == PricingEngine::Profiles {
            return Ok(price_surgeon_by_profiles(self.inst, s, duals, history, &self.cache));
        }
        let remembered = if self.opts.use_lcr { self.store.retrieve(s) } else { Vec::new() };
        price_surgeon(self.inst, s, duals, history, &remembered, self.opts.cut_kind, &self.cache, self.remaining())
    }

    /// Alternates master and pricing until no improving pattern exists.
    pub fn run_column_generation(&mut self, history: &BranchHistory) -> Result<CgOutcome, SolveError> {
        let ns = self.inst.surgeons.len();
        let mut lagrange = f64::NEG_INFINITY;
        loop {
            let t0 = Instant::now();
            let rmp = solve_rmp(self.inst, &self.pool, history)?;
            self.stats.t_mp += t0.elapsed();
            self.stats.n_cgi += 1;
            if self.out_of_time() {
                return Ok(self.cg_result(lagrange, false, rmp, false));
            }
            let t1 = Instant::now();
            let mut found = Vec::new();
            let mut rc_sum = 0.0;
            if self.opts.multi_pattern {
                let outs: Vec<Result<PricingOutcome, SolveError>> =
                    (0..ns).into_par_iter().map(|s| self.price(s, &rmp.duals, history)).collect();
                for out in outs {
                    let out = out?;
                    rc_sum += out.rc_bound.max(0.0);
                    found.extend(self.record_pricing(out));
                }
            } else {
                for s in 0..ns {
                    let out = self.price(s, &rmp.duals, history)?;
                    rc_sum += out.rc_bound.max(0.0);
                    if let Some(p) = self.record_pricing(out) {
                        found.push(p);
                        break;
                    }
                }
            }
            self.stats.t_sp += t1.elapsed();
            log::trace!(
                "cg iteration {}: master {:.6}, {} patterns, {} pricing nodes so far, {:.2?} pricing",
                self.stats.n_cgi,
                rmp.objective,
                found.len(),
                self.pricing_nodes,
                self.stats.t_sp
            );
            let complete = self.opts.multi_pattern || found.is_empty();
            if complete && !self.out_of_time() {
                lagrange = lagrange.max(rmp.objective - rc_sum);
            }
            let mut added = 0;
            for p in found {
                if self.add_column(p) {
                    added += 1;
                    self.stats.n_cols += 1;
                }
            }
            if added == 0 {
                let converged = !self.out_of_time();
                let bound = if converged { rmp.objective } else { lagrange };
                return Ok(self.cg_result(bound, converged, rmp, false));
            }
            if self.cannot_improve(lagrange) {
                return Ok(self.cg_result(lagrange, false, rmp, true));
            }
            if self.out_of_time() {
                return Ok(self.cg_result(lagrange, false, rmp, false));
            }
        }
    }

    fn cg_result(&self, bound: f64, converged: bool, rmp: RmpSolution, pruned_early: bool) -> CgOutcome {
        let mut y: HashMap<(usize, usize), f64> = HashMap::new();
        for (col, &t) in self.pool.iter().zip(&rmp.theta) {
            if t > 1e-12 {
                for &b in &col.blocks {
                    *y.entry((col.surgeon, b)).or_insert(0.0) += t;
                }
            }
        }
        let mut y: Vec<((usize, usize), f64)> = y.into_iter().collect();
        y.sort_by_key(|e| e.0);
        CgOutcome { bound, converged, y, rmp: Some(rmp), pruned_early }
    }

    /// Cheapest support column per surgeon; valid when `y` is integral.
    fn integral_assignment(&self, rmp: &RmpSolution) -> Assignment {
        let mut best: Vec<Option<usize>> = vec![None; self.inst.surgeons.len()];
        for (i, (col, &t)) in self.pool.iter().zip(&rmp.theta).enumerate() {
            if t <= 1e-9 {
                continue;
            }
            let slot = &mut best[col.surgeon];
            if slot.is_none_or(|j| col.cost(self.inst) < self.pool[j].cost(self.inst)) {
                *slot = Some(i);
            }
        }
        let mut asg = Assignment::new();
        for i in best.into_iter().flatten() {
            let col = &self.pool[i];
            asg.y.extend(col.blocks.iter().map(|&b| (col.surgeon, b)));
            asg.x.extend(col.patients.iter().copied());
        }
        asg
    }

    pub fn solve(mut self) -> Result<SolveOutcome, SolveError> {
        self.seed();
        let mut queue = BinaryHeap::new();
        let mut seq = 0u64;
        queue.push(OpenNode { bound: f64::NEG_INFINITY, seq, history: BranchHistory::new() });
        let mut timed_out_bound: Option<f64> = None;

        while let Some(node) = queue.pop() {
            if self.cannot_improve(node.bound) {
                continue;
            }
            if self.out_of_time() {
                timed_out_bound = Some(node.bound);
                queue.push(node);
                break;
            }
            self.stats.n_nodes += 1;
            if !self.ensure_defaults(&node.history) {
                continue;
            }
            let cg = self.run_column_generation(&node.history)?;
            let bound = cg.bound.max(node.bound);
            if self.stats.n_nodes == 1 {
                self.stats.f_lpr_root = Some(cg.bound);
            }
            log::debug!(
                "node {} bound {bound:.6} converged {} depth {} columns {}",
                self.stats.n_nodes,
                cg.converged,
                node.history.triples().len(),
                self.pool.len()
            );
            if !cg.converged {
                if cg.pruned_early {
                    continue;
                }
                timed_out_bound = Some(bound);
                queue.push(OpenNode { bound, ..node });
                break;
            }
            let rmp = cg.rmp.expect("converged node has a master solution");
            if self.opts.heuristic_node_limit > 0 {
                let cutoff = self.incumbent.as_ref().map(|(v, _)| *v);
                let t0 = Instant::now();
                let found = master_heuristic(
                    self.inst,
                    &self.pool,
                    &node.history,
                    cutoff,
                    Some(self.opts.heuristic_node_limit),
                    self.remaining(),
                )?;
                self.stats.t_mp += t0.elapsed();
                if let Some(asg) = found {
                    self.offer_incumbent(asg);
                }
            }
            if self.cannot_improve(bound) {
                continue;
            }
            match select_branch_variable(&cg.y) {
                None => {
                    let asg = self.integral_assignment(&rmp);
                    self.offer_incumbent(asg);
                }
                Some((s, b)) => {
                    for value in [true, false] {
                        if let Some(history) = node.history.with(s, b, value) {
                            seq += 1;
                            queue.push(OpenNode { bound, seq, history });
                        }
                    }
                }
            }
        }

        let status = if timed_out_bound.is_some() { SolveStatus::TimeLimit } else { SolveStatus::Optimal };
        let (value, assignment) = match &self.incumbent {
            Some((v, a)) => (Some(*v), Some(a.clone())),
            None => (None, None),
        };
        let bound = match status {
            SolveStatus::Optimal => value.map(|v| to_f64(&v)).unwrap_or(f64::INFINITY),
            SolveStatus::TimeLimit => {
                let open = queue.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
                let b = open.min(timed_out_bound.unwrap_or(f64::INFINITY));
                match value {
                    Some(v) => b.min(to_f64(&v)),
                    None => b,
                }
            }
        };
        if let Some(asg) = &assignment {
            if !crate::follower::is_bilevel_feasible(self.inst, asg) {
                return Err(SolveError::Internal("branch-and-price incumbent is not bilevel feasible".into()));
            }
        }
        self.stats.t_total = self.start.elapsed();
        Ok(SolveOutcome {
            status,
            assignment,
            value,
            bound,
            stats: self.stats,
            incumbents: self.incumbents,
            cut_log: self.cut_log,
        })
    }
}

pub fn solve_bnp(inst: &Instance, opts: &BnpOptions) -> Result<SolveOutcome, SolveError> {
    BranchAndPrice::new(inst, opts.clone()).solve()
}
