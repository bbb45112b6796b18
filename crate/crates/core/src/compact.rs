//! Leader MIP with a bilevel-feasibility callback that injects lazy cuts.

use std::time::{Duration, Instant};

use optkern::{solve_mip, CallbackAction, MipOptions, MipStatus};

use crate::cuts::{build_cut, BlockCountProfile, CutEvent, CutKind, LazyCut};
use crate::domain::{leader_objective, Instance, Rational};
use crate::follower::{is_bilevel_feasible, FollowerCache, FollowerMode};
use crate::leader_model::{LeaderModel, LeaderObjective};
use crate::outcome::{SolveError, SolveOutcome, SolveStats, SolveStatus};
use crate::ratio::to_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutScope {
    /// One cut for the first violated surgeon.
    FirstViolated,
    /// One cut for every violated surgeon.
    AllViolated,
}

#[derive(Debug, Clone)]
pub struct CompactOptions {
    pub cut_kind: CutKind,
    pub cut_scope: CutScope,
    pub time_limit: Option<Duration>,
    /// Absolute optimality gap on `F`.
    pub gap_tol: f64,
}

impl Default for CompactOptions {
    fn default() -> Self {
        Self { cut_kind: CutKind::Alc, cut_scope: CutScope::AllViolated, time_limit: None, gap_tol: 1e-6 }
    }
}

/// Follower mode the callback uses for a cut family.
pub fn compact_follower_mode(kind: CutKind) -> FollowerMode {
    match kind {
        CutKind::Olc => FollowerMode::Pure,
        CutKind::Alc => FollowerMode::OptimisticCompact,
    }
}

pub fn solve_compact(inst: &Instance, opts: &CompactOptions) -> Result<SolveOutcome, SolveError> {
    let start = Instant::now();
    let model = LeaderModel::build(inst, LeaderObjective::LeaderMin, true);
    let constant = inst.objective_constant();
    let cache = FollowerCache::new();
    let mode = compact_follower_mode(opts.cut_kind);

    let mut cut_log: Vec<CutEvent> = Vec::new();
    let mut incumbents: Vec<(Rational, crate::domain::Assignment)> = Vec::new();
    let mut t_cb = Duration::ZERO;
    let mut cut_error = None;

    let mut callback = |values: &[f64]| -> CallbackAction {
        let t0 = Instant::now();
        let asg = model.decode(values);
        let mut rows = Vec::new();
        for s in 0..inst.surgeons.len() {
            let blocks = asg.blocks_of(s);
            let own: Vec<usize> = asg.patients_of(inst, s).into_iter().map(|(p, _)| p).collect();
            let f: i64 = own.iter().map(|&p| inst.patients[p].prio_follower as i64).sum();
            let resp = cache.solve(inst, s, &blocks, mode);
            if f >= resp.f_prime {
                continue;
            }
            let profile = BlockCountProfile::of_blocks(inst, &blocks);
            let mut cut = match opts.cut_kind {
                CutKind::Olc => LazyCut::olc(s, profile, resp.f_prime),
                CutKind::Alc => LazyCut::alc(s, profile, resp.patients()),
            };
            cut.counter = cut_log.len();
            match build_cut(inst, &cut, &model.qlinks[s], &model.x_by_surgeon[s]) {
                Ok(row) => rows.push(row),
                Err(e) => {
                    cut_error.get_or_insert(e);
                    continue;
                }
            }
            cut_log.push(CutEvent { cut, trigger_blocks: blocks, trigger_patients: own });
            if opts.cut_scope == CutScope::FirstViolated {
                break;
            }
        }
        t_cb += t0.elapsed();
        if rows.is_empty() {
            let value = leader_objective(inst, &asg);
            if incumbents.last().is_none_or(|(v, _)| value < *v) {
                incumbents.push((value, asg));
            }
            CallbackAction::Accept
        } else {
            CallbackAction::AddCuts(rows)
        }
    };

    let mip_opts = MipOptions {
        time_limit: opts.time_limit,
        gap_tol: opts.gap_tol,
        objective_step: Some(1.0 / inst.weight_denominator() as f64),
        ..Default::default()
    };
    let res = solve_mip(&model.mip, &mip_opts, Some(&mut callback))?;
    if let Some(e) = cut_error {
        return Err(SolveError::Internal(format!("cut construction failed: {e}")));
    }
    let status = match res.status {
        MipStatus::Optimal => SolveStatus::Optimal,
        MipStatus::TimeLimit | MipStatus::NodeLimit => SolveStatus::TimeLimit,
        other => return Err(SolveError::Internal(format!("compact model ended with {other:?}"))),
    };
    let assignment = res.incumbent.as_ref().map(|x| model.decode(x));
    let value = match &assignment {
        Some(asg) => {
            if !is_bilevel_feasible(inst, asg) {
                return Err(SolveError::Internal("compact incumbent is not bilevel feasible".into()));
            }
            Some(leader_objective(inst, asg))
        }
        None => None,
    };
    let c = to_f64(&constant);
    let stats = SolveStats {
        f_lpr_root: res.stats.root_bound.map(|b| b + c),
        n_lcs: res.stats.lazy_cuts,
        n_cbs: res.stats.callbacks,
        n_nodes: res.stats.nodes,
        t_cb,
        t_total: start.elapsed(),
        ..Default::default()
    };
    Ok(SolveOutcome { status, assignment, value, bound: res.bound + c, stats, incumbents, cut_log })
}
