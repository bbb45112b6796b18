use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::lp::internal_costs;
use crate::model::{validate_row, Constraint, LinearProgram, Sense, VarId};
use crate::simplex::{Basis, Outcome, Simplex};
use crate::{KernelError, INTEGRALITY_TOL};

/// A linear program plus a set of variables restricted to {0, 1}.
#[derive(Debug, Clone)]
pub struct MipProblem {
    pub lp: LinearProgram,
    binary: Vec<bool>,
}

impl MipProblem {
    pub fn new(lp: LinearProgram) -> Self {
        let n = lp.num_vars();
        Self { lp, binary: vec![false; n] }
    }

    pub fn mark_binary(&mut self, v: VarId) {
        if self.binary.len() < self.lp.num_vars() {
            self.binary.resize(self.lp.num_vars(), false);
        }
        self.binary[v.0] = true;
    }

    pub fn is_binary(&self, v: VarId) -> bool {
        self.binary.get(v.0).copied().unwrap_or(false)
    }

    /// Adds a binary variable to the underlying program.
    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> VarId {
        let v = self.lp.add_unit_var(name, objective);
        self.mark_binary(v);
        v
    }
}

/// Verdict of a lazy callback on an integer-feasible candidate.
#[derive(Debug, Clone)]
pub enum CallbackAction {
    Accept,
    /// Reject the candidate; every returned row must be violated by it.
    AddCuts(Vec<Constraint>),
}

pub trait LazyCallback {
    fn on_candidate(&mut self, candidate: &[f64]) -> CallbackAction;
}

impl<F: FnMut(&[f64]) -> CallbackAction> LazyCallback for F {
    fn on_candidate(&mut self, candidate: &[f64]) -> CallbackAction {
        self(candidate)
    }
}

#[derive(Debug, Clone)]
pub struct MipOptions {
    pub time_limit: Option<Duration>,
    /// Absolute gap at which the search stops with [`MipStatus::Optimal`].
    pub gap_tol: f64,
    pub node_limit: Option<usize>,
    /// Only solutions strictly better than this value are of interest; nodes
    /// that cannot beat it are pruned.
    pub cutoff: Option<f64>,
    /// If every feasible objective value is a multiple of this step, nodes
    /// that cannot improve the incumbent by a full step are pruned.
    pub objective_step: Option<f64>,
    pub record_trace: bool,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self {
            time_limit: None,
            gap_tol: 1e-6,
            node_limit: None,
            cutoff: None,
            objective_step: None,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    /// No feasible solution (or none better than the cutoff).
    Infeasible,
    Unbounded,
    TimeLimit,
    NodeLimit,
}

/// Global bound and incumbent after a node, in the model's own sense.
#[derive(Debug, Clone, Copy)]
pub struct TracePoint {
    pub bound: f64,
    pub incumbent: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct MipStats {
    pub nodes: usize,
    pub lp_iterations: usize,
    pub callbacks: usize,
    pub lazy_cuts: usize,
    /// Objective of the root relaxation before any lazy cut.
    pub root_bound: Option<f64>,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone)]
pub struct MipResult {
    pub status: MipStatus,
    pub incumbent: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// Best proven bound in the model's own sense.
    pub bound: f64,
    pub stats: MipStats,
}

struct Node {
    bound: f64,
    seq: u64,
    fixes: Vec<(usize, f64)>,
    basis: Option<Rc<Basis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Best-bound branch-and-bound over the binaries of `mip`.
///
/// Integer-feasible LP solutions are rounded, re-checked against every row,
/// and passed to `callback` before being accepted as incumbents. Cuts the
/// callback returns are added to all nodes and the current node is re-solved.
pub fn solve_mip(
    mip: &MipProblem,
    opts: &MipOptions,
    mut callback: Option<&mut dyn LazyCallback>,
) -> Result<MipResult, KernelError> {
    let lp = &mip.lp;
    lp.validate()?;
    let start = Instant::now();
    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let n = lp.num_vars();
    let cost = internal_costs(lp);
    let mut binary = mip.binary.clone();
    binary.resize(n, false);
    let root_lo: Vec<f64> =
        lp.variables.iter().zip(&binary).map(|(v, &b)| if b { v.lower.max(0.0).ceil() } else { v.lower }).collect();
    let root_up: Vec<f64> =
        lp.variables.iter().zip(&binary).map(|(v, &b)| if b { v.upper.min(1.0).floor() } else { v.upper }).collect();
    let mut stats = MipStats::default();
    if root_lo.iter().zip(&root_up).any(|(l, u)| l > u) {
        return Ok(MipResult {
            status: MipStatus::Infeasible,
            incumbent: None,
            objective: None,
            bound: sign * f64::INFINITY,
            stats,
        });
    }
    let mut engine = Simplex::new(cost.clone(), root_lo.clone(), root_up.clone(), &lp.constraints);
    let mut rows: Vec<Constraint> = lp.constraints.clone();

    let mut incumbent: Option<Vec<f64>> = None;
    let mut inc_val = f64::INFINITY;
    let cutoff = opts.cutoff.map(|c| sign * c).unwrap_or(f64::INFINITY);
    let prunable = |bound: f64, inc_val: f64| -> bool {
        let threshold = inc_val.min(cutoff);
        if !threshold.is_finite() {
            return false;
        }
        if bound >= threshold - opts.gap_tol {
            return true;
        }
        matches!(opts.objective_step, Some(step) if bound > threshold - step + 1e-6)
    };

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node { bound: f64::NEG_INFINITY, seq, fixes: Vec::new(), basis: None });
    let mut applied: Vec<usize> = Vec::new();
    let mut status = None;
    let mut first = true;

    while let Some(node) = heap.pop() {
        if prunable(node.bound, inc_val) {
            continue;
        }
        if opts.time_limit.is_some_and(|t| start.elapsed() >= t) {
            heap.push(node);
            status = Some(MipStatus::TimeLimit);
            break;
        }
        if opts.node_limit.is_some_and(|l| stats.nodes >= l) {
            heap.push(node);
            status = Some(MipStatus::NodeLimit);
            break;
        }
        stats.nodes += 1;
        for &j in &applied {
            engine.set_bounds(j, root_lo[j], root_up[j]);
        }
        applied.clear();
        for &(j, v) in &node.fixes {
            engine.set_bounds(j, v, v);
            applied.push(j);
        }
        if let Some(b) = &node.basis {
            engine.restore(b);
        }

        loop {
            let outcome = engine.optimize()?;
            match outcome {
                Outcome::Infeasible => break,
                Outcome::Unbounded => {
                    status = Some(MipStatus::Unbounded);
                    break;
                }
                Outcome::Optimal => {}
            }
            let obj = engine.internal_objective();
            if first {
                stats.root_bound = Some(sign * obj);
                first = false;
            }
            if prunable(obj, inc_val) {
                break;
            }
            let x = engine.values();
            let branch = most_fractional(x, &binary);
            if let Some(j) = branch {
                let basis = Rc::new(engine.snapshot());
                for v in [1.0, 0.0] {
                    seq += 1;
                    let mut fixes = node.fixes.clone();
                    fixes.push((j, v));
                    heap.push(Node { bound: obj, seq, fixes, basis: Some(basis.clone()) });
                }
                break;
            }
            let candidate: Vec<f64> = x.iter().zip(&binary).map(|(&v, &b)| if b { v.round() } else { v }).collect();
            let worst = rows.iter().map(|r| r.violation(&candidate)).fold(0.0, f64::max);
            let bound_slip = (0..n)
                .map(|j| {
                    let (l, u) = engine.bounds(j);
                    (l - candidate[j]).max(candidate[j] - u).max(0.0)
                })
                .fold(0.0, f64::max);
            if worst > 1e-6 || bound_slip > 1e-6 {
                log::warn!("rounded candidate violates the model by {worst:e}; node dropped");
                break;
            }
            let cand_val: f64 = candidate.iter().zip(&cost).map(|(x, c)| x * c).sum();
            let action = match callback.as_deref_mut() {
                Some(cb) => {
                    stats.callbacks += 1;
                    cb.on_candidate(&candidate)
                }
                None => CallbackAction::Accept,
            };
            match action {
                CallbackAction::Accept => {
                    if cand_val < inc_val {
                        inc_val = cand_val;
                        incumbent = Some(candidate);
                    }
                    break;
                }
                CallbackAction::AddCuts(cuts) => {
                    if cuts.is_empty() {
                        return Err(KernelError::MalformedCut("callback rejected a candidate without cuts".into()));
                    }
                    for cut in cuts {
                        validate_row(&cut, n).map_err(KernelError::MalformedCut)?;
                        let violation = cut.violation(&candidate);
                        if violation <= 1e-9 {
                            return Err(KernelError::CutNotViolated { violation });
                        }
                        engine.add_row(&cut);
                        rows.push(cut);
                        stats.lazy_cuts += 1;
                    }
                }
            }
        }
        if status == Some(MipStatus::Unbounded) {
            break;
        }
        if opts.record_trace {
            let open = heap.peek().map_or(f64::INFINITY, |nd| nd.bound);
            let bound = open.min(inc_val);
            stats.trace.push(TracePoint { bound: sign * bound, incumbent: incumbent.as_ref().map(|_| sign * inc_val) });
        }
        if let Some(top) = heap.peek() {
            if inc_val.is_finite() && inc_val - top.bound <= opts.gap_tol {
                break;
            }
        }
    }
    stats.lp_iterations = engine.iterations;

    let open_bound =
        heap.iter().filter(|nd| !prunable(nd.bound, inc_val)).map(|nd| nd.bound).fold(f64::INFINITY, f64::min);
    let status = status.unwrap_or(if incumbent.is_some() { MipStatus::Optimal } else { MipStatus::Infeasible });
    let bound = match status {
        MipStatus::Optimal => inc_val.min(open_bound),
        MipStatus::Infeasible => f64::INFINITY,
        MipStatus::Unbounded => f64::NEG_INFINITY,
        _ => open_bound.min(inc_val),
    };
    Ok(MipResult {
        status,
        objective: incumbent.as_ref().map(|_| sign * inc_val),
        incumbent,
        bound: sign * bound,
        stats,
    })
}

/// Binary whose value is closest to 0.5, lowest index on ties.
fn most_fractional(x: &[f64], binary: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&v, &b)) in x.iter().zip(binary).enumerate() {
        if !b {
            continue;
        }
        let frac = (v - v.round()).abs();
        if frac <= INTEGRALITY_TOL {
            continue;
        }
        let dist = (v - v.floor() - 0.5).abs();
        if best.is_none_or(|(_, d)| dist < d - 1e-12) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}
