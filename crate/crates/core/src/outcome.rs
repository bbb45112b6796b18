//! Result types shared by the solvers.

use std::time::Duration;

use optkern::KernelError;

use crate::cuts::CutEvent;
use crate::domain::{Assignment, Rational};

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "OPTIMAL",
            SolveStatus::TimeLimit => "TIME_LIMIT",
        }
    }
}

/// Run metrics; counters not applicable to a solver stay zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    /// Objective of the root linear relaxation.
    pub f_lpr_root: Option<f64>,
    pub n_cgi: usize,
    pub n_cols: usize,
    pub n_lcs: usize,
    pub n_cbs: usize,
    pub n_nodes: usize,
    pub t_cb: Duration,
    pub t_sp: Duration,
    pub t_mp: Duration,
    pub t_total: Duration,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Best bilevel-feasible assignment found.
    pub assignment: Option<Assignment>,
    /// Exact leader objective of `assignment`.
    pub value: Option<Rational>,
    /// Proven lower bound on the optimal leader objective.
    pub bound: f64,
    pub stats: SolveStats,
    /// Every improving incumbent in the order it was found.
    pub incumbents: Vec<(Rational, Assignment)>,
    /// Every lazy cut generated, with its triggering plan.
    pub cut_log: Vec<CutEvent>,
}

impl SolveOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn feasible_found(&self) -> bool {
        self.assignment.is_some()
    }

    /// `100 (F − F_lpr) / F_lpr` when the root relaxation value is positive.
    pub fn gap_root_pct(&self) -> Option<f64> {
        let lpr = self.stats.f_lpr_root?;
        let f = crate::ratio::to_f64(self.value.as_ref()?);
        (lpr > 0.0).then(|| 100.0 * (f - lpr) / lpr)
    }
}
