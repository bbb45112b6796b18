//! Centralized and decentralized reference optima, Price of Stability and
//! Price of Decentralisation, and the priority/weight scenario sweep.

use std::fmt;
use std::time::{Duration, Instant};

use optkern::{solve_mip, Constraint, MipOptions, MipStatus, Sense, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bnp::{solve_bnp, BnpOptions};
use crate::domain::{leader_objective, Assignment, Instance, Rational};
use crate::leader_model::{LeaderModel, LeaderObjective};
use crate::outcome::{SolveError, SolveStatus};
use crate::ratio::to_f64;

/// Choice among assignments maximising the followers' total priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tiebreak {
    /// Whatever optimum the kernel returns first.
    Solver,
    /// The optimum with the smallest leader objective.
    LeaderBest,
    /// The optimum with the largest leader objective.
    LeaderWorst,
}

/// A reference solution with its exact leader objective.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub assignment: Assignment,
    pub value: Rational,
    pub status: SolveStatus,
    pub time: Duration,
}

fn run(
    model: &LeaderModel,
    inst: &Instance,
    step: f64,
    time_limit: Option<Duration>,
) -> Result<(Assignment, SolveStatus), SolveError> {
    let opts = MipOptions { time_limit, gap_tol: 1e-9, objective_step: Some(step), ..Default::default() };
    let res = solve_mip(&model.mip, &opts, None)?;
    let status = match res.status {
        MipStatus::Optimal => SolveStatus::Optimal,
        MipStatus::TimeLimit | MipStatus::NodeLimit => SolveStatus::TimeLimit,
        other => return Err(SolveError::Internal(format!("reference model ended with {other:?}"))),
    };
    let values = res.incumbent.ok_or_else(|| SolveError::Internal("reference model found no solution".into()))?;
    let asg = model.decode(&values);
    debug_assert!(crate::domain::check_single_level_feasibility(inst, &asg).ok());
    Ok((asg, status))
}

/// Minimises the leader objective with no follower-optimality requirement.
pub fn solve_centralized(inst: &Instance, time_limit: Option<Duration>) -> Result<ReferenceSolution, SolveError> {
    let start = Instant::now();
    let model = LeaderModel::build(inst, LeaderObjective::LeaderMin, false);
    let (assignment, status) = run(&model, inst, 1.0 / inst.weight_denominator() as f64, time_limit)?;
    let value = leader_objective(inst, &assignment);
    Ok(ReferenceSolution { assignment, value, status, time: start.elapsed() })
}

fn follower_sum_row(inst: &Instance, x: &[(usize, usize, VarId)]) -> Vec<(VarId, f64)> {
    x.iter().map(|&(p, _, v)| (v, inst.patients[p].prio_follower as f64)).collect()
}

/// Maximises the followers' total priority; `tiebreak` picks among optima.
pub fn solve_decentralized(
    inst: &Instance,
    tiebreak: Tiebreak,
    time_limit: Option<Duration>,
) -> Result<ReferenceSolution, SolveError> {
    let start = Instant::now();
    let deadline = time_limit.map(|t| start + t);
    let model = LeaderModel::build(inst, LeaderObjective::FollowerSumMax, false);
    let (first, mut status) = run(&model, inst, 1.0, time_limit)?;
    let assignment = match tiebreak {
        Tiebreak::Solver => first,
        Tiebreak::LeaderBest | Tiebreak::LeaderWorst => {
            let opt: i64 = (0..inst.surgeons.len()).map(|s| first.follower_value(inst, s)).sum();
            let mut second = LeaderModel::build(inst, LeaderObjective::LeaderMin, false);
            if tiebreak == Tiebreak::LeaderWorst {
                second.mip.lp.sense = Sense::Maximize;
            }
            let row = follower_sum_row(inst, &second.x);
            second.mip.lp.add_constraint(Constraint::ge(row, opt as f64 - 0.5));
            let remaining = deadline.map(|d| d.saturating_duration_since(Instant::now()));
            let (asg, st) = run(&second, inst, 1.0 / inst.weight_denominator() as f64, remaining)?;
            if st != SolveStatus::Optimal {
                status = st;
            }
            asg
        }
    };
    let value = leader_objective(inst, &assignment);
    Ok(ReferenceSolution { assignment, value, status, time: start.elapsed() })
}

/// A price ratio; a zero denominator with a positive numerator is infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceValue {
    Finite(Rational),
    Infinite,
}

impl PriceValue {
    pub fn to_f64(self) -> f64 {
        match self {
            PriceValue::Finite(r) => to_f64(&r),
            PriceValue::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for PriceValue {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        match self {
            PriceValue::Finite(r) => write!(f, "{:.6}", to_f64(r)),
            PriceValue::Infinite => f.write_str("inf"),
        }
    }
}

/// `num / den`, with `0 / 0 = 1` and `x / 0 = ∞` for `x ≠ 0`.
pub fn price_ratio(num: Rational, den: Rational) -> PriceValue {
    if den == Rational::from(0) {
        if num == Rational::from(0) {
            PriceValue::Finite(Rational::from(1))
        } else {
            PriceValue::Infinite
        }
    } else {
        PriceValue::Finite(num / den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriceReport {
    pub value: PriceValue,
    pub numerator: Rational,
    pub denominator: Rational,
    /// Both member solves proved optimality.
    pub optimal: bool,
}

fn bilevel_options(time_limit: Option<Duration>) -> BnpOptions {
    BnpOptions { use_initial_heuristic: false, time_limit, ..Default::default() }
}

/// `F_bilevel / F_central`.
pub fn price_of_stability(inst: &Instance, time_limit: Option<Duration>) -> Result<PriceReport, SolveError> {
    let eq = solve_bnp(inst, &bilevel_options(time_limit))?;
    let cen = solve_centralized(inst, time_limit)?;
    let num = eq.value.ok_or_else(|| SolveError::Internal("no bilevel solution within the time limit".into()))?;
    Ok(PriceReport {
        value: price_ratio(num, cen.value),
        numerator: num,
        denominator: cen.value,
        optimal: eq.is_optimal() && cen.status == SolveStatus::Optimal,
    })
}

/// `F(decentralized) / F_central`.
pub fn price_of_decentralisation(
    inst: &Instance,
    tiebreak: Tiebreak,
    time_limit: Option<Duration>,
) -> Result<PriceReport, SolveError> {
    let dec = solve_decentralized(inst, tiebreak, time_limit)?;
    let cen = solve_centralized(inst, time_limit)?;
    Ok(PriceReport {
        value: price_ratio(dec.value, cen.value),
        numerator: dec.value,
        denominator: cen.value,
        optimal: dec.status == SolveStatus::Optimal && cen.status == SolveStatus::Optimal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PriorityRule {
    AllOne,
    /// Uniform integer in 1..=4.
    Random1To4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioSpec {
    pub id: u8,
    pub leader_prio_rule: PriorityRule,
    pub follower_prio_rule: PriorityRule,
    /// Leader and follower priorities are one shared draw.
    pub aligned: bool,
    pub alpha: Rational,
    pub beta: Rational,
}

impl ScenarioSpec {
    /// Scenario `id` in 1..=5 with weights `(alpha, beta)`.
    pub fn new(id: u8, alpha: Rational, beta: Rational) -> Option<Self> {
        use PriorityRule::*;
        let (leader, follower, aligned) = match id {
            1 => (AllOne, AllOne, true),
            2 => (Random1To4, Random1To4, true),
            3 => (Random1To4, AllOne, false),
            4 => (AllOne, Random1To4, false),
            5 => (Random1To4, Random1To4, false),
            _ => return None,
        };
        Some(ScenarioSpec { id, leader_prio_rule: leader, follower_prio_rule: follower, aligned, alpha, beta })
    }

    /// The twelve (scenario, weights) combinations of the standard sweep.
    pub fn standard_sweep() -> Vec<Self> {
        let w = |a: i128, b: i128| (Rational::from(a), Rational::from(b));
        let mut out = Vec::new();
        for id in [1, 5] {
            let (a, b) = w(1, 0);
            out.extend(Self::new(id, a, b));
        }
        for (a, b) in [w(0, 1), w(1, 1)] {
            out.extend((1..=5).filter_map(|id| Self::new(id, a, b)));
        }
        out
    }
}

/// Copy of `inst` with priorities redrawn by the scenario rules and the scenario weights.
pub fn apply_scenario(inst: &Instance, scenario: &ScenarioSpec, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rule: PriorityRule, rng: &mut ChaCha8Rng| match rule {
        PriorityRule::AllOne => 1,
        PriorityRule::Random1To4 => rng.random_range(1..=4u32),
    };
    let mut spec = inst.to_spec();
    spec.alpha = scenario.alpha;
    spec.beta = scenario.beta;
    for sg in &mut spec.surgeons {
        for p in &mut sg.patients {
            let leader = draw(scenario.leader_prio_rule, &mut rng);
            let follower = if scenario.aligned { leader } else { draw(scenario.follower_prio_rule, &mut rng) };
            p.prio_leader = leader;
            p.prio_follower = follower;
        }
    }
    Instance::new(spec).expect("redrawn priorities stay within limits")
}

/// Table metrics of one solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionSummary {
    pub f: Rational,
    /// Σ π^LP of scheduled patients.
    pub pl: i64,
    /// Scheduled slots over capacity.
    pub u: f64,
    pub sum_f: i64,
    pub time: Duration,
    pub optimal: bool,
}

impl SolutionSummary {
    pub fn of(inst: &Instance, asg: &Assignment, time: Duration, optimal: bool) -> Self {
        SolutionSummary {
            f: leader_objective(inst, asg),
            pl: asg.scheduled_leader_priority(inst),
            u: asg.scheduled_duration(inst) as f64 / inst.capacity.max(1) as f64,
            sum_f: (0..inst.surgeons.len()).map(|s| asg.follower_value(inst, s)).sum(),
            time,
            optimal,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub instance_id: String,
    pub scenario: ScenarioSpec,
    pub eq: SolutionSummary,
    pub dec: SolutionSummary,
    pub cen: SolutionSummary,
    pub pos: PriceValue,
    pub pod: PriceValue,
}

impl EquilibriumReport {
    /// Every member solve proved optimality.
    pub fn all_optimal(&self) -> bool {
        self.eq.optimal && self.dec.optimal && self.cen.optimal
    }

    pub fn to_row(&self) -> ScenarioRow {
        let secs = |d: Duration| d.as_secs_f64();
        ScenarioRow {
            instance_id: self.instance_id.clone(),
            scenario: self.scenario.id,
            alpha: to_f64(&self.scenario.alpha),
            beta: to_f64(&self.scenario.beta),
            f_eq: to_f64(&self.eq.f),
            pl_eq: self.eq.pl,
            u_eq: self.eq.u,
            sumf_eq: self.eq.sum_f,
            t_eq: secs(self.eq.time),
            f_dec: to_f64(&self.dec.f),
            pl_dec: self.dec.pl,
            u_dec: self.dec.u,
            sumf_dec: self.dec.sum_f,
            t_dec: secs(self.dec.time),
            f_cen: to_f64(&self.cen.f),
            pl_cen: self.cen.pl,
            u_cen: self.cen.u,
            sumf_cen: self.cen.sum_f,
            t_cen: secs(self.cen.time),
            pos: self.pos.to_string(),
            pod: self.pod.to_string(),
        }
    }
}

/// One CSV row of the scenario sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioRow {
    pub instance_id: String,
    pub scenario: u8,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "F_eq")]
    pub f_eq: f64,
    #[serde(rename = "PL_eq")]
    pub pl_eq: i64,
    #[serde(rename = "U_eq")]
    pub u_eq: f64,
    pub sumf_eq: i64,
    pub t_eq: f64,
    #[serde(rename = "F_dec")]
    pub f_dec: f64,
    #[serde(rename = "PL_dec")]
    pub pl_dec: i64,
    #[serde(rename = "U_dec")]
    pub u_dec: f64,
    pub sumf_dec: i64,
    pub t_dec: f64,
    #[serde(rename = "F_cen")]
    pub f_cen: f64,
    #[serde(rename = "PL_cen")]
    pub pl_cen: i64,
    #[serde(rename = "U_cen")]
    pub u_cen: f64,
    pub sumf_cen: i64,
    pub t_cen: f64,
    #[serde(rename = "PoS")]
    pub pos: String,
    #[serde(rename = "PoD")]
    pub pod: String,
}

/// Solves one (instance, scenario) cell.
pub fn evaluate_scenario(
    instance_id: &str,
    inst: &Instance,
    scenario: &ScenarioSpec,
    tiebreak: Tiebreak,
    time_limit: Option<Duration>,
) -> Result<EquilibriumReport, SolveError> {
    let eq = solve_bnp(inst, &bilevel_options(time_limit))?;
    let eq_asg = eq.assignment.clone().ok_or_else(|| SolveError::Internal("no bilevel solution".into()))?;
    let dec = solve_decentralized(inst, tiebreak, time_limit)?;
    let cen = solve_centralized(inst, time_limit)?;
    let eq_sum = SolutionSummary::of(inst, &eq_asg, eq.stats.t_total, eq.is_optimal());
    let dec_sum = SolutionSummary::of(inst, &dec.assignment, dec.time, dec.status == SolveStatus::Optimal);
    let cen_sum = SolutionSummary::of(inst, &cen.assignment, cen.time, cen.status == SolveStatus::Optimal);
    Ok(EquilibriumReport {
        instance_id: instance_id.to_owned(),
        scenario: *scenario,
        pos: price_ratio(eq_sum.f, cen_sum.f),
        pod: price_ratio(dec_sum.f, cen_sum.f),
        eq: eq_sum,
        dec: dec_sum,
        cen: cen_sum,
    })
}

/// Every (instance, scenario) cell in input order. Priorities of cell
/// `(i, j)` are drawn with seed `seed + i * scenarios.len() + j`.
pub fn run_scenarios(
    instances: &[(String, Instance)],
    scenarios: &[ScenarioSpec],
    tiebreak: Tiebreak,
    seed: u64,
    time_limit: Option<Duration>,
) -> Result<Vec<EquilibriumReport>, SolveError> {
    let cells: Vec<(usize, usize)> =
        (0..instances.len()).flat_map(|i| (0..scenarios.len()).map(move |j| (i, j))).collect();
    cells
        .par_iter()
        .map(|&(i, j)| {
            let (id, inst) = &instances[i];
            let cell_seed = seed.wrapping_add((i * scenarios.len() + j) as u64);
            let redrawn = apply_scenario(inst, &scenarios[j], cell_seed);
            evaluate_scenario(id, &redrawn, &scenarios[j], tiebreak, time_limit)
        })
        .collect()
}
