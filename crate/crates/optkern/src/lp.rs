use crate::model::{LinearProgram, Sense};
use crate::simplex::{Outcome, Simplex};
use crate::KernelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`solve_lp`].
///
/// Duals follow the usual sign convention of the model's own sense: for a
/// minimization, rows `<=` carry duals `<= 0`, rows `>=` carry duals `>= 0`
/// and equality rows are free. For a maximization the signs flip.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    /// `b^T y + sum_j d_j x_j`; equals [`LpSolution::objective`] at optimality.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let rows: f64 = lp.constraints.iter().zip(&self.duals).map(|(c, y)| c.rhs * y).sum();
        let bounds: f64 = self.reduced_costs.iter().zip(&self.primal).map(|(d, x)| d * x).sum();
        rows + bounds
    }
}

pub(crate) fn internal_costs(lp: &LinearProgram) -> Vec<f64> {
    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    lp.variables.iter().map(|v| sign * v.objective).collect()
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, KernelError> {
    lp.validate()?;
    let cost = internal_costs(lp);
    let lo = lp.variables.iter().map(|v| v.lower).collect();
    let up = lp.variables.iter().map(|v| v.upper).collect();
    let mut engine = Simplex::new(cost, lo, up, &lp.constraints);
    let outcome = engine.optimize()?;
    Ok(extract(lp, &engine, outcome))
}

pub(crate) fn extract(lp: &LinearProgram, engine: &Simplex, outcome: Outcome) -> LpSolution {
    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let status = match outcome {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Infeasible => LpStatus::Infeasible,
        Outcome::Unbounded => LpStatus::Unbounded,
    };
    let primal = engine.values().to_vec();
    let (duals, reduced_costs, objective) = if status == LpStatus::Optimal {
        let y = engine.duals();
        let d: Vec<f64> = (0..lp.num_vars()).map(|j| sign * engine.reduced_cost(j, &y)).collect();
        let y: Vec<f64> = y.into_iter().take(lp.num_constraints()).map(|v| sign * v).collect();
        (y, d, lp.objective_value(&primal))
    } else {
        let obj = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY * sign,
            _ => f64::NAN,
        };
        (vec![0.0; lp.num_constraints()], vec![0.0; lp.num_vars()], obj)
    };
    LpSolution { status, primal, duals, reduced_costs, objective, iterations: engine.iterations }
}
