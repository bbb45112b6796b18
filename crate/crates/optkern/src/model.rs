use crate::KernelError;

/// Optimization direction of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Relation of a constraint row to its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

/// Index of a variable inside a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

/// A single linear row `sum(coeff * var) <sense> rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<(VarId, f64)>, sense: RowSense, rhs: f64) -> Self {
        Self { coeffs, sense, rhs }
    }

    pub fn le(coeffs: Vec<(VarId, f64)>, rhs: f64) -> Self {
        Self::new(coeffs, RowSense::Le, rhs)
    }

    pub fn ge(coeffs: Vec<(VarId, f64)>, rhs: f64) -> Self {
        Self::new(coeffs, RowSense::Ge, rhs)
    }

    pub fn eq(coeffs: Vec<(VarId, f64)>, rhs: f64) -> Self {
        Self::new(coeffs, RowSense::Eq, rhs)
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            RowSense::Le => (lhs - self.rhs).max(0.0),
            RowSense::Ge => (self.rhs - lhs).max(0.0),
            RowSense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A linear program over bounded (or free) continuous variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        Self { sense, variables: Vec::new(), constraints: Vec::new() }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> VarId {
        self.variables.push(Variable { name: name.into(), lower, upper, objective });
        VarId(self.variables.len() - 1)
    }

    /// Adds a `[0, 1]` variable; pair with [`crate::MipProblem::mark_binary`] for integrality.
    pub fn add_unit_var(&mut self, name: impl Into<String>, objective: f64) -> VarId {
        self.add_var(name, 0.0, 1.0, objective)
    }

    pub fn add_constraint(&mut self, c: Constraint) -> usize {
        self.constraints.push(c);
        self.constraints.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Objective value of `values` in the model's own sense.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.variables.iter().zip(values).map(|(v, x)| v.objective * x).sum()
    }

    pub(crate) fn validate(&self) -> Result<(), KernelError> {
        for (j, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || !v.objective.is_finite() {
                return Err(KernelError::Malformed(format!("variable {j} ({}) has non-numeric data", v.name)));
            }
            if v.lower > v.upper {
                return Err(KernelError::Malformed(format!(
                    "variable {j} ({}) has lower bound {} above upper bound {}",
                    v.name, v.lower, v.upper
                )));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(KernelError::Malformed(format!("variable {j} ({}) has an empty domain", v.name)));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            validate_row(c, self.variables.len()).map_err(|e| KernelError::Malformed(format!("row {i}: {e}")))?;
        }
        Ok(())
    }
}

pub(crate) fn validate_row(c: &Constraint, num_vars: usize) -> Result<(), String> {
    if !c.rhs.is_finite() {
        return Err("non-finite right-hand side".into());
    }
    for &(v, a) in &c.coeffs {
        if v.0 >= num_vars {
            return Err(format!("references undeclared variable {}", v.0));
        }
        if !a.is_finite() {
            return Err(format!("non-finite coefficient on variable {}", v.0));
        }
    }
    Ok(())
}
