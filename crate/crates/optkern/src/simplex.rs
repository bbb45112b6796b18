//! Bounded-variable revised simplex over a dense basis inverse.
//!
//! Every row `i` gets a slack column `n + i` with coefficient +1, so all rows
//! become equalities `a_i x + s_i = b_i` and row senses move into slack bounds:
//! `<=` gives `s >= 0`, `>=` gives `s <= 0`, `=` gives `s = 0`. Internally the
//! objective is always minimized.

#![allow(clippy::needless_range_loop)]

use crate::model::{Constraint, RowSense};
use crate::KernelError;

pub(crate) const PRIMAL_TOL: f64 = 1e-9;
pub(crate) const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const DEGENERATE_SWITCH: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VarState {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic free variable sitting at zero.
    Free,
}

/// Snapshot of basis statuses, used to warm-start a later solve.
#[derive(Debug, Clone)]
pub(crate) struct Basis {
    states: Vec<VarState>,
    num_rows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub(crate) struct Simplex {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    since_refactor: usize,
    pub(crate) iterations: usize,
    iteration_cap: usize,
}

fn slack_bounds(sense: RowSense) -> (f64, f64) {
    match sense {
        RowSense::Le => (0.0, f64::INFINITY),
        RowSense::Ge => (f64::NEG_INFINITY, 0.0),
        RowSense::Eq => (0.0, 0.0),
    }
}

impl Simplex {
    /// `cost` is the internal (minimization) objective of the structural columns.
    pub(crate) fn new(cost: Vec<f64>, lo: Vec<f64>, up: Vec<f64>, rows: &[Constraint]) -> Self {
        let n = cost.len();
        let mut s = Simplex {
            n,
            m: 0,
            cols: vec![Vec::new(); n],
            rhs: Vec::new(),
            cost,
            lo,
            up,
            x: vec![0.0; n],
            state: vec![VarState::Lower; n],
            basis: Vec::new(),
            binv: Vec::new(),
            since_refactor: 0,
            iterations: 0,
            iteration_cap: 0,
        };
        for j in 0..n {
            s.state[j] = s.preferred_nonbasic(j);
            s.x[j] = s.nonbasic_value(j);
        }
        for r in rows {
            s.push_row(r);
        }
        s.binv = identity(s.m);
        s.recompute_x();
        s
    }

    fn preferred_nonbasic(&self, j: usize) -> VarState {
        let (l, u, c) = (self.lo[j], self.up[j], self.cost[j]);
        let lf = l.is_finite();
        let uf = u.is_finite();
        if c < 0.0 {
            if uf {
                VarState::Upper
            } else if lf {
                VarState::Lower
            } else {
                VarState::Free
            }
        } else if lf {
            VarState::Lower
        } else if uf {
            VarState::Upper
        } else {
            VarState::Free
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Lower => self.lo[j],
            VarState::Upper => self.up[j],
            VarState::Free => 0.0,
            VarState::Basic(_) => self.x[j],
        }
    }

    /// Appends a row with its slack column; the slack is not yet placed in the basis.
    fn push_row(&mut self, c: &Constraint) {
        let i = self.m;
        for &(v, a) in &c.coeffs {
            if a != 0.0 {
                self.cols[v.0].push((i, a));
            }
        }
        let (l, u) = slack_bounds(c.sense);
        self.rhs.push(c.rhs);
        self.cost.push(0.0);
        self.lo.push(l);
        self.up.push(u);
        self.x.push(0.0);
        self.state.push(VarState::Basic(i));
        self.basis.push(self.n + i);
        self.m += 1;
    }

    /// Adds a row to a live basis: the new slack becomes basic and the inverse is
    /// extended in place, so no refactorization is needed.
    pub(crate) fn add_row(&mut self, c: &Constraint) {
        let old_m = self.m;
        // Coefficients of the new row on the current basic columns.
        let mut row_on_basis = vec![0.0; old_m];
        for &(v, a) in &c.coeffs {
            if let VarState::Basic(r) = self.state[v.0] {
                row_on_basis[r] += a;
            }
        }
        self.push_row(c);
        let m = self.m;
        let mut binv = vec![0.0; m * m];
        for r in 0..old_m {
            binv[r * m..r * m + old_m].copy_from_slice(&self.binv[r * old_m..(r + 1) * old_m]);
        }
        // Last row: -(a_B^T B^{-1}), then 1 on the diagonal.
        for (r, &a) in row_on_basis.iter().enumerate() {
            if a != 0.0 {
                for i in 0..old_m {
                    binv[old_m * m + i] -= a * self.binv[r * old_m + i];
                }
            }
        }
        binv[old_m * m + old_m] = 1.0;
        self.binv = binv;
        let slack = self.n + old_m;
        let activity: f64 = c.coeffs.iter().map(|&(v, a)| a * self.x[v.0]).sum();
        self.x[slack] = c.rhs - activity;
    }

    pub(crate) fn set_bounds(&mut self, j: usize, lo: f64, up: f64) {
        self.lo[j] = lo;
        self.up[j] = up;
        match self.state[j] {
            VarState::Basic(_) => {}
            VarState::Lower if lo.is_finite() => self.x[j] = lo,
            VarState::Upper if up.is_finite() => self.x[j] = up,
            _ => {
                self.state[j] = self.preferred_nonbasic(j);
                self.x[j] = self.nonbasic_value(j);
            }
        }
    }

    pub(crate) fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.up[j])
    }

    pub(crate) fn snapshot(&self) -> Basis {
        Basis { states: self.state.clone(), num_rows: self.m }
    }

    /// Restores a basis snapshot taken when the model had possibly fewer rows;
    /// slacks of rows added since then enter the basis.
    pub(crate) fn restore(&mut self, b: &Basis) {
        let old_total = self.n + b.num_rows;
        for j in 0..old_total {
            self.state[j] = b.states[j];
        }
        for i in b.num_rows..self.m {
            self.state[self.n + i] = VarState::Basic(i);
        }
        for j in 0..self.n + self.m {
            match self.state[j] {
                VarState::Basic(r) => self.basis[r] = j,
                VarState::Lower if !self.lo[j].is_finite() => self.state[j] = self.preferred_nonbasic(j),
                VarState::Upper if !self.up[j].is_finite() => self.state[j] = self.preferred_nonbasic(j),
                _ => {}
            }
            if !matches!(self.state[j], VarState::Basic(_)) {
                self.x[j] = self.nonbasic_value(j);
            }
        }
        // Force a refactorization at the next solve.
        self.since_refactor = usize::MAX;
    }

    fn reset_to_slack_basis(&mut self) {
        for j in 0..self.n {
            self.state[j] = self.preferred_nonbasic(j);
            self.x[j] = self.nonbasic_value(j);
        }
        for i in 0..self.m {
            self.state[self.n + i] = VarState::Basic(i);
            self.basis[i] = self.n + i;
        }
        self.binv = identity(self.m);
        self.since_refactor = 0;
        self.recompute_x();
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub(crate) fn internal_objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    /// Row duals `y = c_B^T B^{-1}` of the internal minimization problem.
    pub(crate) fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for r in 0..m {
            let c = self.cost[self.basis[r]];
            if c != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (yi, b) in y.iter_mut().zip(row) {
                    *yi += c * b;
                }
            }
        }
        y
    }

    fn dot_col(&self, j: usize, v: &[f64]) -> f64 {
        if j < self.n {
            self.cols[j].iter().map(|&(i, a)| a * v[i]).sum()
        } else {
            v[j - self.n]
        }
    }

    pub(crate) fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        self.cost[j] - self.dot_col(j, y)
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        if j < self.n {
            for &(i, a) in &self.cols[j] {
                for (r, al) in alpha.iter_mut().enumerate() {
                    *al += a * self.binv[r * m + i];
                }
            }
        } else {
            let i = j - self.n;
            for (r, al) in alpha.iter_mut().enumerate() {
                *al = self.binv[r * m + i];
            }
        }
        alpha
    }

    /// Rebuilds `B^{-1}` by Gauss-Jordan elimination with partial pivoting.
    fn refactor(&mut self) -> Result<(), ()> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (r, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                for &(i, a) in &self.cols[j] {
                    b[i * m + r] = a;
                }
            } else {
                b[(j - self.n) * m + r] = 1.0;
            }
        }
        let mut inv = identity(m);
        for c in 0..m {
            let (p, best) =
                (c..m).map(|r| (r, b[r * m + c].abs())).fold((c, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best < 1e-11 {
                return Err(());
            }
            if p != c {
                for k in 0..m {
                    b.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let piv = b[c * m + c];
            for k in 0..m {
                b[c * m + k] /= piv;
                inv[c * m + k] /= piv;
            }
            for r in 0..m {
                if r != c {
                    let f = b[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            b[r * m + k] -= f * b[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.since_refactor = 0;
        Ok(())
    }

    fn recompute_x(&mut self) {
        let m = self.m;
        let mut r = self.rhs.clone();
        for j in 0..self.n + m {
            if matches!(self.state[j], VarState::Basic(_)) {
                continue;
            }
            let xj = self.x[j];
            if xj != 0.0 {
                if j < self.n {
                    for &(i, a) in &self.cols[j] {
                        r[i] -= a * xj;
                    }
                } else {
                    r[j - self.n] -= xj;
                }
            }
        }
        for row in 0..m {
            let v: f64 = self.binv[row * m..(row + 1) * m].iter().zip(&r).map(|(a, b)| a * b).sum();
            self.x[self.basis[row]] = v;
        }
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        let (head, rest) = self.binv.split_at_mut(r * m);
        let (prow, tail) = rest.split_at_mut(m);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        for (i, &a) in alpha.iter().enumerate() {
            if i == r || a == 0.0 {
                continue;
            }
            let row = if i < r { &mut head[i * m..(i + 1) * m] } else { &mut tail[(i - r - 1) * m..(i - r) * m] };
            for (v, p) in row.iter_mut().zip(prow.iter()) {
                *v -= a * p;
            }
        }
        self.since_refactor += 1;
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lo[j] - PRIMAL_TOL {
            self.lo[j] - v
        } else if v > self.up[j] + PRIMAL_TOL {
            v - self.up[j]
        } else {
            0.0
        }
    }

    fn primal_infeasible(&self) -> bool {
        self.basis.iter().any(|&j| self.infeasibility(j) > 0.0)
    }

    fn ensure_factored(&mut self) {
        if self.since_refactor >= REFACTOR_EVERY {
            if self.refactor().is_err() {
                log::debug!("singular basis; restarting from the slack basis");
                self.reset_to_slack_basis();
            }
            self.recompute_x();
        }
    }

    /// Flips boxed nonbasic variables to the bound matching their reduced-cost
    /// sign. Returns false if some unboxed variable is dual infeasible.
    fn make_dual_feasible(&mut self) -> bool {
        let y = self.duals();
        let mut ok = true;
        let mut flipped = false;
        for j in 0..self.n + self.m {
            let st = self.state[j];
            if matches!(st, VarState::Basic(_)) {
                continue;
            }
            let d = self.reduced_cost(j, &y);
            match st {
                VarState::Lower if d < -DUAL_TOL => {
                    if self.up[j].is_finite() {
                        self.state[j] = VarState::Upper;
                        self.x[j] = self.up[j];
                        flipped = true;
                    } else {
                        ok = false;
                    }
                }
                VarState::Upper if d > DUAL_TOL => {
                    if self.lo[j].is_finite() {
                        self.state[j] = VarState::Lower;
                        self.x[j] = self.lo[j];
                        flipped = true;
                    } else {
                        ok = false;
                    }
                }
                VarState::Free if d.abs() > DUAL_TOL => ok = false,
                _ => {}
            }
        }
        if flipped {
            self.recompute_x();
        }
        ok
    }

    fn check_cap(&mut self) -> Result<(), KernelError> {
        self.iterations += 1;
        if self.iterations > self.iteration_cap {
            return Err(KernelError::IterationLimit(self.iterations));
        }
        Ok(())
    }

    /// Solves from the current basis.
    pub(crate) fn optimize(&mut self) -> Result<Outcome, KernelError> {
        self.iteration_cap = self.iterations + 20_000 + 50 * (self.n + self.m);
        if self.since_refactor != 0 {
            if self.refactor().is_err() {
                self.reset_to_slack_basis();
            }
            self.recompute_x();
        }
        for _round in 0..4 {
            let outcome = if self.make_dual_feasible() { self.dual()? } else { self.primal()? };
            if outcome != Outcome::Optimal {
                return Ok(outcome);
            }
            // Verify against a fresh factorization to shed accumulated drift.
            if self.refactor().is_err() {
                self.reset_to_slack_basis();
                continue;
            }
            self.recompute_x();
            if !self.primal_infeasible() && self.dual_feasible() {
                return Ok(Outcome::Optimal);
            }
        }
        Err(KernelError::Numerical("simplex failed to settle after refactorization".into()))
    }

    fn dual_feasible(&self) -> bool {
        let y = self.duals();
        (0..self.n + self.m).all(|j| {
            let d = self.reduced_cost(j, &y);
            match self.state[j] {
                VarState::Basic(_) => true,
                VarState::Lower => d >= -DUAL_TOL * 10.0 || self.lo[j] == self.up[j],
                VarState::Upper => d <= DUAL_TOL * 10.0 || self.lo[j] == self.up[j],
                VarState::Free => d.abs() <= DUAL_TOL * 10.0,
            }
        })
    }

    /// Composite primal simplex: minimizes the sum of infeasibilities while any
    /// basic variable is out of bounds, then the true objective.
    fn primal(&mut self) -> Result<Outcome, KernelError> {
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            self.check_cap()?;
            self.ensure_factored();
            let m = self.m;
            let phase1 = self.primal_infeasible();
            let cb: Vec<f64> = self
                .basis
                .iter()
                .map(|&j| {
                    if phase1 {
                        if self.x[j] < self.lo[j] - PRIMAL_TOL {
                            -1.0
                        } else if self.x[j] > self.up[j] + PRIMAL_TOL {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        self.cost[j]
                    }
                })
                .collect();
            let mut y = vec![0.0; m];
            for r in 0..m {
                if cb[r] != 0.0 {
                    for i in 0..m {
                        y[i] += cb[r] * self.binv[r * m + i];
                    }
                }
            }
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.n + m {
                let st = self.state[j];
                if matches!(st, VarState::Basic(_)) || self.lo[j] == self.up[j] {
                    continue;
                }
                let c = if phase1 { 0.0 } else { self.cost[j] };
                let d = c - self.dot_col(j, &y);
                let dir = match st {
                    VarState::Lower if d < -DUAL_TOL => 1.0,
                    VarState::Upper if d > DUAL_TOL => -1.0,
                    VarState::Free if d.abs() > DUAL_TOL => -d.signum(),
                    _ => continue,
                };
                match entering {
                    None => entering = Some((j, dir, d.abs())),
                    Some((_, _, best)) if !bland && d.abs() > best => entering = Some((j, dir, d.abs())),
                    _ => {}
                }
                if bland {
                    break;
                }
            }
            let Some((j, dir, _)) = entering else {
                return Ok(if phase1 { Outcome::Infeasible } else { Outcome::Optimal });
            };
            let alpha = self.ftran(j);
            // Ratio test; basic r moves by rate * t.
            let mut best_t = f64::INFINITY;
            let mut leave: Option<(usize, f64)> = None;
            let mut best_piv = 0.0;
            if self.lo[j].is_finite() && self.up[j].is_finite() {
                best_t = self.up[j] - self.lo[j];
            }
            for r in 0..m {
                let rate = -dir * alpha[r];
                if rate.abs() < PIVOT_TOL {
                    continue;
                }
                let bj = self.basis[r];
                let (xb, l, u) = (self.x[bj], self.lo[bj], self.up[bj]);
                let (limit, target) = if rate < 0.0 {
                    if phase1 && xb > u + PRIMAL_TOL {
                        ((xb - u) / -rate, u)
                    } else if xb < l - PRIMAL_TOL || !l.is_finite() {
                        continue;
                    } else {
                        ((xb - l).max(0.0) / -rate, l)
                    }
                } else if phase1 && xb < l - PRIMAL_TOL {
                    ((l - xb) / rate, l)
                } else if xb > u + PRIMAL_TOL || !u.is_finite() {
                    continue;
                } else {
                    ((u - xb).max(0.0) / rate, u)
                };
                let better = if limit < best_t - 1e-12 {
                    true
                } else if limit <= best_t + 1e-12 {
                    // Ties prefer a pivot over a bound flip.
                    match leave {
                        None => true,
                        Some((lr, _)) if bland => bj < self.basis[lr],
                        Some(_) => alpha[r].abs() > best_piv,
                    }
                } else {
                    false
                };
                if better {
                    best_t = limit;
                    leave = Some((r, target));
                    best_piv = alpha[r].abs();
                }
            }
            if !best_t.is_finite() {
                if phase1 {
                    return Err(KernelError::Numerical("unbounded phase-1 ray".into()));
                }
                return Ok(Outcome::Unbounded);
            }
            let t = best_t;
            if t < 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_SWITCH {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.x[j] += dir * t;
            for r in 0..m {
                let rate = -dir * alpha[r];
                if rate != 0.0 {
                    self.x[self.basis[r]] += rate * t;
                }
            }
            match leave {
                None => {
                    // Bound flip of the entering variable.
                    self.state[j] = if dir > 0.0 { VarState::Upper } else { VarState::Lower };
                    self.x[j] = if dir > 0.0 { self.up[j] } else { self.lo[j] };
                }
                Some((r, target)) => {
                    let lv = self.basis[r];
                    self.x[lv] = target;
                    self.state[lv] = if target == self.lo[lv] { VarState::Lower } else { VarState::Upper };
                    self.basis[r] = j;
                    self.state[j] = VarState::Basic(r);
                    self.pivot(r, &alpha);
                }
            }
        }
    }

    /// Dual simplex from a dual-feasible basis.
    fn dual(&mut self) -> Result<Outcome, KernelError> {
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            self.check_cap()?;
            self.ensure_factored();
            let m = self.m;
            // Leaving row: largest bound violation.
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let inf = self.infeasibility(self.basis[r]);
                if inf > 0.0 {
                    let better = match leave {
                        None => true,
                        Some((lr, linf)) => {
                            if bland {
                                self.basis[r] < self.basis[lr]
                            } else {
                                inf > linf
                            }
                        }
                    };
                    if better {
                        leave = Some((r, inf));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Ok(Outcome::Optimal);
            };
            let lv = self.basis[r];
            let below = self.x[lv] < self.lo[lv];
            let target = if below { self.lo[lv] } else { self.up[lv] };
            let rho = self.binv[r * m..(r + 1) * m].to_vec();
            let y = self.duals();
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..self.n + m {
                let st = self.state[j];
                if matches!(st, VarState::Basic(_)) || self.lo[j] == self.up[j] {
                    continue;
                }
                let a = self.dot_col(j, &rho);
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                // x_B(r) moves by -a * dx_j.
                let eligible = match st {
                    VarState::Lower => (below && a < 0.0) || (!below && a > 0.0),
                    VarState::Upper => (below && a > 0.0) || (!below && a < 0.0),
                    VarState::Free => true,
                    VarState::Basic(_) => false,
                };
                if !eligible {
                    continue;
                }
                let d = self.reduced_cost(j, &y);
                let ratio = match st {
                    VarState::Lower => d.max(0.0),
                    VarState::Upper => (-d).max(0.0),
                    _ => d.abs(),
                } / a.abs();
                let better = match enter {
                    None => true,
                    Some((ej, er, ea)) => {
                        if bland {
                            ratio < er - 1e-12 || (ratio <= er + 1e-12 && j < ej)
                        } else {
                            ratio < er - 1e-12 || (ratio <= er + 1e-12 && a.abs() > ea)
                        }
                    }
                };
                if better {
                    enter = Some((j, ratio, a.abs()));
                }
            }
            let Some((j, ratio, _)) = enter else {
                return Ok(Outcome::Infeasible);
            };
            if ratio < 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_SWITCH {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            let alpha = self.ftran(j);
            if alpha[r].abs() < PIVOT_TOL {
                // Row and column disagree: the inverse has drifted.
                self.since_refactor = usize::MAX;
                continue;
            }
            let dx = (self.x[lv] - target) / alpha[r];
            self.x[j] += dx;
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.basis[i]] -= a * dx;
                }
            }
            self.x[lv] = target;
            self.state[lv] = if below { VarState::Lower } else { VarState::Upper };
            self.basis[r] = j;
            self.state[j] = VarState::Basic(r);
            self.pivot(r, &alpha);
        }
    }
}

fn identity(m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        v[i * m + i] = 1.0;
    }
    v
}
