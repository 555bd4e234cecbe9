//! Bounded-variable revised simplex over an explicit basis inverse.
//!
//! The engine solves `min c'x  s.t.  A x (=|<=) rhs,  lb <= x <= ub` with
//! finite lower bounds on structural variables. Phase 1 drives artificial
//! variables out of an initial slack/artificial basis; phase 2 optimizes the
//! true objective. A dual-simplex entry point restores primal feasibility
//! from a previously optimal basis after bound changes, which is what the
//! branch-and-bound uses when it fixes binaries at child nodes.
//!
//! Pricing is Dantzig most-negative with index tie-breaks, falling back to
//! Bland's rule after a long degenerate run, so every solve is both
//! deterministic and cycle-free.

use crate::error::{Error, Result};

/// Feasibility tolerance for constraint and bound violations.
pub(crate) const FEAS_TOL: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
const DUAL_TOL: f64 = 1e-9;
/// Minimum magnitude accepted for a pivot element.
const PIVOT_TOL: f64 = 1e-8;
/// Steps below this are treated as degenerate.
const STEP_TOL: f64 = 1e-11;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_TRIGGER: usize = 400;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum Rel {
    Eq,
    Le,
}

/// A linear program in computational form. Structural columns are sparse
/// lists of `(row, coefficient)`; `Le` rows receive a slack internally.
#[derive(Clone, Debug)]
pub(crate) struct LpProblem {
    pub cols: Vec<Vec<(usize, f64)>>,
    pub obj: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub rel: Vec<Rel>,
    pub rhs: Vec<f64>,
}

impl LpProblem {
    pub fn n_rows(&self) -> usize {
        self.rel.len()
    }

    pub fn n_structural(&self) -> usize {
        self.cols.len()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum SimplexStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Basis snapshot used to warm-start the dual simplex at child nodes.
#[derive(Clone, Debug)]
pub(crate) struct BasisState {
    basis: Vec<usize>,
    at_upper: Vec<bool>,
}

pub(crate) struct SimplexOutcome {
    pub status: SimplexStatus,
    /// Structural variable values (empty unless optimal).
    pub values: Vec<f64>,
    pub objective: f64,
}

enum Blocking {
    /// Entering variable flips to its opposite bound.
    Flip,
    /// Basic variable on this row leaves at the given bound side.
    Row(usize, bool),
    Unbounded,
}

/// Working state of one solve. The same structure serves cold primal solves
/// and warm dual re-solves; `lb`/`ub` hold the effective bounds including
/// any per-node overrides. Cloning copies the full factorization, which
/// lets a branch-and-bound resume sibling solves from a live parent state.
#[derive(Clone)]
pub(crate) struct Simplex<'a> {
    prob: &'a LpProblem,
    m: usize,
    n_struct: usize,
    n_slack: usize,
    slack_rows: Vec<usize>,
    /// Artificial sign per row (the artificial column is sign * e_row).
    art_sign: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    /// Row of each basic column, or usize::MAX when nonbasic.
    basic_row: Vec<usize>,
    at_upper: Vec<bool>,
    /// Dense row-major basis inverse.
    binv: Vec<f64>,
    /// Values of basic variables per row.
    xb: Vec<f64>,
    bland: bool,
    degenerate_run: usize,
}

impl<'a> Simplex<'a> {
    pub fn new(prob: &'a LpProblem, lb: &[f64], ub: &[f64]) -> Self {
        let m = prob.n_rows();
        let n_struct = prob.n_structural();
        let slack_rows: Vec<usize> = (0..m).filter(|&i| prob.rel[i] == Rel::Le).collect();
        let n_slack = slack_rows.len();
        let n_total = n_struct + n_slack + m;

        let mut full_lb = lb.to_vec();
        let mut full_ub = ub.to_vec();
        // Slacks are [0, inf); artificial slots stay closed until phase 1
        // opens the ones it needs.
        full_lb.extend(std::iter::repeat(0.0).take(n_slack + m));
        full_ub.extend(std::iter::repeat(f64::INFINITY).take(n_slack));
        full_ub.extend(std::iter::repeat(0.0).take(m));

        Simplex {
            prob,
            m,
            n_struct,
            n_slack,
            slack_rows,
            art_sign: vec![1.0; m],
            lb: full_lb,
            ub: full_ub,
            cost: vec![0.0; n_total],
            basis: vec![0; m],
            basic_row: vec![usize::MAX; n_total],
            at_upper: vec![false; n_total],
            binv: vec![0.0; m * m],
            xb: vec![0.0; m],
            bland: false,
            degenerate_run: 0,
        }
    }

    fn n_total(&self) -> usize {
        self.n_struct + self.n_slack + self.m
    }

    fn art_col(&self, row: usize) -> usize {
        self.n_struct + self.n_slack + row
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= self.n_struct + self.n_slack
    }

    fn is_fixed(&self, col: usize) -> bool {
        self.ub[col] - self.lb[col] <= 0.0
    }

    fn nb_value(&self, col: usize) -> f64 {
        if self.at_upper[col] {
            self.ub[col]
        } else {
            self.lb[col]
        }
    }

    /// Sparse entries of any column (structural, slack or artificial).
    fn column(&self, col: usize) -> ColumnEntries<'_> {
        if col < self.n_struct {
            ColumnEntries::Sparse(self.prob.cols[col].iter())
        } else if col < self.n_struct + self.n_slack {
            ColumnEntries::Unit(Some((self.slack_rows[col - self.n_struct], 1.0)))
        } else {
            let row = col - self.n_struct - self.n_slack;
            ColumnEntries::Unit(Some((row, self.art_sign[row])))
        }
    }

    /// rhs minus the contribution of every nonbasic variable.
    fn nonbasic_residual(&self) -> Vec<f64> {
        let mut r = self.prob.rhs.clone();
        for col in 0..self.n_total() {
            if self.basic_row[col] != usize::MAX {
                continue;
            }
            let v = self.nb_value(col);
            if v != 0.0 {
                for (row, coef) in self.column(col) {
                    r[row] -= coef * v;
                }
            }
        }
        r
    }

    fn recompute_xb(&mut self) {
        let r = self.nonbasic_residual();
        for i in 0..self.m {
            let row = &self.binv[i * self.m..(i + 1) * self.m];
            self.xb[i] = row.iter().zip(&r).map(|(a, b)| a * b).sum();
        }
    }

    /// Rebuilds the dense inverse from the basis columns (Gauss-Jordan with
    /// partial pivoting). Fails on a singular basis.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut mat = vec![0.0; m * m];
        for (i, &col) in self.basis.iter().enumerate() {
            for (row, coef) in self.column(col) {
                mat[row * m + i] = coef;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let mut piv_row = k;
            let mut piv_val = mat[k * m + k].abs();
            for i in (k + 1)..m {
                let v = mat[i * m + k].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = i;
                }
            }
            if piv_val < 1e-12 {
                return Err(Error::Numerical {
                    reason: "singular basis during refactorization".into(),
                });
            }
            if piv_row != k {
                for j in 0..m {
                    mat.swap(k * m + j, piv_row * m + j);
                    inv.swap(k * m + j, piv_row * m + j);
                }
            }
            let p = mat[k * m + k];
            for j in 0..m {
                mat[k * m + j] /= p;
                inv[k * m + j] /= p;
            }
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = mat[i * m + k];
                if f != 0.0 {
                    for j in 0..m {
                        mat[i * m + j] -= f * mat[k * m + j];
                        inv[i * m + j] -= f * inv[k * m + j];
                    }
                }
            }
        }
        self.binv = inv;
        Ok(())
    }

    /// w = binv * column(col)
    fn ftran(&self, col: usize, w: &mut [f64]) {
        w.iter_mut().for_each(|x| *x = 0.0);
        for (row, coef) in self.column(col) {
            if coef == 0.0 {
                continue;
            }
            for i in 0..self.m {
                w[i] += coef * self.binv[i * self.m + row];
            }
        }
    }

    fn reduced_cost(&self, col: usize, y: &[f64]) -> f64 {
        let mut d = self.cost[col];
        for (row, coef) in self.column(col) {
            d -= coef * y[row];
        }
        d
    }

    /// y = cost_B' * binv
    fn duals(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.binv[i * self.m..(i + 1) * self.m];
                for (k, yk) in y.iter_mut().enumerate() {
                    *yk += cb * row[k];
                }
            }
        }
        y
    }

    /// Primal ratio test for entering `col` moving in direction `dir`.
    fn ratio_test(&self, col: usize, dir: f64, w: &[f64]) -> (f64, Blocking) {
        let own_range = self.ub[col] - self.lb[col];
        let mut min_t = own_range;
        let mut blocked_by_row = false;
        for i in 0..self.m {
            let wi = w[i];
            if wi.abs() <= PIVOT_TOL {
                continue;
            }
            let bi = self.basis[i];
            let delta = dir * wi; // xb[i] moves by -delta * t
            let t = if delta > 0.0 {
                (self.xb[i] - self.lb[bi]).max(0.0) / delta
            } else {
                let ubi = self.ub[bi];
                if !ubi.is_finite() {
                    continue;
                }
                (ubi - self.xb[i]).max(0.0) / (-delta)
            };
            if t < min_t {
                min_t = t;
                blocked_by_row = true;
            }
        }
        if min_t.is_infinite() {
            return (f64::INFINITY, Blocking::Unbounded);
        }
        if !blocked_by_row {
            return (own_range, Blocking::Flip);
        }
        // A basic variable blocks strictly before (or at) the entering
        // variable's own range: pick the blocking row among near-ties.
        let window = min_t + STEP_TOL.max(1e-9 * min_t.abs());
        let mut best: Option<(usize, bool, f64)> = None; // (row, leave_at_upper, |pivot|)
        for i in 0..self.m {
            let wi = w[i];
            if wi.abs() <= PIVOT_TOL {
                continue;
            }
            let bi = self.basis[i];
            let delta = dir * wi;
            let (t, leave_at_upper) = if delta > 0.0 {
                ((self.xb[i] - self.lb[bi]).max(0.0) / delta, false)
            } else {
                let ubi = self.ub[bi];
                if !ubi.is_finite() {
                    continue;
                }
                ((ubi - self.xb[i]).max(0.0) / (-delta), true)
            };
            if t > window {
                continue;
            }
            let better = match best {
                None => true,
                Some((row, _, piv)) => {
                    if self.bland {
                        bi < self.basis[row]
                    } else {
                        wi.abs() > piv
                    }
                }
            };
            if better {
                best = Some((i, leave_at_upper, wi.abs()));
            }
        }
        match best {
            Some((row, up, _)) => (min_t.max(0.0), Blocking::Row(row, up)),
            None => (own_range, Blocking::Flip),
        }
    }

    /// Applies one pivot step; `leave` carries the leaving row and the bound
    /// side the leaving variable exits at, or None for a bound flip.
    fn apply_pivot(&mut self, col: usize, dir: f64, step: f64, w: &[f64], leave: Option<(usize, bool)>) {
        for i in 0..self.m {
            self.xb[i] -= dir * step * w[i];
        }
        match leave {
            None => {
                self.at_upper[col] = !self.at_upper[col];
            }
            Some((r, leave_at_upper)) => {
                let leaving = self.basis[r];
                let entering_value = self.nb_value(col) + dir * step;
                self.at_upper[leaving] = leave_at_upper;
                self.basic_row[leaving] = usize::MAX;
                self.basis[r] = col;
                self.basic_row[col] = r;
                self.xb[r] = entering_value;

                // Rank-one update of the dense inverse.
                let pivot = w[r];
                let m = self.m;
                let (before, rest) = self.binv.split_at_mut(r * m);
                let (prow, after) = rest.split_at_mut(m);
                for x in prow.iter_mut() {
                    *x /= pivot;
                }
                for (i, chunk) in before.chunks_exact_mut(m).enumerate() {
                    let f = w[i];
                    if f != 0.0 {
                        for (a, b) in chunk.iter_mut().zip(prow.iter()) {
                            *a -= f * *b;
                        }
                    }
                }
                for (off, chunk) in after.chunks_exact_mut(m).enumerate() {
                    let f = w[r + 1 + off];
                    if f != 0.0 {
                        for (a, b) in chunk.iter_mut().zip(prow.iter()) {
                            *a -= f * *b;
                        }
                    }
                }
            }
        }
        if step <= STEP_TOL {
            self.degenerate_run += 1;
            if self.degenerate_run > BLAND_TRIGGER {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
        }
    }

    /// Runs primal iterations to optimality for the current cost vector.
    fn primal_loop(&mut self, max_iter: usize) -> Result<SimplexStatus> {
        let mut w = vec![0.0; self.m];
        for iter in 0..max_iter {
            let y = self.duals();
            let mut enter: Option<(usize, f64, f64)> = None; // (col, dir, |d|)
            for col in 0..self.n_total() {
                if self.basic_row[col] != usize::MAX || self.is_fixed(col) {
                    continue;
                }
                let d = self.reduced_cost(col, &y);
                let (violates, dir) = if self.at_upper[col] {
                    (d > DUAL_TOL, -1.0)
                } else {
                    (d < -DUAL_TOL, 1.0)
                };
                if !violates {
                    continue;
                }
                if self.bland {
                    enter = Some((col, dir, d.abs()));
                    break;
                }
                if enter.as_ref().map_or(true, |&(_, _, s)| d.abs() > s) {
                    enter = Some((col, dir, d.abs()));
                }
            }
            let Some((col, dir, _)) = enter else {
                return Ok(SimplexStatus::Optimal);
            };

            self.ftran(col, &mut w);
            let (step, blocking) = self.ratio_test(col, dir, &w);
            match blocking {
                Blocking::Unbounded => return Ok(SimplexStatus::Unbounded),
                Blocking::Flip => self.apply_pivot(col, dir, step, &w, None),
                Blocking::Row(r, up) => self.apply_pivot(col, dir, step, &w, Some((r, up))),
            }

            if iter % 512 == 511 {
                self.refactor()?;
                self.recompute_xb();
            }
        }
        Err(Error::Numerical {
            reason: "primal simplex iteration limit".into(),
        })
    }

    /// Builds the initial slack/artificial basis and runs phase 1 if needed.
    fn phase1(&mut self) -> Result<SimplexStatus> {
        let n_total = self.n_total();
        for col in 0..n_total {
            self.at_upper[col] = false;
            self.basic_row[col] = usize::MAX;
        }
        for row in 0..self.m {
            let a = self.art_col(row);
            self.lb[a] = 0.0;
            self.ub[a] = 0.0;
            self.art_sign[row] = 1.0;
        }

        let mut residual = self.prob.rhs.clone();
        for col in 0..self.n_struct {
            let v = self.nb_value(col);
            if v != 0.0 {
                for &(row, coef) in &self.prob.cols[col] {
                    residual[row] -= coef * v;
                }
            }
        }

        let mut slack_of_row = vec![usize::MAX; self.m];
        for (k, &row) in self.slack_rows.iter().enumerate() {
            slack_of_row[row] = self.n_struct + k;
        }

        let mut need_phase1 = false;
        for row in 0..self.m {
            let r = residual[row];
            let slack = slack_of_row[row];
            if slack != usize::MAX && r >= 0.0 {
                self.basis[row] = slack;
                self.basic_row[slack] = row;
                self.xb[row] = r;
            } else {
                let a = self.art_col(row);
                self.art_sign[row] = if r >= 0.0 { 1.0 } else { -1.0 };
                self.ub[a] = f64::INFINITY;
                self.basis[row] = a;
                self.basic_row[a] = row;
                self.xb[row] = r.abs();
                if r.abs() > FEAS_TOL {
                    need_phase1 = true;
                }
            }
        }
        self.binv.iter_mut().for_each(|x| *x = 0.0);
        for row in 0..self.m {
            let d = if self.is_artificial(self.basis[row]) {
                self.art_sign[row]
            } else {
                1.0
            };
            self.binv[row * self.m + row] = d;
        }

        if !need_phase1 {
            self.seal_artificials();
            return Ok(SimplexStatus::Optimal);
        }

        self.cost.iter_mut().for_each(|c| *c = 0.0);
        for row in 0..self.m {
            let a = self.art_col(row);
            self.cost[a] = 1.0;
        }
        let status = self.primal_loop(self.iter_cap())?;
        if status == SimplexStatus::Unbounded {
            return Err(Error::Numerical {
                reason: "phase 1 reported unbounded".into(),
            });
        }
        let infeas: f64 = (0..self.m)
            .filter(|&i| self.is_artificial(self.basis[i]))
            .map(|i| self.xb[i].abs())
            .sum();
        let scale = 1.0 + self.prob.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeas > FEAS_TOL * scale {
            return Ok(SimplexStatus::Infeasible);
        }
        self.pivot_out_artificials();
        self.seal_artificials();
        Ok(SimplexStatus::Optimal)
    }

    /// Fixes every nonbasic artificial at zero so it can never re-enter.
    fn seal_artificials(&mut self) {
        for row in 0..self.m {
            let a = self.art_col(row);
            if self.basic_row[a] == usize::MAX {
                self.ub[a] = 0.0;
                self.at_upper[a] = false;
            }
        }
    }

    /// Degenerate pivots replacing basic zero-valued artificials with
    /// structural or slack columns where a usable pivot exists. Rows without
    /// one are redundant; their artificial stays basic at zero.
    fn pivot_out_artificials(&mut self) {
        let mut w = vec![0.0; self.m];
        for row in 0..self.m {
            if !self.is_artificial(self.basis[row]) {
                continue;
            }
            for col in 0..self.n_struct + self.n_slack {
                if self.basic_row[col] != usize::MAX || self.is_fixed(col) {
                    continue;
                }
                let alpha: f64 = self
                    .column(col)
                    .map(|(r, c)| c * self.binv[row * self.m + r])
                    .sum();
                if alpha.abs() > 1e-6 {
                    self.ftran(col, &mut w);
                    self.apply_pivot(col, 1.0, 0.0, &w, Some((row, false)));
                    break;
                }
            }
        }
    }

    fn iter_cap(&self) -> usize {
        1000 + 60 * (self.m + self.n_total())
    }

    fn extract_values(&self) -> Vec<f64> {
        let mut values = vec![0.0; self.n_struct];
        for (col, value) in values.iter_mut().enumerate() {
            *value = match self.basic_row[col] {
                usize::MAX => self.nb_value(col),
                row => self.xb[row],
            };
        }
        values
    }

    /// Full cold solve: phase 1 then phase 2.
    pub fn solve(&mut self) -> Result<SimplexOutcome> {
        self.bland = false;
        self.degenerate_run = 0;
        if self.phase1()? == SimplexStatus::Infeasible {
            return Ok(SimplexOutcome {
                status: SimplexStatus::Infeasible,
                values: Vec::new(),
                objective: f64::INFINITY,
            });
        }
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        self.cost[..self.n_struct].copy_from_slice(&self.prob.obj);
        let status = self.primal_loop(self.iter_cap())?;
        self.finish(status)
    }

    fn finish(&mut self, status: SimplexStatus) -> Result<SimplexOutcome> {
        if status == SimplexStatus::Unbounded {
            return Ok(SimplexOutcome {
                status,
                values: Vec::new(),
                objective: f64::NEG_INFINITY,
            });
        }
        let scale = 1.0 + self.prob.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for attempt in 0..2 {
            self.recompute_xb();
            let worst = (0..self.m)
                .map(|i| {
                    let b = self.basis[i];
                    (self.lb[b] - self.xb[i])
                        .max(self.xb[i] - self.ub[b])
                        .max(0.0)
                })
                .fold(0.0f64, f64::max);
            if worst <= 100.0 * FEAS_TOL * scale {
                break;
            }
            if attempt == 1 {
                return Err(Error::Numerical {
                    reason: format!("final basis violates bounds by {worst}"),
                });
            }
            self.refactor()?;
            self.recompute_xb();
            if self.primal_loop(self.iter_cap())? == SimplexStatus::Unbounded {
                return Ok(SimplexOutcome {
                    status: SimplexStatus::Unbounded,
                    values: Vec::new(),
                    objective: f64::NEG_INFINITY,
                });
            }
        }
        let values = self.extract_values();
        let objective = values
            .iter()
            .zip(&self.prob.obj)
            .map(|(x, c)| x * c)
            .sum();
        Ok(SimplexOutcome {
            status: SimplexStatus::Optimal,
            values,
            objective,
        })
    }

    pub fn basis_state(&self) -> BasisState {
        BasisState {
            basis: self.basis.clone(),
            at_upper: self.at_upper[..self.n_struct + self.n_slack].to_vec(),
        }
    }

    /// Reduced costs of the given columns at the current basis (zero for
    /// basic columns). Only meaningful after a phase-2 solve.
    pub fn reduced_costs_for(&self, cols: &[usize]) -> Vec<f64> {
        let y = self.duals();
        cols.iter()
            .map(|&c| {
                if self.basic_row[c] != usize::MAX {
                    0.0
                } else {
                    self.reduced_cost(c, &y)
                }
            })
            .collect()
    }

    /// Replaces the structural bounds, normalizing nonbasic bound flags for
    /// newly fixed variables. Used when reusing a live state at a child node.
    pub fn apply_bounds(&mut self, lb: &[f64], ub: &[f64]) {
        self.lb[..self.n_struct].copy_from_slice(lb);
        self.ub[..self.n_struct].copy_from_slice(ub);
        for col in 0..self.n_struct {
            if self.basic_row[col] == usize::MAX && self.is_fixed(col) {
                self.at_upper[col] = false;
            }
        }
    }

    /// Warm start from a previously optimal basis after bound changes: dual
    /// pivots restore primal feasibility, then a primal cleanup finishes.
    /// Returns None when the snapshot cannot be reused (caller solves cold).
    pub fn solve_dual_from(&mut self, state: &BasisState) -> Result<Option<SimplexOutcome>> {
        if state.basis.len() != self.m || state.at_upper.len() != self.n_struct + self.n_slack {
            return Ok(None);
        }
        for x in self.basic_row.iter_mut() {
            *x = usize::MAX;
        }
        for row in 0..self.m {
            let a = self.art_col(row);
            self.lb[a] = 0.0;
            self.ub[a] = 0.0;
        }
        for (row, &col) in state.basis.iter().enumerate() {
            if self.is_artificial(col) {
                return Ok(None);
            }
            self.basis[row] = col;
            self.basic_row[col] = row;
        }
        for col in 0..self.n_struct + self.n_slack {
            if self.basic_row[col] != usize::MAX {
                continue;
            }
            self.at_upper[col] =
                state.at_upper[col] && self.ub[col].is_finite() && !self.is_fixed(col);
        }
        if self.refactor().is_err() {
            return Ok(None);
        }
        self.resolve_dual()
    }

    /// Dual re-solve from the current in-memory state (basis, inverse and
    /// bound flags already installed), as used after `apply_bounds`.
    pub fn resolve_dual(&mut self) -> Result<Option<SimplexOutcome>> {
        self.bland = false;
        self.degenerate_run = 0;
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        self.cost[..self.n_struct].copy_from_slice(&self.prob.obj);
        self.recompute_xb();

        let n_real = self.n_struct + self.n_slack;
        let mut d = vec![0.0; n_real];
        let y = self.duals();
        for col in 0..n_real {
            if self.basic_row[col] == usize::MAX {
                d[col] = self.reduced_cost(col, &y);
            }
        }
        // Bound changes never disturb reduced costs, so the snapshot must
        // still be dual feasible; anything else means it is stale.
        for col in 0..n_real {
            if self.basic_row[col] != usize::MAX || self.is_fixed(col) {
                continue;
            }
            let ok = if self.at_upper[col] {
                d[col] <= 1e-6
            } else {
                d[col] >= -1e-6
            };
            if !ok {
                return Ok(None);
            }
        }

        let max_iter = self.iter_cap();
        let mut w = vec![0.0; self.m];
        for _ in 0..max_iter {
            let mut leave: Option<(usize, f64, bool)> = None; // (row, violation, below)
            for i in 0..self.m {
                let b = self.basis[i];
                let below = self.lb[b] - self.xb[i];
                let above = self.xb[i] - self.ub[b];
                let (viol, is_below) = if below > above {
                    (below, true)
                } else {
                    (above, false)
                };
                if viol > FEAS_TOL && leave.as_ref().map_or(true, |&(_, best, _)| viol > best) {
                    leave = Some((i, viol, is_below));
                }
            }
            let Some((row, _, below)) = leave else {
                let status = self.primal_loop(max_iter)?;
                return self.finish(status).map(Some);
            };

            let rho = &self.binv[row * self.m..(row + 1) * self.m];
            let mut enter: Option<(usize, f64)> = None; // (col, |ratio|)
            for col in 0..n_real {
                if self.basic_row[col] != usize::MAX || self.is_fixed(col) {
                    continue;
                }
                let alpha: f64 = self.column(col).map(|(r, c)| c * rho[r]).sum();
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let dir = if self.at_upper[col] { -1.0 } else { 1.0 };
                let effect_up = -alpha * dir; // d(xb_row)/d(step)
                let usable = if below { effect_up > 0.0 } else { effect_up < 0.0 };
                if !usable {
                    continue;
                }
                let ratio = (d[col] / alpha).abs();
                if enter.as_ref().map_or(true, |&(_, best)| ratio < best) {
                    enter = Some((col, ratio));
                }
            }
            let Some((col, _)) = enter else {
                return Ok(Some(SimplexOutcome {
                    status: SimplexStatus::Infeasible,
                    values: Vec::new(),
                    objective: f64::INFINITY,
                }));
            };

            self.ftran(col, &mut w);
            let dir = if self.at_upper[col] { -1.0 } else { 1.0 };
            let target = if below {
                self.lb[self.basis[row]]
            } else {
                self.ub[self.basis[row]]
            };
            let denom = dir * w[row];
            if denom.abs() <= PIVOT_TOL {
                return Ok(None);
            }
            let step = ((self.xb[row] - target) / denom).max(0.0);
            if !step.is_finite() {
                return Ok(None);
            }
            self.apply_pivot(col, dir, step, &w, Some((row, !below)));

            let y = self.duals();
            for c in 0..n_real {
                if self.basic_row[c] == usize::MAX {
                    d[c] = self.reduced_cost(c, &y);
                }
            }
        }
        Ok(None)
    }
}

enum ColumnEntries<'a> {
    Sparse(std::slice::Iter<'a, (usize, f64)>),
    Unit(Option<(usize, f64)>),
}

impl<'a> Iterator for ColumnEntries<'a> {
    type Item = (usize, f64);

    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColumnEntries::Sparse(it) => it.next().map(|&(r, c)| (r, c)),
            ColumnEntries::Unit(x) => x.take(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(prob: &LpProblem) -> SimplexOutcome {
        let lb = prob.lb.clone();
        let ub = prob.ub.clone();
        Simplex::new(prob, &lb, &ub).solve().unwrap()
    }

    #[test]
    fn simple_two_var_lp() {
        // min -x - 2y  s.t. x + y <= 4, 0 <= x <= 3, 0 <= y <= 2
        let prob = LpProblem {
            cols: vec![vec![(0, 1.0)], vec![(0, 1.0)]],
            obj: vec![-1.0, -2.0],
            lb: vec![0.0, 0.0],
            ub: vec![3.0, 2.0],
            rel: vec![Rel::Le],
            rhs: vec![4.0],
        };
        let out = solve(&prob);
        assert_eq!(out.status, SimplexStatus::Optimal);
        assert!((out.objective - (-6.0)).abs() < 1e-9, "{}", out.objective);
        assert!((out.values[0] - 2.0).abs() < 1e-9);
        assert!((out.values[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn equality_rows_need_phase1() {
        // min x + y  s.t. x + y = 2, x - y = 0, 0 <= x,y <= 5
        let prob = LpProblem {
            cols: vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, -1.0)]],
            obj: vec![1.0, 1.0],
            lb: vec![0.0, 0.0],
            ub: vec![5.0, 5.0],
            rel: vec![Rel::Eq, Rel::Eq],
            rhs: vec![2.0, 0.0],
        };
        let out = solve(&prob);
        assert_eq!(out.status, SimplexStatus::Optimal);
        assert!((out.objective - 2.0).abs() < 1e-9);
        assert!((out.values[0] - 1.0).abs() < 1e-9);
        assert!((out.values[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        // x <= 1 and -x <= -3
        let prob = LpProblem {
            cols: vec![vec![(0, 1.0), (1, -1.0)]],
            obj: vec![0.0],
            lb: vec![0.0],
            ub: vec![10.0],
            rel: vec![Rel::Le, Rel::Le],
            rhs: vec![1.0, -3.0],
        };
        let out = solve(&prob);
        assert_eq!(out.status, SimplexStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        // min -x with x free above and only y constrained
        let prob = LpProblem {
            cols: vec![vec![], vec![(0, 1.0)]],
            obj: vec![-1.0, 0.0],
            lb: vec![0.0, 0.0],
            ub: vec![f64::INFINITY, 1.0],
            rel: vec![Rel::Le],
            rhs: vec![1.0],
        };
        let out = solve(&prob);
        assert_eq!(out.status, SimplexStatus::Unbounded);
    }

    #[test]
    fn respects_upper_bounds_via_flips() {
        // min -x - y s.t. x + 2y <= 10, 0 <= x <= 4, 0 <= y <= 4
        let prob = LpProblem {
            cols: vec![vec![(0, 1.0)], vec![(0, 2.0)]],
            obj: vec![-1.0, -1.0],
            lb: vec![0.0, 0.0],
            ub: vec![4.0, 4.0],
            rel: vec![Rel::Le],
            rhs: vec![10.0],
        };
        let out = solve(&prob);
        assert_eq!(out.status, SimplexStatus::Optimal);
        assert!((out.objective + 7.0).abs() < 1e-9, "{}", out.objective);
        assert!((out.values[0] - 4.0).abs() < 1e-9);
        assert!((out.values[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn handles_negative_lower_bounds() {
        // min x s.t. x + y = 1, -5 <= x <= 5, 0 <= y <= 3
        let prob = LpProblem {
            cols: vec![vec![(0, 1.0)], vec![(0, 1.0)]],
            obj: vec![1.0, 0.0],
            lb: vec![-5.0, 0.0],
            ub: vec![5.0, 3.0],
            rel: vec![Rel::Eq],
            rhs: vec![1.0],
        };
        let out = solve(&prob);
        assert_eq!(out.status, SimplexStatus::Optimal);
        assert!((out.values[0] + 2.0).abs() < 1e-9, "{:?}", out.values);
        assert!((out.objective + 2.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_variables_stay_fixed() {
        // min -x - y with y fixed at 1, x + y <= 3
        let prob = LpProblem {
            cols: vec![vec![(0, 1.0)], vec![(0, 1.0)]],
            obj: vec![-1.0, -1.0],
            lb: vec![0.0, 1.0],
            ub: vec![10.0, 1.0],
            rel: vec![Rel::Le],
            rhs: vec![3.0],
        };
        let out = solve(&prob);
        assert_eq!(out.status, SimplexStatus::Optimal);
        assert!((out.values[0] - 2.0).abs() < 1e-9);
        assert!((out.values[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dual_warm_start_matches_cold_solve() {
        // min -x - 2y s.t. x + y <= 4, y <= 3; then fix y to zero.
        let prob = LpProblem {
            cols: vec![vec![(0, 1.0)], vec![(0, 1.0), (1, 1.0)]],
            obj: vec![-1.0, -2.0],
            lb: vec![0.0, 0.0],
            ub: vec![6.0, 5.0],
            rel: vec![Rel::Le, Rel::Le],
            rhs: vec![4.0, 3.0],
        };
        let lb = prob.lb.clone();
        let ub = prob.ub.clone();
        let mut s = Simplex::new(&prob, &lb, &ub);
        let out = s.solve().unwrap();
        assert_eq!(out.status, SimplexStatus::Optimal);
        let state = s.basis_state();

        let mut lb2 = lb.clone();
        let mut ub2 = ub.clone();
        lb2[1] = 0.0;
        ub2[1] = 0.0;
        let mut warm = Simplex::new(&prob, &lb2, &ub2);
        let got = warm.solve_dual_from(&state).unwrap();
        let mut cold = Simplex::new(&prob, &lb2, &ub2);
        let want = cold.solve().unwrap();
        match got {
            Some(sol) => {
                assert_eq!(sol.status, want.status);
                assert!(
                    (sol.objective - want.objective).abs() < 1e-9,
                    "warm {} vs cold {}",
                    sol.objective,
                    want.objective
                );
            }
            None => panic!("warm start rejected a reusable basis"),
        }
    }
}
