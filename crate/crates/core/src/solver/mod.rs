//! Exact fitting of a bound triple to a cash-flow data set.
//!
//! `build_instance` emits the big-M mixed-integer program whose decision
//! variables are the bounds (lower, target, upper) plus, per step, the two
//! transfer amounts, the end-of-day balance and the two trigger binaries.
//! `fit_bounds` solves it with a best-first branch-and-bound over the LP
//! relaxation; `brute_force_fit` is an independent grid-search oracle and
//! `verify_fit` audits any fit by re-simulation.

mod branch;
mod brute;
mod simplex;
mod verify;

use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cost::CostStructure;
use crate::error::{Error, Result};
use crate::policy::BoundTriple;
use crate::series::CashFlowSeries;

pub use brute::{brute_force_fit, GridSpec};
pub use verify::{verify_fit, VerifyReport};

pub(crate) use simplex::FEAS_TOL;
use simplex::{LpProblem, Rel, Simplex, SimplexStatus};

/// Relative optimality gap below which a fit counts as optimal.
pub const DEFAULT_GAP: f64 = 1e-6;
/// Integrality tolerance for the trigger binaries.
pub const INT_TOL: f64 = 1e-6;

/// Maps the MILP's structural variables to column indices.
///
/// Layout: `[L, Z, H]`, then per step `t` the continuous block
/// `[xp_t, xm_t, b_t]`, then all binaries `[zp_t, zm_t]` contiguously.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    n_steps: usize,
}

impl VarLayout {
    pub fn new(n_steps: usize) -> Self {
        Self { n_steps }
    }

    pub fn lower(&self) -> usize {
        0
    }

    pub fn target(&self) -> usize {
        1
    }

    pub fn upper(&self) -> usize {
        2
    }

    pub fn pos_transfer(&self, t: usize) -> usize {
        3 + 3 * t
    }

    pub fn neg_transfer(&self, t: usize) -> usize {
        3 + 3 * t + 1
    }

    pub fn balance(&self, t: usize) -> usize {
        3 + 3 * t + 2
    }

    /// Column of binary `k`; up-trigger of step t is k = 2t, down-trigger
    /// is k = 2t + 1.
    pub fn binary(&self, k: usize) -> usize {
        3 + 3 * self.n_steps + k
    }

    pub fn n_binaries(&self) -> usize {
        2 * self.n_steps
    }

    pub fn n_vars(&self) -> usize {
        3 + 5 * self.n_steps
    }
}

/// The assembled mixed-integer program for one fitting data set.
#[derive(Debug, Clone)]
pub struct MilpInstance {
    n_steps: usize,
    flows: Vec<f64>,
    b0: f64,
    alpha: CostStructure,
    b_min: f64,
    big_m: f64,
    var_upper: f64,
    layout: VarLayout,
    lp: LpProblem,
}

/// Status of one LP relaxation solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solution of one LP relaxation; `values` follows [`VarLayout`].
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
}

/// Resource limits for `fit_bounds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveLimits {
    /// Relative optimality gap at which the search stops.
    pub gap: f64,
    /// Maximum number of LP relaxations solved.
    pub max_nodes: u64,
    /// Wall-clock cap in seconds (infinite by default; breaks run-to-run
    /// determinism when it fires).
    pub max_seconds: f64,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            gap: DEFAULT_GAP,
            max_nodes: 1_000_000,
            max_seconds: f64::INFINITY,
        }
    }
}

/// Why the branch-and-bound stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Optimal,
    GapLimit,
    NodeLimit,
    TimeLimit,
    Infeasible,
}

/// A fitted bound triple with solver statistics. The objective is the
/// unaveraged cost sum, and re-simulating `bounds` on the fitting data
/// reproduces it within `1e-6 * (1 + |objective|)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub bounds: BoundTriple,
    pub objective: f64,
    pub nodes_explored: u64,
    pub gap: f64,
    #[serde(skip, default)]
    pub wall_time: Duration,
    pub status: FitStatus,
}

impl MilpInstance {
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn flows(&self) -> &[f64] {
        &self.flows
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn alpha(&self) -> &CostStructure {
        &self.alpha
    }

    pub fn b_min(&self) -> f64 {
        self.b_min
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn var_upper(&self) -> f64 {
        self.var_upper
    }

    pub fn layout(&self) -> VarLayout {
        self.layout
    }

    pub fn n_binaries(&self) -> usize {
        self.layout.n_binaries()
    }

    pub(crate) fn lp(&self) -> &LpProblem {
        &self.lp
    }

    /// Effective variable bounds with a partial binary assignment applied.
    pub(crate) fn bounds_with(&self, fixed: &[Option<bool>]) -> (Vec<f64>, Vec<f64>) {
        let mut lb = self.lp.lb.clone();
        let mut ub = self.lp.ub.clone();
        for (k, assignment) in fixed.iter().enumerate() {
            if let Some(value) = assignment {
                let col = self.layout.binary(k);
                let v = if *value { 1.0 } else { 0.0 };
                lb[col] = v;
                ub[col] = v;
            }
        }
        (lb, ub)
    }

    /// Writes the instance in LP text format for cross-checking against
    /// external solvers.
    pub fn write_lp_format<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let name = |col: usize| -> String {
            let l = self.layout;
            if col == l.lower() {
                "L".into()
            } else if col == l.target() {
                "Z".into()
            } else if col == l.upper() {
                "H".into()
            } else if col < l.binary(0) {
                let t = (col - 3) / 3;
                match (col - 3) % 3 {
                    0 => format!("xp_{}", t + 1),
                    1 => format!("xm_{}", t + 1),
                    _ => format!("b_{}", t + 1),
                }
            } else {
                let k = col - l.binary(0);
                if k % 2 == 0 {
                    format!("zp_{}", k / 2 + 1)
                } else {
                    format!("zm_{}", k / 2 + 1)
                }
            }
        };

        writeln!(w, "Minimize")?;
        let mut obj = String::from(" obj:");
        for (col, &c) in self.lp.obj.iter().enumerate() {
            if c != 0.0 {
                obj.push_str(&format!(" + {} {}", c, name(col)));
            }
        }
        writeln!(w, "{}", obj)?;

        writeln!(w, "Subject To")?;
        let row_names = self.row_names();
        // Rows are stored column-wise; transpose for printing.
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.lp.n_rows()];
        for (col, entries) in self.lp.cols.iter().enumerate() {
            for &(row, coef) in entries {
                rows[row].push((col, coef));
            }
        }
        for (i, entries) in rows.iter().enumerate() {
            let mut line = format!(" {}:", row_names[i]);
            for &(col, coef) in entries {
                if coef >= 0.0 {
                    line.push_str(&format!(" + {} {}", coef, name(col)));
                } else {
                    line.push_str(&format!(" - {} {}", -coef, name(col)));
                }
            }
            let rel = match self.lp.rel[i] {
                Rel::Eq => "=",
                Rel::Le => "<=",
            };
            writeln!(w, "{} {} {}", line, rel, self.lp.rhs[i])?;
        }

        writeln!(w, "Bounds")?;
        for col in 0..self.layout.binary(0) {
            writeln!(w, " {} <= {} <= {}", self.lp.lb[col], name(col), self.lp.ub[col])?;
        }
        writeln!(w, "Binaries")?;
        let mut bins = String::from(" ");
        for k in 0..self.n_binaries() {
            bins.push_str(&name(self.layout.binary(k)));
            bins.push(' ');
        }
        writeln!(w, "{}", bins.trim_end())?;
        writeln!(w, "End")?;
        Ok(())
    }

    fn row_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.lp.n_rows());
        for t in 1..=self.n_steps {
            names.push(format!("trans_{t}"));
            names.push(format!("uptrig_{t}"));
            names.push(format!("upamt_hi_{t}"));
            names.push(format!("upamt_lo_{t}"));
            names.push(format!("dntrig_{t}"));
            names.push(format!("dnamt_hi_{t}"));
            names.push(format!("dnamt_lo_{t}"));
            names.push(format!("band_lo_{t}"));
            names.push(format!("band_hi_{t}"));
            names.push(format!("link_p_{t}"));
            names.push(format!("link_m_{t}"));
            names.push(format!("zsum_{t}"));
        }
        names.push("order_lz".into());
        names.push("order_zh".into());
        names
    }
}

/// Default variable magnitude cap: generous enough that no useful policy is
/// cut off, small enough to keep the relaxation numerically sane.
fn default_var_upper(flows: &[f64], b0: f64, b_min: f64) -> f64 {
    let abs_sum: f64 = flows.iter().map(|f| f.abs()).sum();
    let abs_max: f64 = flows.iter().fold(0.0f64, |a, f| a.max(f.abs()));
    b0.abs() + abs_sum + b_min.abs() + abs_max
}

/// Assembles the MILP for `series` starting from balance `b0` with floor
/// `b_min`. When `big_m` is omitted it defaults to
/// `2 * (|b0| + sum|f_t| + U)`, which no feasible trajectory can exceed.
pub fn build_instance(
    series: &CashFlowSeries,
    b0: f64,
    alpha: &CostStructure,
    b_min: f64,
    big_m: Option<f64>,
) -> Result<MilpInstance> {
    alpha.validate()?;
    let flows = series.flows().to_vec();
    let n = flows.len();
    let var_upper = default_var_upper(&flows, b0, b_min);
    let abs_sum: f64 = flows.iter().map(|f| f.abs()).sum();
    let m_floor = 2.0 * (b0.abs() + abs_sum + var_upper);
    let big_m = match big_m {
        None => m_floor,
        Some(m) if m >= m_floor => m,
        Some(m) => {
            return Err(Error::BigMTooSmall {
                given: m,
                required: m_floor,
            })
        }
    };
    if b_min > var_upper {
        return Err(Error::Infeasible);
    }

    let layout = VarLayout::new(n);
    let n_vars = layout.n_vars();
    let n_rows = 12 * n + 2;

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_vars];
    let mut rel = Vec::with_capacity(n_rows);
    let mut rhs = Vec::with_capacity(n_rows);
    let mut obj = vec![0.0; n_vars];
    let mut lb = vec![0.0; n_vars];
    let mut ub = vec![0.0; n_vars];

    for col in [layout.lower(), layout.target(), layout.upper()] {
        lb[col] = b_min;
        ub[col] = var_upper;
    }
    for t in 0..n {
        lb[layout.pos_transfer(t)] = 0.0;
        ub[layout.pos_transfer(t)] = var_upper;
        lb[layout.neg_transfer(t)] = 0.0;
        ub[layout.neg_transfer(t)] = var_upper;
        lb[layout.balance(t)] = b_min;
        ub[layout.balance(t)] = var_upper;
        obj[layout.pos_transfer(t)] = alpha.gamma1_plus;
        obj[layout.neg_transfer(t)] = alpha.gamma1_minus;
        obj[layout.balance(t)] = alpha.v;
    }
    for k in 0..layout.n_binaries() {
        let col = layout.binary(k);
        lb[col] = 0.0;
        ub[col] = 1.0;
        obj[col] = if k % 2 == 0 {
            alpha.gamma0_plus
        } else {
            alpha.gamma0_minus
        };
    }

    let m = big_m;
    let mut row = 0usize;
    let mut push = |cols: &mut Vec<Vec<(usize, f64)>>,
                    rel_v: &mut Vec<Rel>,
                    rhs_v: &mut Vec<f64>,
                    entries: &[(usize, f64)],
                    r: Rel,
                    b: f64| {
        for &(col, coef) in entries {
            cols[col].push((row, coef));
        }
        rel_v.push(r);
        rhs_v.push(b);
        row += 1;
    };

    let (l_col, z_col, h_col) = (layout.lower(), layout.target(), layout.upper());
    for t in 0..n {
        let f = flows[t];
        let xp = layout.pos_transfer(t);
        let xm = layout.neg_transfer(t);
        let b = layout.balance(t);
        let zp = layout.binary(2 * t);
        let zm = layout.binary(2 * t + 1);
        // Contribution of the previous balance: a variable for t > 0, a
        // constant folded into the rhs for the first step.
        let prev: Option<usize> = if t == 0 {
            None
        } else {
            Some(layout.balance(t - 1))
        };
        let prev_rhs = if t == 0 { b0 } else { 0.0 };
        let with_prev = |mut v: Vec<(usize, f64)>, coef: f64| -> Vec<(usize, f64)> {
            if let Some(p) = prev {
                v.push((p, coef));
            }
            v
        };

        // b_t - b_{t-1} - xp + xm = f_t
        push(
            &mut cols,
            &mut rel,
            &mut rhs,
            &with_prev(vec![(b, 1.0), (xp, -1.0), (xm, 1.0)], -1.0),
            Rel::Eq,
            f + prev_rhs,
        );
        // b_{t-1} + f - L <= M (1 - zp)
        push(
            &mut cols,
            &mut rel,
            &mut rhs,
            &with_prev(vec![(l_col, -1.0), (zp, m)], 1.0),
            Rel::Le,
            m - f - prev_rhs,
        );
        // xp - Z + b_{t-1} + f <= M (1 - zp)
        push(
            &mut cols,
            &mut rel,
            &mut rhs,
            &with_prev(vec![(xp, 1.0), (z_col, -1.0), (zp, m)], 1.0),
            Rel::Le,
            m - f - prev_rhs,
        );
        // -(xp - Z + b_{t-1} + f) <= M (1 - zp)
        push(
            &mut cols,
            &mut rel,
            &mut rhs,
            &with_prev(vec![(xp, -1.0), (z_col, 1.0), (zp, m)], -1.0),
            Rel::Le,
            m + f + prev_rhs,
        );
        // H - b_{t-1} - f <= M (1 - zm)
        push(
            &mut cols,
            &mut rel,
            &mut rhs,
            &with_prev(vec![(h_col, 1.0), (zm, m)], -1.0),
            Rel::Le,
            m + f + prev_rhs,
        );
        // xm + Z - b_{t-1} - f <= M (1 - zm)
        push(
            &mut cols,
            &mut rel,
            &mut rhs,
            &with_prev(vec![(xm, 1.0), (z_col, 1.0), (zm, m)], -1.0),
            Rel::Le,
            m + f + prev_rhs,
        );
        // -(xm + Z - b_{t-1} - f) <= M (1 - zm)
        push(
            &mut cols,
            &mut rel,
            &mut rhs,
            &with_prev(vec![(xm, -1.0), (z_col, -1.0), (zm, m)], 1.0),
            Rel::Le,
            m - f - prev_rhs,
        );
        // L - b_{t-1} - f <= M (zp + zm)
        push(
            &mut cols,
            &mut rel,
            &mut rhs,
            &with_prev(vec![(l_col, 1.0), (zp, -m), (zm, -m)], -1.0),
            Rel::Le,
            f + prev_rhs,
        );
        // b_{t-1} + f - H <= M (zp + zm)
        push(
            &mut cols,
            &mut rel,
            &mut rhs,
            &with_prev(vec![(h_col, -1.0), (zp, -m), (zm, -m)], 1.0),
            Rel::Le,
            -f - prev_rhs,
        );
        // xp <= M zp
        push(
            &mut cols,
            &mut rel,
            &mut rhs,
            &[(xp, 1.0), (zp, -m)],
            Rel::Le,
            0.0,
        );
        // xm <= M zm
        push(
            &mut cols,
            &mut rel,
            &mut rhs,
            &[(xm, 1.0), (zm, -m)],
            Rel::Le,
            0.0,
        );
        // zp + zm <= 1
        push(
            &mut cols,
            &mut rel,
            &mut rhs,
            &[(zp, 1.0), (zm, 1.0)],
            Rel::Le,
            1.0,
        );
    }
    // Ordering chain L <= Z <= H.
    push(
        &mut cols,
        &mut rel,
        &mut rhs,
        &[(l_col, 1.0), (z_col, -1.0)],
        Rel::Le,
        0.0,
    );
    push(
        &mut cols,
        &mut rel,
        &mut rhs,
        &[(z_col, 1.0), (h_col, -1.0)],
        Rel::Le,
        0.0,
    );

    let lp = LpProblem {
        cols,
        obj,
        lb,
        ub,
        rel,
        rhs,
    };
    Ok(MilpInstance {
        n_steps: n,
        flows,
        b0,
        alpha: *alpha,
        b_min,
        big_m,
        var_upper,
        layout,
        lp,
    })
}

/// Solves the LP relaxation with the given partial assignment of binaries
/// (`None` entries stay relaxed to [0, 1]). Numerical failures surface as
/// errors, distinct from an infeasible assignment.
pub fn solve_lp(instance: &MilpInstance, fixed: &[Option<bool>]) -> Result<LpSolution> {
    let (lb, ub) = instance.bounds_with(fixed);
    let mut simplex = Simplex::new(instance.lp(), &lb, &ub);
    let out = simplex.solve()?;
    Ok(LpSolution {
        status: match out.status {
            SimplexStatus::Optimal => LpStatus::Optimal,
            SimplexStatus::Infeasible => LpStatus::Infeasible,
            SimplexStatus::Unbounded => LpStatus::Unbounded,
        },
        values: out.values,
        objective: out.objective,
    })
}

pub use branch::fit_bounds;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostStructure;

    fn alpha1() -> CostStructure {
        CostStructure::new(2.0e-5, 2.0e-5, 1.0e-4, 1.0e-4, 2.0e-4, f64::INFINITY).unwrap()
    }

    fn unit_alpha() -> CostStructure {
        CostStructure::new(1.0, 1.0, 0.0, 0.0, 0.1, f64::INFINITY).unwrap()
    }

    #[test]
    fn instance_variable_counts() {
        let s = CashFlowSeries::new(vec![1.0]).unwrap();
        let inst = build_instance(&s, 0.0, &alpha1(), 0.0, None).unwrap();
        assert_eq!(inst.n_binaries(), 2);
        assert_eq!(inst.layout().n_vars(), 8);

        let s = CashFlowSeries::new(vec![0.5; 25]).unwrap();
        let inst = build_instance(&s, 0.0, &alpha1(), 0.0, None).unwrap();
        assert_eq!(inst.n_binaries(), 50);
        assert_eq!(inst.layout().n_vars(), 128);
        assert_eq!(inst.lp().n_rows(), 12 * 25 + 2);
    }

    #[test]
    fn default_big_m_formula() {
        // b0 = 10, sum|f| = 20, max|f| = 10, b_min = 0
        // U = 10 + 20 + 0 + 10 = 40, M = 2 * (10 + 20 + 40) = 140
        let s = CashFlowSeries::new(vec![10.0, -10.0]).unwrap();
        let inst = build_instance(&s, 10.0, &alpha1(), 0.0, None).unwrap();
        assert_eq!(inst.var_upper(), 40.0);
        assert_eq!(inst.big_m(), 140.0);
    }

    #[test]
    fn rejects_undersized_big_m() {
        let s = CashFlowSeries::new(vec![10.0, -10.0]).unwrap();
        assert!(matches!(
            build_instance(&s, 10.0, &alpha1(), 0.0, Some(10.0)),
            Err(Error::BigMTooSmall { .. })
        ));
        assert!(build_instance(&s, 10.0, &alpha1(), 0.0, Some(200.0)).is_ok());
    }

    #[test]
    fn all_zero_binaries_is_pure_evaluation() {
        // flows keep the no-action trajectory inside [b_min, U]
        let s = CashFlowSeries::new(vec![-2.0, 1.0, -1.0]).unwrap();
        let inst = build_instance(&s, 10.0, &unit_alpha(), 0.0, None).unwrap();
        let fixed = vec![Some(false); inst.n_binaries()];
        let sol = solve_lp(&inst, &fixed).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        // balances 8, 9, 8 -> objective 0.1 * 25 = 2.5
        assert!((sol.objective - 2.5).abs() < 1e-8, "{}", sol.objective);
        let l = inst.layout();
        assert!((sol.values[l.balance(0)] - 8.0).abs() < 1e-8);
        assert!((sol.values[l.balance(1)] - 9.0).abs() < 1e-8);
        assert!((sol.values[l.balance(2)] - 8.0).abs() < 1e-8);
    }

    #[test]
    fn no_action_below_floor_is_infeasible() {
        let s = CashFlowSeries::new(vec![-5.0]).unwrap();
        let inst = build_instance(&s, 2.0, &unit_alpha(), 0.0, None).unwrap();
        let fixed = vec![Some(false); inst.n_binaries()];
        let sol = solve_lp(&inst, &fixed).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn relaxation_bounds_fixed_patterns() {
        let s = CashFlowSeries::new(vec![-2.0, 3.0]).unwrap();
        let inst = build_instance(&s, 5.0, &unit_alpha(), 0.0, None).unwrap();
        let relaxed = solve_lp(&inst, &vec![None; inst.n_binaries()]).unwrap();
        let fixed = solve_lp(&inst, &vec![Some(false); inst.n_binaries()]).unwrap();
        assert_eq!(relaxed.status, LpStatus::Optimal);
        assert!(relaxed.objective <= fixed.objective + 1e-9);
    }

    #[test]
    fn lp_dump_names_variables_per_convention() {
        let s = CashFlowSeries::new(vec![1.5, -0.5]).unwrap();
        let inst = build_instance(&s, 0.0, &alpha1(), 0.0, None).unwrap();
        let mut buf = Vec::new();
        inst.write_lp_format(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for token in ["Minimize", "Subject To", "Bounds", "Binaries", "End"] {
            assert!(text.contains(token), "missing {token}");
        }
        for var in ["L", "Z", "H", "xp_1", "xm_2", "b_1", "zp_1", "zm_2"] {
            assert!(text.contains(var), "missing {var}");
        }
        assert!(text.contains("trans_1"));
        assert!(text.contains("order_zh"));
    }
}
