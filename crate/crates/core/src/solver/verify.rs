//! Feasibility audit for fitted results: re-simulate the bounds, recompute
//! the cost and compare against the reported objective.

use serde::{Deserialize, Serialize};

use crate::cost::CostStructure;
use crate::policy::simulate;
use crate::series::CashFlowSeries;

use super::{FitResult, FEAS_TOL};

/// Outcome of re-checking a fit. `passed` requires the re-simulated cost to
/// match the reported objective within `epsilon` and every balance to stay
/// at or above the floor. `boundary_steps` lists days where the pre-action
/// balance touches a bound exactly; trigger patterns may legitimately
/// disagree with a big-M solution there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub objective_discrepancy: f64,
    pub simulated_cost: f64,
    pub epsilon: f64,
    pub floor_violations: Vec<usize>,
    pub boundary_steps: Vec<usize>,
}

/// Re-simulates `result.bounds` on the fitting data and audits the claimed
/// objective and the balance floor.
pub fn verify_fit(
    result: &FitResult,
    series: &CashFlowSeries,
    b0: f64,
    alpha: &CostStructure,
    b_min: f64,
) -> VerifyReport {
    let trace = simulate(series, b0, &result.bounds);
    let simulated_cost = alpha.policy_cost(&trace, false);
    let epsilon = 1e-6 * (1.0 + result.objective.abs());
    let objective_discrepancy = (simulated_cost - result.objective).abs();

    let mut floor_violations = Vec::new();
    for (t, &b) in trace.balances().iter().enumerate() {
        if b < b_min - FEAS_TOL {
            floor_violations.push(t);
        }
    }

    let mut boundary_steps = Vec::new();
    let mut prev = b0;
    for (t, &f) in series.flows().iter().enumerate() {
        let w = prev + f;
        if (w - result.bounds.lower).abs() <= FEAS_TOL
            || (w - result.bounds.upper).abs() <= FEAS_TOL
        {
            boundary_steps.push(t);
        }
        prev = trace.balances()[t];
    }

    VerifyReport {
        passed: objective_discrepancy <= epsilon && floor_violations.is_empty(),
        objective_discrepancy,
        simulated_cost,
        epsilon,
        floor_violations,
        boundary_steps,
    }
}
