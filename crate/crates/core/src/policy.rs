//! Bound-triple policies: the restore-to-target decision rule, trajectory
//! simulation under the balance transition law, and the closed-form
//! Miller-Orr benchmark bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::CashFlowSeries;

/// The decision parameters of a bound-based policy: act only when the
/// pre-action balance leaves `(lower, upper)`, restoring it to `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTriple {
    pub lower: f64,
    pub target: f64,
    pub upper: f64,
}

impl BoundTriple {
    pub fn new(lower: f64, target: f64, upper: f64) -> Result<Self> {
        let t = Self {
            lower,
            target,
            upper,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason| Error::InvalidBounds {
            lower: self.lower,
            target: self.target,
            upper: self.upper,
            reason,
        };
        if !(self.lower.is_finite() && self.target.is_finite() && self.upper.is_finite()) {
            return Err(bad("all bounds must be finite"));
        }
        if !(self.lower <= self.target && self.target <= self.upper) {
            return Err(bad("bounds must satisfy lower <= target <= upper"));
        }
        Ok(())
    }
}

/// What a policy did on one day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// Balance stayed inside the band; no transfer.
    None,
    /// Balance fell below the lower bound; transfer up to the target.
    ToTargetUp,
    /// Balance rose above the upper bound; transfer down to the target.
    ToTargetDown,
}

impl Trigger {
    pub fn as_str(&self) -> &'static str {
        match self {
            Trigger::None => "none",
            Trigger::ToTargetUp => "to_target_up",
            Trigger::ToTargetDown => "to_target_down",
        }
    }
}

/// Per-day balances, actions and triggers of a simulated policy.
///
/// Invariants: `b_t = b_{t-1} + f_t + x_t` with `b_0` the initial balance;
/// a triggered day ends exactly at the target; an untriggered day has a
/// zero action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTrace {
    initial_balance: f64,
    balances: Vec<f64>,
    actions: Vec<f64>,
    triggers: Vec<Trigger>,
}

impl PolicyTrace {
    pub fn initial_balance(&self) -> f64 {
        self.initial_balance
    }

    pub fn balances(&self) -> &[f64] {
        &self.balances
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn triggers(&self) -> &[Trigger] {
        &self.triggers
    }

    pub fn len(&self) -> usize {
        self.balances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balances.is_empty()
    }

    /// Lowest post-action balance of the trace.
    pub fn min_balance(&self) -> f64 {
        self.balances.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// One application of the decision rule: returns the transfer, the
/// post-action balance and which branch fired.
///
/// The pre-action balance `w = b_prev + flow` is compared to the band with
/// strict inequalities; at `w == lower` or `w == upper` no action is taken,
/// so a costless boundary touch never pays a fixed transfer cost.
pub fn step(b_prev: f64, flow: f64, bounds: &BoundTriple) -> (f64, f64, Trigger) {
    let w = b_prev + flow;
    if w > bounds.upper {
        (bounds.target - w, bounds.target, Trigger::ToTargetDown)
    } else if w < bounds.lower {
        (bounds.target - w, bounds.target, Trigger::ToTargetUp)
    } else {
        (0.0, w, Trigger::None)
    }
}

/// Folds `step` over a series from the initial balance `b0`.
pub fn simulate(series: &CashFlowSeries, b0: f64, bounds: &BoundTriple) -> PolicyTrace {
    let n = series.len();
    let mut balances = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    let mut triggers = Vec::with_capacity(n);
    let mut prev = b0;
    for &flow in series.flows() {
        let (action, balance, trigger) = step(prev, flow, bounds);
        balances.push(balance);
        actions.push(action);
        triggers.push(trigger);
        prev = balance;
    }
    PolicyTrace {
        initial_balance: b0,
        balances,
        actions,
        triggers,
    }
}

/// Risk-proportional floor `delta * sigma` for the lower bound.
pub fn lower_bound_from_risk(sigma: f64, delta: f64) -> f64 {
    delta * sigma
}

/// Closed-form bounds optimal under Gaussian random-walk flows:
/// `target = lower + (3*gamma0*sigma^2 / (4*v))^(1/3)` and
/// `upper = 3*target - 2*lower`.
pub fn miller_orr_bounds(lower: f64, sigma: f64, gamma0: f64, v: f64) -> Result<BoundTriple> {
    if !(v > 0.0) {
        return Err(Error::InvalidCost {
            reason: format!("v must be > 0, got {v}"),
        });
    }
    let spread = (3.0 * gamma0 * sigma * sigma / (4.0 * v)).cbrt();
    let target = lower + spread;
    let upper = 3.0 * target - 2.0 * lower;
    BoundTriple::new(lower, target, upper)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds_2_5_10() -> BoundTriple {
        BoundTriple::new(2.0, 5.0, 10.0).unwrap()
    }

    #[test]
    fn step_in_band() {
        let (x, b, t) = step(6.0, -1.0, &bounds_2_5_10());
        assert_eq!((x, b), (0.0, 5.0));
        assert_eq!(t, Trigger::None);
    }

    #[test]
    fn step_above_band() {
        let (x, b, t) = step(6.0, 7.0, &bounds_2_5_10());
        assert_eq!((x, b), (-8.0, 5.0));
        assert_eq!(t, Trigger::ToTargetDown);
    }

    #[test]
    fn step_below_band() {
        let (x, b, t) = step(3.0, -2.0, &bounds_2_5_10());
        assert_eq!((x, b), (4.0, 5.0));
        assert_eq!(t, Trigger::ToTargetUp);
    }

    #[test]
    fn step_boundary_touch_is_no_action() {
        let (x, b, t) = step(5.0, 5.0, &bounds_2_5_10());
        assert_eq!((x, b), (0.0, 10.0));
        assert_eq!(t, Trigger::None);
        let (x, b, t) = step(5.0, -3.0, &bounds_2_5_10());
        assert_eq!((x, b), (0.0, 2.0));
        assert_eq!(t, Trigger::None);
    }

    #[test]
    fn simulate_fixed_point() {
        let series = CashFlowSeries::new(vec![0.0; 5]).unwrap();
        let trace = simulate(&series, 5.0, &bounds_2_5_10());
        assert!(trace.actions().iter().all(|&x| x == 0.0));
        assert!(trace.balances().iter().all(|&b| b == 5.0));
    }

    #[test]
    fn simulate_chained_steps() {
        let series = CashFlowSeries::new(vec![7.0, -1.0]).unwrap();
        let trace = simulate(&series, 6.0, &bounds_2_5_10());
        assert_eq!(trace.balances(), &[5.0, 4.0]);
        assert_eq!(trace.actions(), &[-8.0, 0.0]);
        assert_eq!(
            trace.triggers(),
            &[Trigger::ToTargetDown, Trigger::None]
        );
    }

    #[test]
    fn simulate_wide_band_is_cumulative_sum() {
        let flows = vec![1.0, -2.0, 3.5, 0.25, -1.75];
        let series = CashFlowSeries::new(flows.clone()).unwrap();
        let bounds = BoundTriple::new(-1e6, 0.0, 1e6).unwrap();
        let trace = simulate(&series, 0.0, &bounds);
        let mut acc = 0.0;
        for (i, f) in flows.iter().enumerate() {
            acc += f;
            assert!((trace.balances()[i] - acc).abs() < 1e-12);
            assert_eq!(trace.actions()[i], 0.0);
        }
    }

    #[test]
    fn degenerate_triple_restores_everything() {
        let series = CashFlowSeries::new(vec![1.0, -1.0, 0.0]).unwrap();
        let bounds = BoundTriple::new(3.0, 3.0, 3.0).unwrap();
        let trace = simulate(&series, 3.0, &bounds);
        assert_eq!(trace.balances(), &[3.0, 3.0, 3.0]);
        // flow 0 keeps w exactly at the common bound: no action
        assert_eq!(trace.triggers()[2], Trigger::None);
    }

    #[test]
    fn lower_bound_from_risk_examples() {
        assert!((lower_bound_from_risk(0.097, 5.0) - 0.485).abs() < 1e-12);
        assert_eq!(lower_bound_from_risk(0.5, 0.0), 0.0);
        assert_eq!(lower_bound_from_risk(1.0, 3.0), 3.0);
    }

    #[test]
    fn miller_orr_zero_variance_collapses() {
        let b = miller_orr_bounds(1.5, 0.0, 1.0, 0.5).unwrap();
        assert_eq!((b.lower, b.target, b.upper), (1.5, 1.5, 1.5));
    }

    #[test]
    fn miller_orr_unit_cube_root() {
        let b = miller_orr_bounds(0.0, 1.0, 1.0, 0.75).unwrap();
        assert!((b.target - 1.0).abs() < 1e-12);
        assert!((b.upper - 3.0).abs() < 1e-12);
    }

    #[test]
    fn miller_orr_case_study_figures() {
        let b = miller_orr_bounds(0.485, 0.097, 2.0e-5, 2.0e-4).unwrap();
        assert!((b.target - 0.574).abs() < 2e-3, "target {}", b.target);
        assert!((b.upper - 0.752).abs() < 2e-3, "upper {}", b.upper);
    }

    #[test]
    fn miller_orr_rejects_nonpositive_v() {
        assert!(miller_orr_bounds(0.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn bound_triple_rejects_disorder() {
        assert!(BoundTriple::new(1.0, 0.5, 2.0).is_err());
        assert!(BoundTriple::new(0.0, 3.0, 2.0).is_err());
        assert!(BoundTriple::new(0.0, f64::NAN, 2.0).is_err());
    }
}
