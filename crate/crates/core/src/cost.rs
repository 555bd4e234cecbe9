//! Economic context and cost evaluation: fixed/variable transfer costs,
//! holding and shortage rates, daily cost and aggregate policy cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicyTrace;

/// The six-tuple of transaction and holding costs defining an economic
/// context: fixed and variable costs per transfer direction, the holding
/// rate `v` per money unit per day and the shortage penalty `u`, which may
/// be the distinguished value `+inf` to forbid negative balances outright.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostStructure {
    pub gamma0_plus: f64,
    pub gamma0_minus: f64,
    pub gamma1_plus: f64,
    pub gamma1_minus: f64,
    pub v: f64,
    #[serde(with = "infinity_or_number")]
    pub u: f64,
}

impl CostStructure {
    pub fn new(
        gamma0_plus: f64,
        gamma0_minus: f64,
        gamma1_plus: f64,
        gamma1_minus: f64,
        v: f64,
        u: f64,
    ) -> Result<Self> {
        let s = Self {
            gamma0_plus,
            gamma0_minus,
            gamma1_plus,
            gamma1_minus,
            v,
            u,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = [
            ("gamma0_plus", self.gamma0_plus),
            ("gamma0_minus", self.gamma0_minus),
            ("gamma1_plus", self.gamma1_plus),
            ("gamma1_minus", self.gamma1_minus),
        ];
        for (name, value) in finite_nonneg {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidCost {
                    reason: format!("{name} must be finite and >= 0, got {value}"),
                });
            }
        }
        if !self.v.is_finite() || self.v <= 0.0 {
            return Err(Error::InvalidCost {
                reason: format!("v must be finite and > 0, got {}", self.v),
            });
        }
        if !(self.u > 0.0) {
            return Err(Error::InvalidCost {
                reason: format!("u must be > 0 or +inf, got {}", self.u),
            });
        }
        Ok(())
    }

    /// Transfer cost of moving `x`: zero at rest, fixed plus variable part
    /// on each sign branch, growing with the transferred amount.
    pub fn transfer_cost(&self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else if x > 0.0 {
            self.gamma0_plus + self.gamma1_plus * x
        } else {
            self.gamma0_minus + self.gamma1_minus * (-x)
        }
    }

    /// End-of-day holding cost `v*b` for non-negative balances, shortage
    /// penalty `u*|b|` otherwise; returns `+inf` when `u` is infinite and
    /// the balance is negative.
    pub fn holding_cost(&self, b: f64) -> f64 {
        if b >= 0.0 {
            self.v * b
        } else {
            self.u * (-b)
        }
    }

    /// Transfer plus holding cost for one day.
    pub fn daily_cost(&self, x: f64, b: f64) -> DailyCost {
        let transfer = self.transfer_cost(x);
        let holding = self.holding_cost(b);
        DailyCost {
            transfer,
            holding,
            total: transfer + holding,
        }
    }

    /// Total cost of a simulated policy; divided by the trace length when
    /// `averaged`. Infinite holding penalties propagate.
    pub fn policy_cost(&self, trace: &PolicyTrace, averaged: bool) -> f64 {
        let total: f64 = trace
            .actions()
            .iter()
            .zip(trace.balances())
            .map(|(&x, &b)| self.daily_cost(x, b).total)
            .sum();
        if averaged {
            total / trace.len() as f64
        } else {
            total
        }
    }
}

/// One day's cost split into its transfer and holding components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyCost {
    pub transfer: f64,
    pub holding: f64,
    pub total: f64,
}

/// Serializes `f64::INFINITY` as the string `"inf"` and accepts either a
/// number or that string on input.
mod infinity_or_number {
    use serde::de::{self, Deserializer, Unexpected};
    use serde::ser::Serializer;
    use serde::Deserialize;

    pub fn serialize<S: Serializer>(value: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if value.is_infinite() {
            ser.serialize_str("inf")
        } else {
            ser.serialize_f64(*value)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum NumOrStr {
            Num(f64),
            Str(String),
        }
        match NumOrStr::deserialize(de)? {
            NumOrStr::Num(n) => Ok(n),
            NumOrStr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            NumOrStr::Str(s) => Err(de::Error::invalid_value(
                Unexpected::Str(&s),
                &"a number or \"inf\"",
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{simulate, BoundTriple};
    use crate::series::CashFlowSeries;

    /// Cost structure used throughout the worked examples: 20 EUR fixed,
    /// 0.01% variable, 0.02% holding, infinite shortage penalty, all in
    /// canonical millions.
    pub(crate) fn alpha1() -> CostStructure {
        CostStructure::new(2.0e-5, 2.0e-5, 1.0e-4, 1.0e-4, 2.0e-4, f64::INFINITY).unwrap()
    }

    #[test]
    fn transfer_cost_branches() {
        let a = alpha1();
        assert_eq!(a.transfer_cost(0.0), 0.0);
        assert!((a.transfer_cost(1.0) - 1.2e-4).abs() < 1e-18);
        assert!((a.transfer_cost(-0.5) - 7.0e-5).abs() < 1e-18);
    }

    #[test]
    fn holding_cost_branches() {
        let a = alpha1();
        assert!((a.holding_cost(5.0) - 1.0e-3).abs() < 1e-18);
        assert_eq!(a.holding_cost(0.0), 0.0);
        assert_eq!(a.holding_cost(-1.0), f64::INFINITY);
    }

    #[test]
    fn daily_cost_sums_components() {
        let a = alpha1();
        assert_eq!(a.daily_cost(0.0, 0.0).total, 0.0);
        let down = a.daily_cost(-6.0, 5.0);
        assert!((down.total - 1.62e-3).abs() < 1e-15, "{}", down.total);
        let up = a.daily_cost(4.0, 5.0);
        assert!((up.total - 1.42e-3).abs() < 1e-15, "{}", up.total);
    }

    #[test]
    fn policy_cost_constant_balance() {
        let a = alpha1();
        // Wide band, no actions: every balance stays at b0.
        let series = CashFlowSeries::new(vec![0.0; 4]).unwrap();
        let bounds = BoundTriple::new(0.0, 5.0, 10.0).unwrap();
        let trace = simulate(&series, 5.0, &bounds);
        let avg = a.policy_cost(&trace, true);
        assert!((avg - a.v * 5.0).abs() < 1e-15);
    }

    #[test]
    fn policy_cost_single_day_matches_daily_cost() {
        let a = alpha1();
        // b0 = 5, flow = 6 pushes w to 11 > H = 10, transfer -6 restores Z = 5.
        let series = CashFlowSeries::new(vec![6.0]).unwrap();
        let bounds = BoundTriple::new(2.0, 5.0, 10.0).unwrap();
        let trace = simulate(&series, 5.0, &bounds);
        assert_eq!(trace.actions(), &[-6.0]);
        assert_eq!(trace.balances(), &[5.0]);
        let total = a.policy_cost(&trace, false);
        assert!((total - 1.62e-3).abs() < 1e-15);
    }

    #[test]
    fn averaged_cost_is_total_over_len() {
        let a = alpha1();
        let series = CashFlowSeries::new(vec![1.0, -2.0, 0.5, 3.0, -1.0]).unwrap();
        let bounds = BoundTriple::new(1.0, 3.0, 6.0).unwrap();
        let trace = simulate(&series, 3.0, &bounds);
        let total = a.policy_cost(&trace, false);
        let avg = a.policy_cost(&trace, true);
        assert!((total - avg * 5.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_penalty_propagates() {
        let a = alpha1();
        let series = CashFlowSeries::new(vec![-3.0]).unwrap();
        // Band so wide nothing triggers; balance goes negative.
        let bounds = BoundTriple::new(-100.0, 0.0, 100.0).unwrap();
        let trace = simulate(&series, 1.0, &bounds);
        assert_eq!(a.policy_cost(&trace, false), f64::INFINITY);
    }

    #[test]
    fn finite_penalty_is_positive() {
        let a = CostStructure::new(2.0e-5, 2.0e-5, 1.0e-4, 1.0e-4, 2.0e-4, 1.0e-3).unwrap();
        assert!((a.holding_cost(-2.0) - 2.0e-3).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_structures() {
        assert!(CostStructure::new(-1.0, 0.0, 0.0, 0.0, 1e-4, f64::INFINITY).is_err());
        assert!(CostStructure::new(0.0, 0.0, 0.0, 0.0, 0.0, f64::INFINITY).is_err());
        assert!(CostStructure::new(0.0, 0.0, 0.0, 0.0, 1e-4, -1.0).is_err());
        assert!(CostStructure::new(0.0, 0.0, f64::NAN, 0.0, 1e-4, 1.0).is_err());
    }

    #[test]
    fn u_serializes_as_inf_string() {
        let a = alpha1();
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.contains("\"u\":\"inf\""), "{json}");
        let back: CostStructure = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        let finite = CostStructure::new(0.0, 0.0, 0.0, 0.0, 1e-4, 0.5).unwrap();
        let json = serde_json::to_string(&finite).unwrap();
        assert!(json.contains("\"u\":0.5"), "{json}");
    }
}
