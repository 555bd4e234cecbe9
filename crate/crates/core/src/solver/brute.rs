//! Independent grid-search oracle: enumerate ordered bound triples on a
//! lattice, simulate each and keep the cheapest feasible one. Complexity is
//! cubic in the number of grid points times the series length, so this is
//! for tiny instances and for cross-checking the exact solver.

use std::time::Instant;

use crate::cost::CostStructure;
use crate::error::{Error, Result};
use crate::policy::{simulate, BoundTriple};
use crate::series::CashFlowSeries;

use super::{FitResult, FitStatus, FEAS_TOL};

/// Search lattice: points `lo, lo + resolution, ..., hi` in each coordinate,
/// restricted to ordered triples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub resolution: f64,
    pub lo: f64,
    pub hi: f64,
}

impl GridSpec {
    fn points(&self) -> Vec<f64> {
        let n = ((self.hi - self.lo) / self.resolution).round() as i64;
        (0..=n.max(0))
            .map(|i| self.lo + i as f64 * self.resolution)
            .collect()
    }
}

/// Enumerates every ordered triple on the grid, discards any whose
/// simulated balance dips below `b_min`, and returns the cheapest.
pub fn brute_force_fit(
    series: &CashFlowSeries,
    b0: f64,
    alpha: &CostStructure,
    b_min: f64,
    grid: &GridSpec,
) -> Result<FitResult> {
    if !(grid.resolution > 0.0) || grid.hi < grid.lo {
        return Err(Error::NoFeasibleTriple);
    }
    let started = Instant::now();
    let points = grid.points();
    let mut best: Option<(f64, BoundTriple)> = None;
    let mut evaluated: u64 = 0;
    for (i, &lower) in points.iter().enumerate() {
        for (j, &target) in points.iter().enumerate().skip(i) {
            for &upper in points.iter().skip(j) {
                let triple = BoundTriple {
                    lower,
                    target,
                    upper,
                };
                evaluated += 1;
                let trace = simulate(series, b0, &triple);
                if trace.min_balance() < b_min - FEAS_TOL {
                    continue;
                }
                let cost = alpha.policy_cost(&trace, false);
                if !cost.is_finite() {
                    continue;
                }
                if best.as_ref().map_or(true, |&(c, _)| cost < c) {
                    best = Some((cost, triple));
                }
            }
        }
    }
    let (objective, bounds) = best.ok_or(Error::NoFeasibleTriple)?;
    Ok(FitResult {
        bounds,
        objective,
        nodes_explored: evaluated,
        gap: 0.0,
        wall_time: started.elapsed(),
        status: FitStatus::Optimal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_alpha(gamma0: f64, v: f64) -> CostStructure {
        CostStructure::new(gamma0, gamma0, 0.0, 0.0, v, f64::INFINITY).unwrap()
    }

    #[test]
    fn singleton_grid_zero_flows() {
        let s = CashFlowSeries::new(vec![0.0, 0.0]).unwrap();
        let grid = GridSpec {
            resolution: 1.0,
            lo: 0.0,
            hi: 0.0,
        };
        let fit = brute_force_fit(&s, 0.0, &unit_alpha(1.0, 0.1), 0.0, &grid).unwrap();
        assert_eq!(fit.objective, 0.0);
        assert_eq!(
            (fit.bounds.lower, fit.bounds.target, fit.bounds.upper),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn inaction_beats_expensive_transfer() {
        // One inflow drop: w = 2 from b0 = 10, fixed cost 1 dwarfs holding.
        let s = CashFlowSeries::new(vec![-8.0]).unwrap();
        let grid = GridSpec {
            resolution: 0.5,
            lo: 0.0,
            hi: 12.0,
        };
        let fit = brute_force_fit(&s, 10.0, &unit_alpha(1.0, 0.1), 0.0, &grid).unwrap();
        assert!((fit.objective - 0.2).abs() < 1e-12, "{}", fit.objective);
    }

    #[test]
    fn cheap_transfer_beats_holding() {
        let s = CashFlowSeries::new(vec![-8.0]).unwrap();
        let grid = GridSpec {
            resolution: 0.5,
            lo: 0.0,
            hi: 12.0,
        };
        let fit = brute_force_fit(&s, 10.0, &unit_alpha(0.01, 1.0), 0.0, &grid).unwrap();
        assert!((fit.objective - 0.01).abs() < 1e-12, "{}", fit.objective);
        // Down transfer to a zero target: upper bound below w = 2.
        assert!(fit.bounds.upper < 2.0);
        assert_eq!(fit.bounds.target, 0.0);
    }

    #[test]
    fn infeasible_box_is_an_error() {
        let s = CashFlowSeries::new(vec![-8.0]).unwrap();
        let grid = GridSpec {
            resolution: 0.5,
            lo: 0.0,
            hi: 1.0,
        };
        // Floor far above anything reachable in the box.
        let err = brute_force_fit(&s, 10.0, &unit_alpha(0.01, 1.0), 50.0, &grid);
        assert!(matches!(err, Err(Error::NoFeasibleTriple)));
    }
}
