//! Fits bound-based cash management policies to cash-flow data.
//!
//! The crate covers the full pipeline: cash-flow series handling, the
//! transfer/holding cost model, policy simulation, an exact MILP fit of the
//! (lower, target, upper) bound triple via a built-in branch-and-bound over
//! an LP relaxation, random-subsequence ensembles of fitted models, and
//! generalization scoring against the analytic Miller-Orr benchmark.

pub mod cost;
pub mod ensemble;
pub mod error;
pub mod policy;
pub mod series;
pub mod solver;

pub use cost::{CostStructure, DailyCost};
pub use ensemble::{
    average_bounds, context_sweep, fit_rcms, generalization_power, learning_curve, replicate,
    run_algorithm1, Algorithm1Config, Algorithm1Output, Benchmark, DataTag, EnsembleMember,
    EnsembleModel, EvaluationReport, FloorSpec, InitialBalance, LearningRow, MemberOutcome,
    ReplicationSummary, SweepRow,
};
pub use error::{Error, Result};
pub use policy::{
    lower_bound_from_risk, miller_orr_bounds, simulate, step, BoundTriple, PolicyTrace, Trigger,
};
pub use series::{gen_random_walk, seeded_rng, CashFlowSeries, SeriesStats, SplitSpec};
pub use solver::{
    brute_force_fit, build_instance, fit_bounds, solve_lp, verify_fit, FitResult, FitStatus,
    GridSpec, LpSolution, LpStatus, MilpInstance, SolveLimits, VarLayout, VerifyReport,
    DEFAULT_GAP, INT_TOL,
};
