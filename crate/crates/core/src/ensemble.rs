//! Random cash management sets: ensembles of bound triples fitted on random
//! subsequences of the training flows, combined by averaging bounds, and
//! scored against a benchmark by the cost ratio on held-out data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostStructure;
use crate::error::{Error, Result};
use crate::policy::{lower_bound_from_risk, miller_orr_bounds, simulate, BoundTriple};
use crate::series::{seeded_rng, CashFlowSeries, SplitSpec};
use crate::solver::{fit_bounds, FitResult, SolveLimits};

/// One ensemble member: the seed it sampled with and its fit outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub index: usize,
    pub seed: u64,
    pub sample_len: usize,
    pub outcome: MemberOutcome,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberOutcome {
    Fitted(FitResult),
    Failed { reason: String },
}

impl EnsembleMember {
    pub fn bounds(&self) -> Option<&BoundTriple> {
        match &self.outcome {
            MemberOutcome::Fitted(fit) => Some(&fit.bounds),
            MemberOutcome::Failed { .. } => None,
        }
    }
}

/// A fitted ensemble: every member plus the component-wise average of the
/// successful members' bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub members: Vec<EnsembleMember>,
    pub averaged: BoundTriple,
    pub k: usize,
    pub n: usize,
    pub seed: u64,
}

/// Where an evaluation data set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataTag {
    Train,
    Test,
    Other,
}

/// Cost of the fitted model (`c`), cost of the benchmark (`c0`) and their
/// ratio `g = c / c0` on one data set. `g` below one means the fitted model
/// is cheaper than the benchmark.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub c: f64,
    pub c0: f64,
    pub g: f64,
    pub data_tag: DataTag,
    pub averaged_costs: bool,
}

/// Component-wise arithmetic mean of bound triples. Means of ordered
/// triples stay ordered.
pub fn average_bounds(members: &[BoundTriple]) -> Result<BoundTriple> {
    if members.is_empty() {
        return Err(Error::EmptyBoundList);
    }
    let k = members.len() as f64;
    let sum = members.iter().fold((0.0, 0.0, 0.0), |acc, b| {
        (acc.0 + b.lower, acc.1 + b.target, acc.2 + b.upper)
    });
    BoundTriple::new(sum.0 / k, sum.1 / k, sum.2 / k)
}

/// Fits `k` members on random subsequences of `train` (member `i` samples
/// with seed `seed + i + 1`) and averages their bounds. Members fit
/// independently and merge by index, so parallel and serial runs agree.
#[allow(clippy::too_many_arguments)]
pub fn fit_rcms(
    train: &CashFlowSeries,
    b0: f64,
    alpha: &CostStructure,
    k: usize,
    n: usize,
    b_min: f64,
    seed: u64,
    limits: &SolveLimits,
) -> Result<EnsembleModel> {
    if k == 0 {
        return Err(Error::NoSuccessfulMember);
    }
    if n == 0 || n > train.len() {
        return Err(Error::InvalidSampleSize { n, len: train.len() });
    }
    let members: Vec<EnsembleMember> = (0..k)
        .into_par_iter()
        .map(|index| {
            let member_seed = seed.wrapping_add(index as u64 + 1);
            let mut rng = seeded_rng(member_seed);
            let sample = train
                .sample_subsequence(n, &mut rng)
                .expect("sample size validated");
            let outcome = match fit_bounds(&sample, b0, alpha, b_min, limits) {
                Ok(fit) => MemberOutcome::Fitted(fit),
                Err(e) => MemberOutcome::Failed {
                    reason: e.to_string(),
                },
            };
            EnsembleMember {
                index,
                seed: member_seed,
                sample_len: n,
                outcome,
            }
        })
        .collect();

    let fitted: Vec<BoundTriple> = members.iter().filter_map(|m| m.bounds().copied()).collect();
    if fitted.is_empty() {
        return Err(Error::NoSuccessfulMember);
    }
    let averaged = average_bounds(&fitted)?;
    Ok(EnsembleModel {
        members,
        averaged,
        k,
        n,
        seed,
    })
}

/// Cost ratio of a model against a benchmark on one data set. Infinite
/// costs propagate: an infinite benchmark with a finite model cost gives
/// `g = 0`; a zero or doubly-infinite ratio is an error.
pub fn generalization_power(
    model_bounds: &BoundTriple,
    benchmark_bounds: &BoundTriple,
    data: &CashFlowSeries,
    b0: f64,
    alpha: &CostStructure,
    data_tag: DataTag,
) -> Result<EvaluationReport> {
    let c = alpha.policy_cost(&simulate(data, b0, model_bounds), false);
    let c0 = alpha.policy_cost(&simulate(data, b0, benchmark_bounds), false);
    let g = if c0 == 0.0 {
        return Err(Error::UndefinedRatio);
    } else if c0.is_infinite() {
        if c.is_infinite() {
            return Err(Error::UndefinedRatio);
        }
        0.0
    } else {
        c / c0
    };
    Ok(EvaluationReport {
        c,
        c0,
        g,
        data_tag,
        averaged_costs: false,
    })
}

/// Benchmark specification for the training pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    /// Closed-form bounds from the training-set standard deviation.
    MillerOrr,
    /// Caller-supplied bounds.
    Bounds(BoundTriple),
}

/// Initial balance: a number, or the benchmark target ("stable").
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialBalance {
    Value(f64),
    Stable,
}

/// Balance floor: a number, or `delta * sigma_train`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorSpec {
    Value(f64),
    DeltaSigma,
}

/// Inputs of one full training/evaluation run.
#[derive(Debug, Clone)]
pub struct Algorithm1Config {
    pub b0: InitialBalance,
    pub n: usize,
    pub k: usize,
    pub alpha: CostStructure,
    pub benchmark: Benchmark,
    pub ratio: f64,
    pub delta: f64,
    pub b_min: FloorSpec,
    pub seed: u64,
    pub limits: SolveLimits,
}

/// Everything a run produced, including the resolved sentinels so the run
/// can be replayed from its own record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Algorithm1Output {
    pub report: EvaluationReport,
    pub ensemble: EnsembleModel,
    pub benchmark_bounds: BoundTriple,
    pub resolved_b0: f64,
    pub resolved_b_min: f64,
    pub sigma_train: f64,
    pub train_len: usize,
    pub test_len: usize,
}

/// Splits the flows chronologically, builds the benchmark from the training
/// part, fits an ensemble on random training subsequences and scores it on
/// the held-out part. Test data never reaches the fitting path.
pub fn run_algorithm1(flows: &CashFlowSeries, cfg: &Algorithm1Config) -> Result<Algorithm1Output> {
    let (train, test) = flows.split(SplitSpec::new(cfg.ratio)?)?;
    let stats = train.stats()?;
    let sigma_train = stats.std;

    let benchmark_bounds = match cfg.benchmark {
        Benchmark::Bounds(b) => {
            b.validate()?;
            b
        }
        Benchmark::MillerOrr => {
            let lower = lower_bound_from_risk(sigma_train, cfg.delta);
            miller_orr_bounds(lower, sigma_train, cfg.alpha.gamma0_plus, cfg.alpha.v)?
        }
    };
    let resolved_b0 = match cfg.b0 {
        InitialBalance::Value(v) => v,
        InitialBalance::Stable => benchmark_bounds.target,
    };
    let resolved_b_min = match cfg.b_min {
        FloorSpec::Value(v) => v,
        FloorSpec::DeltaSigma => lower_bound_from_risk(sigma_train, cfg.delta),
    };

    let ensemble = fit_rcms(
        &train,
        resolved_b0,
        &cfg.alpha,
        cfg.k,
        cfg.n,
        resolved_b_min,
        cfg.seed,
        &cfg.limits,
    )?;
    let report = generalization_power(
        &ensemble.averaged,
        &benchmark_bounds,
        &test,
        resolved_b0,
        &cfg.alpha,
        DataTag::Test,
    )?;
    Ok(Algorithm1Output {
        report,
        ensemble,
        benchmark_bounds,
        resolved_b0,
        resolved_b_min,
        sigma_train,
        train_len: train.len(),
        test_len: test.len(),
    })
}

/// One row of a context sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub context: String,
    pub g: Option<f64>,
    pub error: Option<String>,
}

/// Runs the pipeline once per cost structure with the same split and seed,
/// so identical contexts produce identical rows. Per-row failures are
/// recorded and the sweep continues.
pub fn context_sweep(
    flows: &CashFlowSeries,
    base: &Algorithm1Config,
    contexts: &[(String, CostStructure)],
) -> Vec<SweepRow> {
    contexts
        .iter()
        .map(|(id, alpha)| {
            let cfg = Algorithm1Config {
                alpha: *alpha,
                ..base.clone()
            };
            match run_algorithm1(flows, &cfg) {
                Ok(out) => SweepRow {
                    context: id.clone(),
                    g: Some(out.report.g),
                    error: None,
                },
                Err(e) => SweepRow {
                    context: id.clone(),
                    g: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// One row of a learning curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearningRow {
    pub n: usize,
    pub g: Option<f64>,
    pub mean_fit_seconds: Option<f64>,
    pub error: Option<String>,
}

/// Trains one ensemble per sample size and records the score and the mean
/// member fit time.
pub fn learning_curve(
    flows: &CashFlowSeries,
    base: &Algorithm1Config,
    sizes: &[usize],
) -> Vec<LearningRow> {
    sizes
        .iter()
        .map(|&n| {
            let cfg = Algorithm1Config {
                n,
                ..base.clone()
            };
            match run_algorithm1(flows, &cfg) {
                Ok(out) => {
                    let times: Vec<f64> = out
                        .ensemble
                        .members
                        .iter()
                        .filter_map(|m| match &m.outcome {
                            MemberOutcome::Fitted(fit) => Some(fit.wall_time.as_secs_f64()),
                            MemberOutcome::Failed { .. } => None,
                        })
                        .collect();
                    let mean_time = if times.is_empty() {
                        None
                    } else {
                        Some(times.iter().sum::<f64>() / times.len() as f64)
                    };
                    LearningRow {
                        n,
                        g: Some(out.report.g),
                        mean_fit_seconds: mean_time,
                        error: None,
                    }
                }
                Err(e) => LearningRow {
                    n,
                    g: None,
                    mean_fit_seconds: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Aggregate of repeated runs under different seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub mean_g: f64,
    pub std_g: f64,
    pub runs: Vec<f64>,
}

/// Repeats the pipeline once per seed and aggregates the scores. The spread
/// uses the population convention so a single run reports zero.
pub fn replicate(
    flows: &CashFlowSeries,
    base: &Algorithm1Config,
    seeds: &[u64],
) -> Result<ReplicationSummary> {
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let cfg = Algorithm1Config {
            seed,
            ..base.clone()
        };
        let out = run_algorithm1(flows, &cfg)?;
        runs.push(out.report.g);
    }
    if runs.is_empty() {
        return Err(Error::NoSuccessfulMember);
    }
    let mean_g = runs.iter().sum::<f64>() / runs.len() as f64;
    let var = runs.iter().map(|g| (g - mean_g) * (g - mean_g)).sum::<f64>() / runs.len() as f64;
    Ok(ReplicationSummary {
        mean_g,
        std_g: var.sqrt(),
        runs,
    })
}
