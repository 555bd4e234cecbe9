//! Best-first branch-and-bound over the LP relaxation.
//!
//! Node selection is best-first on the node's own LP bound with insertion
//! order as the tie-break; branching picks the most-fractional binary with
//! the lower index on ties. Child LPs are warm-started from the parent
//! basis with dual pivots and fall back to a cold solve if the snapshot is
//! unusable, so the search is deterministic for fixed limits.
//!
//! Every node's (lower, target, upper) values are simulated on the fitting
//! data; feasible trajectories provide incumbents, which keeps the returned
//! objective reproducible by plain simulation. Integral leaves whose big-M
//! pattern triggers exactly on a bound are repaired by shifting the bound
//! into the open interval where strict simulation replays the same
//! trajectory.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::policy::{simulate, BoundTriple};
use crate::series::CashFlowSeries;

use super::simplex::{BasisState, Simplex, SimplexStatus};
use super::{FitResult, FitStatus, MilpInstance, SolveLimits, DEFAULT_GAP, FEAS_TOL, INT_TOL};

/// Open nodes beyond this stop carrying a warm-start basis, capping memory.
const BASIS_CACHE_CAP: usize = 60_000;

/// One link in a node's chain of fixed binaries.
struct Fixing {
    binary: u32,
    value: bool,
    parent: Option<Rc<Fixing>>,
}

fn collect_fixings(chain: &Option<Rc<Fixing>>, n_binaries: usize) -> Vec<Option<bool>> {
    let mut fixed = vec![None; n_binaries];
    let mut cur = chain.as_ref();
    while let Some(fx) = cur {
        fixed[fx.binary as usize] = Some(fx.value);
        cur = fx.parent.as_ref();
    }
    fixed
}

struct Node {
    bound: f64,
    id: u64,
    fixings: Option<Rc<Fixing>>,
    basis: Option<BasisState>,
    /// Binary values of this node's LP solution, for branching.
    binaries: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap; reverse so the smallest bound pops first,
    // oldest node on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Search<'a> {
    instance: &'a MilpInstance,
    series: &'a CashFlowSeries,
    limits: SolveLimits,
    /// Best simulation-backed solution. Pruning against it makes the node
    /// bounds a certificate for the strict-trigger policy optimum: the
    /// relaxation also bounds every strict policy in a subtree, while the
    /// linearized program's non-strict triggers may admit boundary patterns
    /// no strict policy can replay (verify_fit flags those).
    incumbent: Option<(f64, BoundTriple)>,
    nodes_explored: u64,
    next_id: u64,
    started: Instant,
}

/// Outcome of evaluating one node LP.
struct Evaluated<'a> {
    objective: f64,
    binaries: Vec<f64>,
    binary_reduced_costs: Vec<f64>,
    basis: BasisState,
    triple: BoundTriple,
    integral: bool,
    values: Vec<f64>,
    state: Simplex<'a>,
}

/// How to start a node LP: from a live parent state, from a stored basis,
/// or from scratch.
enum WarmStart<'s, 'a> {
    State(Simplex<'a>),
    Basis(&'s BasisState),
    Cold,
}

/// Keeps the most recent live solver states keyed by node id so popped
/// nodes skip the basis refactorization. Purely a speed device: hits and
/// misses are a deterministic function of the search itself.
struct StateCache<'a> {
    entries: std::collections::VecDeque<(u64, Simplex<'a>)>,
    cap: usize,
}

impl<'a> StateCache<'a> {
    fn new(cap: usize) -> Self {
        Self {
            entries: std::collections::VecDeque::new(),
            cap,
        }
    }

    fn take(&mut self, id: u64) -> Option<Simplex<'a>> {
        let pos = self.entries.iter().position(|(k, _)| *k == id)?;
        self.entries.remove(pos).map(|(_, s)| s)
    }

    fn insert(&mut self, id: u64, state: Simplex<'a>) {
        if self.entries.len() >= self.cap {
            self.entries.pop_front();
        }
        self.entries.push_back((id, state));
    }
}

impl<'a> Search<'a> {
    fn scale(&self) -> f64 {
        1.0f64.max(self.incumbent.as_ref().map_or(0.0, |(c, _)| c.abs()))
    }

    /// Nodes whose bound reaches this value cannot improve the result.
    fn cutoff(&self) -> f64 {
        match &self.incumbent {
            None => f64::INFINITY,
            Some((best, _)) => {
                let slack = (self.limits.gap * self.scale()).max(1e-12 * self.scale());
                best - slack
            }
        }
    }

    fn offer_simulated(&mut self, triple: BoundTriple) {
        if triple.validate().is_err() {
            return;
        }
        let trace = simulate(self.series, self.instance.b0(), &triple);
        if trace.min_balance() < self.instance.b_min() - FEAS_TOL {
            return;
        }
        let cost = self.instance.alpha().policy_cost(&trace, false);
        if !cost.is_finite() {
            return;
        }
        let better = self.incumbent.as_ref().map_or(true, |&(best, _)| cost < best);
        if better {
            self.incumbent = Some((cost, triple));
        }
    }

    /// Candidate triples recovered from an integral leaf: the solution's own
    /// bounds, the exact boundary repair, and trigger-all perturbations for
    /// boundary-touching patterns. Each is simulated on its own merits.
    fn offer_integral(&mut self, triple: BoundTriple, values: &[f64]) {
        self.offer_simulated(triple);
        for candidate in self.leaf_candidates(values) {
            self.offer_simulated(candidate);
        }
    }

    fn leaf_candidates(&self, values: &[f64]) -> Vec<BoundTriple> {
        let layout = self.instance.layout();
        let flows = self.instance.flows();
        let n = self.instance.n_steps();
        let target = values[layout.target()];
        let mut max_up_w = f64::NEG_INFINITY;
        let mut min_down_w = f64::INFINITY;
        let mut min_none_w = f64::INFINITY;
        let mut max_none_w = f64::NEG_INFINITY;
        let mut prev = self.instance.b0();
        for t in 0..n {
            let w = prev + flows[t];
            let up = values[layout.binary(2 * t)] > 0.5;
            let down = values[layout.binary(2 * t + 1)] > 0.5;
            if up {
                max_up_w = max_up_w.max(w);
            } else if down {
                min_down_w = min_down_w.min(w);
            } else {
                min_none_w = min_none_w.min(w);
                max_none_w = max_none_w.max(w);
            }
            prev = values[layout.balance(t)];
        }
        let b_min = self.instance.b_min();
        let mut out = Vec::new();

        // Exact repair: bounds moved into the intervals where the strict
        // rule replays the pattern (empty when a boundary value is shared
        // by a triggered and an untriggered step).
        let lower_cap = target.min(min_none_w);
        let repaired_lower = if max_up_w.is_finite() {
            (max_up_w < lower_cap).then_some(lower_cap)
        } else {
            Some(values[layout.lower()].min(lower_cap))
        };
        let upper_floor = target.max(max_none_w);
        let repaired_upper = if min_down_w.is_finite() {
            (min_down_w > upper_floor).then_some(upper_floor)
        } else {
            Some(values[layout.upper()].max(upper_floor))
        };
        if let (Some(lo), Some(hi)) = (repaired_lower, repaired_upper) {
            if lo >= b_min - FEAS_TOL {
                if let Ok(t) = BoundTriple::new(lo.max(b_min), target, hi) {
                    out.push(t);
                }
            }
        }

        // Boundary-tie fallbacks: force every touch of a bound to trigger.
        if min_down_w.is_finite() {
            let eps = 1e-7 * (1.0 + min_down_w.abs());
            let hi = (min_down_w - eps).max(target);
            let lo = repaired_lower.unwrap_or(values[layout.lower()]).max(b_min);
            if let Ok(t) = BoundTriple::new(lo.min(target), target, hi) {
                out.push(t);
            }
        }
        if max_up_w.is_finite() {
            let eps = 1e-7 * (1.0 + max_up_w.abs());
            let lo = (max_up_w + eps).min(target).max(b_min);
            let hi = repaired_upper.unwrap_or(values[layout.upper()]).max(target);
            if let Ok(t) = BoundTriple::new(lo, target, hi) {
                out.push(t);
            }
        }
        out
    }

    /// Solves a node LP, warm-starting from a live state or a stored basis
    /// when possible.
    fn evaluate(
        &mut self,
        fixed: &[Option<bool>],
        warm: WarmStart<'_, 'a>,
    ) -> Result<Option<Evaluated<'a>>> {
        self.nodes_explored += 1;
        let (lb, ub) = self.instance.bounds_with(fixed);
        let (mut simplex, outcome) = match warm {
            WarmStart::State(mut live) => {
                live.apply_bounds(&lb[..], &ub[..]);
                match live.resolve_dual()? {
                    Some(out) => (live, out),
                    None => {
                        let mut cold = Simplex::new(self.instance.lp(), &lb, &ub);
                        let out = cold.solve()?;
                        (cold, out)
                    }
                }
            }
            WarmStart::Basis(state) => {
                let mut s = Simplex::new(self.instance.lp(), &lb, &ub);
                match s.solve_dual_from(state)? {
                    Some(out) => (s, out),
                    None => {
                        let mut cold = Simplex::new(self.instance.lp(), &lb, &ub);
                        let out = cold.solve()?;
                        (cold, out)
                    }
                }
            }
            WarmStart::Cold => {
                let mut s = Simplex::new(self.instance.lp(), &lb, &ub);
                let out = s.solve()?;
                (s, out)
            }
        };
        match outcome.status {
            SimplexStatus::Infeasible => return Ok(None),
            SimplexStatus::Unbounded => {
                return Err(Error::Numerical {
                    reason: "node relaxation unbounded despite variable bounds".into(),
                })
            }
            SimplexStatus::Optimal => {}
        }
        let layout = self.instance.layout();
        let values = outcome.values;
        let nb = layout.n_binaries();
        let mut binaries = Vec::with_capacity(nb);
        let mut integral = true;
        for k in 0..nb {
            let z = values[layout.binary(k)];
            binaries.push(z);
            if (z - z.round()).abs() > INT_TOL {
                integral = false;
            }
        }
        if std::env::var("RCMS_TRACE").is_ok() {
            eprintln!("node {} obj {:.12e} integral {}", self.nodes_explored, outcome.objective, integral);
        }
        if std::env::var("RCMS_CHECK").is_ok() {
            let (lb2, ub2) = self.instance.bounds_with(fixed);
            let mut cold = Simplex::new(self.instance.lp(), &lb2, &ub2);
            let want = cold.solve()?;
            if (want.objective - outcome.objective).abs() > 1e-7 * (1.0 + want.objective.abs()) {
                eprintln!("MISMATCH node {}: warm {:.12e} cold {:.12e} fixed {:?}",
                    self.nodes_explored, outcome.objective, want.objective,
                    fixed.iter().enumerate().filter_map(|(k, f)| f.map(|v| (k, v))).collect::<Vec<_>>());
            }
        }
        let binary_cols: Vec<usize> = (0..nb).map(|k| layout.binary(k)).collect();
        let binary_reduced_costs = simplex.reduced_costs_for(&binary_cols);
        let triple = BoundTriple {
            lower: values[layout.lower()],
            target: values[layout.target()],
            upper: values[layout.upper()],
        };
        Ok(Some(Evaluated {
            objective: outcome.objective,
            binaries,
            binary_reduced_costs,
            basis: simplex.basis_state(),
            triple,
            integral,
            values,
            state: simplex,
        }))
    }

    fn out_of_time(&self) -> bool {
        self.limits.max_seconds.is_finite()
            && self.started.elapsed().as_secs_f64() > self.limits.max_seconds
    }
}

/// Deterministic seed triples simulated before the search starts.
fn seed_candidates(instance: &MilpInstance) -> Vec<BoundTriple> {
    let b_min = instance.b_min();
    let upper = instance.var_upper();
    let b0 = instance.b0().clamp(b_min, upper);
    let mut seeds = vec![
        BoundTriple {
            lower: b_min,
            target: b_min,
            upper: b_min,
        },
        BoundTriple {
            lower: b_min,
            target: b0,
            upper,
        },
        BoundTriple {
            lower: b_min,
            target: b_min,
            upper,
        },
    ];
    // A Miller-Orr-shaped guess from the sample moments, clamped into range.
    let flows = instance.flows();
    if flows.len() >= 2 {
        let mean = flows.iter().sum::<f64>() / flows.len() as f64;
        let ss: f64 = flows.iter().map(|f| (f - mean) * (f - mean)).sum();
        let sigma = (ss / (flows.len() as f64 - 1.0)).sqrt();
        let alpha = instance.alpha();
        let spread = (3.0 * alpha.gamma0_plus * sigma * sigma / (4.0 * alpha.v)).cbrt();
        let target = (b_min + spread).clamp(b_min, upper);
        let top = (3.0 * target - 2.0 * b_min).clamp(target, upper);
        seeds.push(BoundTriple {
            lower: b_min,
            target,
            upper: top,
        });
    }
    seeds
}

/// Fits the bound triple minimizing the summed policy cost on `series`.
///
/// Returns `Error::Infeasible` when no triple keeps every balance at or
/// above `b_min`; resource-limit terminations come back as statuses on the
/// result, carrying the best solution found so far.
pub fn fit_bounds(
    series: &CashFlowSeries,
    b0: f64,
    alpha: &crate::cost::CostStructure,
    b_min: f64,
    limits: &SolveLimits,
) -> Result<FitResult> {
    let instance = super::build_instance(series, b0, alpha, b_min, None)?;
    fit_instance(&instance, series, limits)
}

pub(crate) fn fit_instance(
    instance: &MilpInstance,
    series: &CashFlowSeries,
    limits: &SolveLimits,
) -> Result<FitResult> {
    let started = Instant::now();
    let mut search = Search {
        instance,
        series,
        limits: *limits,
        incumbent: None,
        nodes_explored: 0,
        next_id: 0,
        started,
    };
    for seed in seed_candidates(instance) {
        search.offer_simulated(seed);
    }

    let n_binaries = instance.n_binaries();
    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut status = FitStatus::Optimal;
    let mut lower_at_stop: Option<f64> = None;

    let mut cache = StateCache::new(24);
    let root_fixed = vec![None; n_binaries];
    match search.evaluate(&root_fixed, WarmStart::Cold)? {
        None => return Err(Error::Infeasible),
        Some(eval) => {
            search.offer_simulated(eval.triple);
            if eval.integral {
                search.offer_integral(eval.triple, &eval.values);
                lower_at_stop = Some(eval.objective);
            } else {
                let id = search.next_id;
                heap.push(Node {
                    bound: eval.objective,
                    id,
                    fixings: None,
                    basis: Some(eval.basis),
                    binaries: eval.binaries,
                });
                cache.insert(id, eval.state);
                search.next_id += 1;
            }
        }
    }

    while let Some(node) = heap.pop() {
        if node.bound >= search.cutoff() {
            // Best-first: every remaining node is at least as bad.
            lower_at_stop = Some(node.bound);
            heap.clear();
            break;
        }
        if search.nodes_explored >= search.limits.max_nodes {
            status = FitStatus::NodeLimit;
            lower_at_stop = Some(node.bound);
            break;
        }
        if search.out_of_time() {
            status = FitStatus::TimeLimit;
            lower_at_stop = Some(node.bound);
            break;
        }

        // Most-fractional binary, lower index on ties.
        let mut branch_k = usize::MAX;
        let mut best_frac = INT_TOL;
        for (k, &z) in node.binaries.iter().enumerate() {
            let frac = (z - z.round()).abs();
            if frac > best_frac {
                best_frac = frac;
                branch_k = k;
            }
        }
        if branch_k == usize::MAX {
            continue;
        }

        let parent_fixed = collect_fixings(&node.fixings, n_binaries);
        let mut live = cache.take(node.id);
        for value in [false, true] {
            let mut fixed = parent_fixed.clone();
            fixed[branch_k] = Some(value);
            let child_chain = Some(Rc::new(Fixing {
                binary: branch_k as u32,
                value,
                parent: node.fixings.clone(),
            }));
            // The second child consumes the live state; the first clones it.
            let warm = if std::env::var("RCMS_COLD").is_ok() {
                WarmStart::Cold
            } else if value {
                live.take().map_or(
                    node.basis.as_ref().map_or(WarmStart::Cold, WarmStart::Basis),
                    WarmStart::State,
                )
            } else {
                live.clone().map_or(
                    node.basis.as_ref().map_or(WarmStart::Cold, WarmStart::Basis),
                    WarmStart::State,
                )
            };
            let Some(eval) = search.evaluate(&fixed, warm)? else {
                continue;
            };
            search.offer_simulated(eval.triple);
            if eval.integral {
                search.offer_integral(eval.triple, &eval.values);
                continue;
            }
            if eval.objective >= search.cutoff() {
                continue;
            }
            // Reduced-cost fixing: a binary resting at an integral bound
            // whose flip alone pushes the bound past the cutoff is pinned
            // for the whole subtree.
            let mut chain = child_chain;
            let cutoff = search.cutoff();
            if cutoff.is_finite() {
                for (k, z) in eval.binaries.iter().enumerate() {
                    if fixed[k].is_some() {
                        continue;
                    }
                    let d = eval.binary_reduced_costs[k].abs();
                    let at_bound = *z <= INT_TOL || *z >= 1.0 - INT_TOL;
                    if at_bound && d > 0.0 && eval.objective + d >= cutoff {
                        chain = Some(Rc::new(Fixing {
                            binary: k as u32,
                            value: *z >= 0.5,
                            parent: chain,
                        }));
                    }
                }
            }
            let keep_basis = heap.len() < BASIS_CACHE_CAP;
            let id = search.next_id;
            heap.push(Node {
                bound: eval.objective,
                id,
                fixings: chain,
                basis: keep_basis.then_some(eval.basis),
                binaries: eval.binaries,
            });
            cache.insert(id, eval.state);
            search.next_id += 1;
        }
    }

    let (objective, bounds) = search.incumbent.ok_or(Error::Infeasible)?;
    let lower = lower_at_stop
        .or_else(|| heap.peek().map(|n| n.bound))
        .unwrap_or(objective)
        .min(objective);
    let scale = 1.0f64.max(objective.abs());
    let gap = ((objective - lower) / scale).max(0.0);
    if status == FitStatus::Optimal && gap > DEFAULT_GAP {
        status = FitStatus::GapLimit;
    }

    Ok(FitResult {
        bounds,
        objective,
        nodes_explored: search.nodes_explored,
        gap,
        wall_time: started.elapsed(),
        status,
    })
}
