use rand::Rng;
use rcms::*;
use std::time::Instant;

fn context_grid() -> Vec<CostStructure> {
    let mut out = Vec::new();
    for g0 in [2.0e-5, 4.0e-5] {
        for g1 in [0.0, 1.0e-4, 2.0e-4] {
            for v in [2.0e-4, 4.0e-4] {
                out.push(CostStructure::new(g0, g0, g1, g1, v, f64::INFINITY).unwrap());
            }
        }
    }
    out
}

fn main() {
    let limits = SolveLimits { gap: 0.0, max_nodes: 2_000_000, max_seconds: f64::INFINITY };
    let mut worst_over = 0.0f64;
    let mut worst_under = 0.0f64;
    let mut total_nodes = 0u64;
    let started = Instant::now();
    for seed in 0..300u64 {
        let mut rng = seeded_rng(seed);
        let n = rng.gen_range(4..=10);
        let flows: Vec<f64> = (0..n).map(|_| rng.gen_range(-5i32..=5) as f64).collect();
        let b0 = rng.gen_range(0..=40) as f64 * 0.25;
        let contexts = context_grid();
        let alpha = contexts[rng.gen_range(0..contexts.len())];
        let series = CashFlowSeries::new(flows).unwrap();
        let fit = fit_bounds(&series, b0, &alpha, 0.0, &limits).unwrap();
        total_nodes += fit.nodes_explored;
        assert_eq!(fit.status, FitStatus::Optimal, "seed {seed} {fit:?}");
        let abs_sum: f64 = series.flows().iter().map(|f| f.abs()).sum();
        let grid = GridSpec { resolution: 0.25, lo: 0.0, hi: b0 + abs_sum + 1.0 };
        let brute = brute_force_fit(&series, b0, &alpha, 0.0, &grid).unwrap();
        let lip = series.len() as f64 * alpha.v + alpha.gamma1_plus.max(alpha.gamma1_minus);
        let over = fit.objective - brute.objective;
        let under = brute.objective - fit.objective;
        worst_over = worst_over.max(over);
        worst_under = worst_under.max(under);
        assert!(over <= 1e-9, "seed {seed}: over {over}");
        assert!(under <= lip * 0.25, "seed {seed}: under {under} lip*h {}", lip * 0.25);
        let rep = verify_fit(&fit, &series, b0, &alpha, 0.0);
        assert!(rep.passed, "seed {seed}: {rep:?}");
    }
    println!("300 seeds ok in {:.1}s, nodes total {}, worst over {:.2e}, worst under {:.2e}",
        started.elapsed().as_secs_f64(), total_nodes, worst_over, worst_under);
}
