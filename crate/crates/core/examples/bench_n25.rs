use rcms::*;
use std::time::Instant;

fn main() {
    let alpha = CostStructure::new(2e-5, 2e-5, 1e-4, 1e-4, 2e-4, f64::INFINITY).unwrap();
    // Mirror the pipeline: members sample 25 flows from a N(0.009, 0.097^2) train set;
    // b0 = benchmark target, floor = 5 * sigma.
    let b0 = 0.574;
    let b_min = 0.485;
    let limits = SolveLimits::default();
    for n in [10usize, 15, 20, 25] {
        let mut times = Vec::new();
        let mut nodes = Vec::new();
        for seed in 0..5u64 {
            let series = gen_random_walk(0.097, 0.009, n, 1000 + seed).unwrap();
            let t0 = Instant::now();
            let fit = fit_bounds(&series, b0, &alpha, b_min, &limits).unwrap();
            let dt = t0.elapsed().as_secs_f64();
            times.push(dt);
            nodes.push(fit.nodes_explored);
            assert!(matches!(fit.status, FitStatus::Optimal), "{fit:?}");
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!("n={n}: median {:.3}s times {:?} nodes {:?}", times[2], times, nodes);
    }
}
