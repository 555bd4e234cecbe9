use rcms::*;
use std::time::Instant;

fn main() {
    let alpha = CostStructure::new(2e-5, 2e-5, 1e-4, 1e-4, 2e-4, f64::INFINITY).unwrap();
    let series = gen_random_walk(0.097, 0.009, 25, 1001).unwrap();
    let t0 = Instant::now();
    let fit = fit_bounds(&series, 0.574, &alpha, 0.485, &SolveLimits::default()).unwrap();
    println!("total {:.2}s nodes {} obj {:.6e} gap {:.1e} status {:?}",
        t0.elapsed().as_secs_f64(), fit.nodes_explored, fit.objective, fit.gap, fit.status);

    // Raw LP timing: cold solve and a refactor-size estimate.
    let inst = build_instance(&series, 0.574, &alpha, 0.485, None).unwrap();
    let t0 = Instant::now();
    let reps = 20;
    for _ in 0..reps {
        let sol = solve_lp(&inst, &vec![None; inst.n_binaries()]).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
    }
    println!("cold root LP: {:.2} ms each", t0.elapsed().as_secs_f64() * 1000.0 / reps as f64);
}
