use rand::Rng;
use rcms::*;

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
    let mut rng = seeded_rng(275);
    let n = rng.gen_range(4..=10);
    let flows: Vec<f64> = (0..n).map(|_| rng.gen_range(-5i32..=5) as f64).collect();
    let b0 = rng.gen_range(0..=40) as f64 * 0.25;
    let contexts = context_grid();
    let alpha = contexts[rng.gen_range(0..contexts.len())];
    println!("flows {:?} b0 {} alpha g0 {} g1 {} v {}", flows, b0, alpha.gamma0_plus, alpha.gamma1_plus, alpha.v);
    let series = CashFlowSeries::new(flows.clone()).unwrap();
    let limits = SolveLimits { gap: 0.0, max_nodes: 2_000_000, max_seconds: f64::INFINITY };
    let fit = fit_bounds(&series, b0, &alpha, 0.0, &limits).unwrap();
    println!("fit: obj {} bounds {:?} nodes {} status {:?}", fit.objective, fit.bounds, fit.nodes_explored, fit.status);
    let abs_sum: f64 = flows.iter().map(|f| f.abs()).sum();
    let grid = GridSpec { resolution: 0.25, lo: 0.0, hi: b0 + abs_sum + 1.0 };
    let brute = brute_force_fit(&series, b0, &alpha, 0.0, &grid).unwrap();
    println!("brute: obj {} bounds {:?}", brute.objective, brute.bounds);
    let tr = simulate(&series, b0, &brute.bounds);
    println!("brute trace b {:?}", tr.balances());
    println!("brute trace x {:?}", tr.actions());
    println!("brute trace trig {:?}", tr.triggers());
}
