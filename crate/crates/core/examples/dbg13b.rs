use rcms::*;

fn main() {
    let flows = vec![-2.0, 4.0, 3.0, 3.0, -3.0];
    let b0 = 4.75;
    let alpha = CostStructure::new(4e-5, 4e-5, 2e-4, 2e-4, 2e-4, f64::INFINITY).unwrap();
    let series = CashFlowSeries::new(flows).unwrap();
    let inst = build_instance(&series, b0, &alpha, 0.0, None).unwrap();
    let nb = inst.n_binaries();
    let mut best: Option<(f64, Vec<bool>, Vec<f64>)> = None;
    for mask in 0u32..(1 << nb) {
        let fixed: Vec<Option<bool>> = (0..nb).map(|k| Some(mask >> k & 1 == 1)).collect();
        if let Ok(sol) = solve_lp(&inst, &fixed) {
            if sol.status == LpStatus::Optimal {
                if best.as_ref().map_or(true, |(o, _, _)| sol.objective < *o) {
                    best = Some((sol.objective, fixed.iter().map(|f| f.unwrap()).collect(), sol.values.clone()));
                }
            }
        }
    }
    let (obj, pattern, values) = best.unwrap();
    let layout = inst.layout();
    println!("best z-pattern objective {}", obj);
    println!("pattern (zp,zm) per t: {:?}", (0..5).map(|t| (pattern[2*t], pattern[2*t+1])).collect::<Vec<_>>());
    println!("L {} Z {} H {}", values[layout.lower()], values[layout.target()], values[layout.upper()]);
    for t in 0..5 {
        println!("t{} xp {:.4} xm {:.4} b {:.4}", t+1, values[layout.pos_transfer(t)], values[layout.neg_transfer(t)], values[layout.balance(t)]);
    }
}
