//! Random temporal knapsack instances solved at several block sizes, with
//! and without consistency cuts.
//!
//! `cargo run --release --example tkp_solve -- [n] [capacity] [seed]`

use std::time::Instant;

use dwcuts::bnp::{self, BnpParams, Mode};
use dwcuts::tkp::{build_model, decompose, generate, GenParams};

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let n = args.first().copied().unwrap_or(80) as usize;
    let capacity = args.get(1).copied().unwrap_or(5) as i64;
    let seed = args.get(2).copied().unwrap_or(7);
    let inst = generate(seed, &GenParams::new(n, capacity));
    let model = build_model(&inst);
    println!("n={n} C={capacity} seed={seed} rows={}", model.problem.constraints.len());
    println!(
        "{:>3} {:>7} {:>6} {:>12} {:>12} {:>8} {:>6} {:>5} {:>8} {:>9}",
        "B", "mode", "blocks", "relaxation", "root", "optimum", "nodes", "cuts", "columns", "time"
    );
    for b in [1, 2, 4, 8] {
        let dec = decompose(&model, b).unwrap();
        for mode in [Mode::Cuts, Mode::NoCuts] {
            let start = Instant::now();
            let r = bnp::solve(model.problem.clone(), dec.clone(), &BnpParams { mode, ..BnpParams::default() }).unwrap();
            let p = &model.problem;
            println!(
                "{b:>3} {:>7} {:>6} {:>12.4} {:>12.4} {:>8} {:>6} {:>5} {:>8} {:>9.2?}",
                format!("{mode:?}"),
                dec.k,
                p.report_objective(r.root.as_ref().unwrap().relaxation),
                p.report_objective(r.root.as_ref().unwrap().objective),
                p.report_objective(r.incumbent.as_ref().unwrap().value),
                r.nodes,
                r.cuts_added,
                r.columns_added,
                start.elapsed()
            );
        }
    }
}
