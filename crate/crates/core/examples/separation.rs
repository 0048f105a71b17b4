//! The weight table of a fractional master solution and the cuts it
//! yields, checked against direct evaluation of every equality.

use dwcuts::colgen::{run_colgen, ColGenParams};
use dwcuts::cuts::{compute_phi, separate};
use dwcuts::master::{BlockStructure, RmpState};
use dwcuts::oracle::naive_separate;
use dwcuts::tkp::{build_model, decompose, generate, GenParams};

fn main() {
    let model = build_model(&generate(85, &GenParams::new(14, 3)));
    let dec = decompose(&model, 1).unwrap();
    let mut st = RmpState::new(BlockStructure::new(model.problem, dec));
    let cg = run_colgen(&mut st, &ColGenParams::default()).unwrap();
    let lambda = &cg.solution.lambda;
    let phi = compute_phi(lambda, &st.columns);
    println!(
        "columns={} scanned={} nonzero={} lookups={} pairs={}",
        st.columns.len(),
        phi.work.scanned,
        phi.work.nonzero,
        phi.work.lookups,
        phi.work.pairs
    );
    let cuts = separate(&phi, 0.05, |_| false);
    for c in &cuts {
        println!("pair {:?} pattern {:?}: {:.3} vs {:.3}", c.pattern.pair, c.pattern.bits, c.weight_i, c.weight_j);
    }
    let s = &st.structure;
    let naive = naive_separate(lambda, &st.columns, &s.block_vars, &s.dec.linking_sets, 0.05);
    println!("table: {} cuts, direct evaluation: {} cuts", cuts.len(), naive.len());
}
