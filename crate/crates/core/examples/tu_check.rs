//! Consistency matrices from column pools, with sampled determinants.

use dwcuts::bnp::BnpParams;
use dwcuts::colgen::{run_colgen, run_cut_loop};
use dwcuts::cuts::{build_consistency_matrix, observed_patterns};
use dwcuts::master::{BlockStructure, RmpState};
use dwcuts::oracle::{determinant, tu_sample_check};
use dwcuts::tkp::{build_model, decompose, generate, GenParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    println!("odd cycle, not unimodular: det = {}", determinant(&[vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]]));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let params = BnpParams::default().colgen;
    for seed in 0..5 {
        let model = build_model(&generate(seed, &GenParams::new(16, 5)));
        let dec = decompose(&model, 2).unwrap();
        let mut st = RmpState::new(BlockStructure::new(model.problem, dec));
        let first = run_colgen(&mut st, &params).unwrap();
        run_cut_loop(&mut st, &params, first).unwrap();
        let pats = observed_patterns(&st.columns, st.structure.k());
        let m = build_consistency_matrix(&st.columns, &pats);
        let r = tu_sample_check(&m, 500, &mut rng);
        println!("seed {seed}: {}x{} matrix, {} samples, all in {{-1,0,1}}: {}", m.len(), st.columns.len(), r.trials, r.passed);
    }
}
