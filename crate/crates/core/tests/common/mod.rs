#![allow(dead_code)]

use dwcuts::lp::Sense;
use dwcuts::model::{derive_block_membership, int, rat_to_f64, Decomposition, MipProblem, ObjSense, Rat, VarKind};
use dwcuts::tkp::{build_model, decompose, generate, GenParams, TkpInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct SuiteCase {
    pub seed: u64,
    pub n: usize,
    pub capacity: i64,
    pub block_size: usize,
    pub instance: TkpInstance,
    pub problem: MipProblem,
    pub dec: Decomposition,
}

/// Random temporal knapsack with n in [8, 20], C in [3, 10], B in {1, 2, 4}.
pub fn suite_case(seed: u64) -> SuiteCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(8..=20);
    let capacity = rng.gen_range(3..=10);
    let block_size = [1, 2, 4][rng.gen_range(0..3)];
    let instance = generate(seed, &GenParams::new(n, capacity));
    let model = build_model(&instance);
    let dec = decompose(&model, block_size).unwrap();
    SuiteCase { seed, n, capacity, block_size, instance, problem: model.problem, dec }
}

pub fn suite(count: u64) -> Vec<SuiteCase> {
    (0..count).map(suite_case).collect()
}

/// Binary program with a random row-to-block assignment, coupling rows
/// included, so linking variables may skip blocks.
pub fn random_block_program(seed: u64) -> (MipProblem, Decomposition) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_b10c);
    let sense = if rng.gen_bool(0.5) { ObjSense::Min } else { ObjSense::Max };
    let mut p = MipProblem::new(sense);
    let n = rng.gen_range(6..=11);
    let xs: Vec<usize> = (0..n).map(|i| p.add_binary(format!("x{i}"), rng.gen_range(-6..=9))).collect();
    let k = rng.gen_range(2..=3);
    let mut blocks = Vec::new();
    for b in 1..=k {
        for _ in 0..rng.gen_range(1..=2) {
            let row = random_row(&mut rng, &xs, 2, 4);
            let total: i64 = row.iter().map(|r| r.1).sum();
            p.add_constraint(row.iter().map(|&(v, a)| (v, int(a))), Sense::Le, int((total / 2).max(1))).unwrap();
            blocks.push(b);
        }
    }
    for _ in 0..rng.gen_range(1..=2) {
        let row = random_row(&mut rng, &xs, 3, 5);
        if rng.gen_bool(0.5) {
            p.add_constraint(row.iter().map(|&(v, a)| (v, int(a))), Sense::Ge, int(rng.gen_range(1..=3))).unwrap();
        } else {
            let total: i64 = row.iter().map(|r| r.1).sum();
            p.add_constraint(row.iter().map(|&(v, a)| (v, int(a))), Sense::Le, int(total - 1)).unwrap();
        }
        blocks.push(0);
    }
    let d = derive_block_membership(&p, &blocks, k).unwrap();
    (p, d)
}

fn random_row(rng: &mut ChaCha8Rng, xs: &[usize], min: usize, max: usize) -> Vec<(usize, i64)> {
    let len = rng.gen_range(min..=max.min(xs.len()));
    rand::seq::index::sample(rng, xs.len(), len).into_iter().map(|i| (xs[i], rng.gen_range(1..=4))).collect()
}

/// Chain of blocks joined by bounded general-integer linking variables.
pub fn integer_linking_program(seed: u64) -> (MipProblem, Decomposition) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x001d_e6e5);
    let sense = if rng.gen_bool(0.5) { ObjSense::Min } else { ObjSense::Max };
    let mut p = MipProblem::new(sense);
    let k = rng.gen_range(2..=3);
    let links: Vec<usize> = (0..k - 1)
        .map(|i| {
            let lo = rng.gen_range(-2..=1);
            let hi = lo + rng.gen_range(1..=4);
            p.add_variable(format!("z{i}"), Some(int(lo)), Some(int(hi)), VarKind::Integer, int(rng.gen_range(-4..=4)))
                .unwrap()
        })
        .collect();
    let mut blocks = Vec::new();
    for b in 1..=k {
        let own: Vec<usize> =
            (0..rng.gen_range(2..=3)).map(|i| p.add_binary(format!("b{b}_{i}"), rng.gen_range(-5..=8))).collect();
        let mut shared = Vec::new();
        if b > 1 {
            shared.push(links[b - 2]);
        }
        if b < k {
            shared.push(links[b - 1]);
        }
        for _ in 0..2 {
            let mut row: Vec<(usize, Rat)> = own.iter().map(|&v| (v, int(rng.gen_range(0..=3)))).collect();
            for &z in &shared {
                row.push((z, int(rng.gen_range(-2..=2))));
            }
            let rhs = int(rng.gen_range(1..=5));
            p.add_constraint(row, Sense::Le, rhs).unwrap();
            blocks.push(b);
        }
    }
    let d = derive_block_membership(&p, &blocks, k).unwrap();
    (p, d)
}

pub fn close(a: f64, b: &Rat, tol: f64) -> bool {
    (a - rat_to_f64(b)).abs() <= tol
}
