//! A general-integer linking variable replaced by binaries, solved before
//! and after with the same optimum.

use dwcuts::bnp::{self, BnpParams};
use dwcuts::lp::Sense;
use dwcuts::model::{binarize_linking_integers, check_extended_chain, derive_block_membership, int, MipProblem, ObjSense, VarKind};
use dwcuts::oracle::brute_solve;

fn main() {
    let mut p = MipProblem::new(ObjSense::Max);
    let z = p.add_variable("z", Some(int(-1)), Some(int(4)), VarKind::Integer, int(1)).unwrap();
    let a = p.add_binary("a", 3);
    let b = p.add_binary("b", 2);
    p.add_constraint([(z, int(1)), (a, int(2))], Sense::Le, int(4)).unwrap();
    p.add_constraint([(z, int(-1)), (b, int(3))], Sense::Le, int(1)).unwrap();
    let d = derive_block_membership(&p, &[1, 2], 2).unwrap();
    println!("before:\n{}", check_extended_chain(&d, &p));

    let (bp, bd, map) = binarize_linking_integers(&p, &d).unwrap();
    let names: Vec<&str> = bp.variables.iter().map(|v| v.name.as_str()).collect();
    println!("variables after: {names:?}");
    println!("after:\n{}", check_extended_chain(&bd, &bp));

    let exact = brute_solve(&p).unwrap().optimum.unwrap();
    println!("enumerated optimum: {}", p.report_objective_exact(exact));
    let r = bnp::solve(bp, bd, &BnpParams::default()).unwrap();
    let inc = r.incumbent.unwrap();
    println!(
        "binarized solve: {} at z={}, a={}, b={} (nodes {})",
        p.report_objective(inc.value),
        map.translate_f64(&inc.x)[z],
        map.translate_f64(&inc.x)[a],
        map.translate_f64(&inc.x)[b],
        r.nodes
    );
}
