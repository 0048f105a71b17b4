//! Checks decompositions against the integral-root conditions and repairs
//! a linking variable that skips a block.

use dwcuts::lp::Sense;
use dwcuts::model::{check_extended_chain, derive_block_membership, int, repair_chain, worked_example, MipProblem, ObjSense};

fn main() {
    let (p, d) = worked_example();
    println!("worked example:\n{}", check_extended_chain(&d, &p));

    let mut p = MipProblem::new(ObjSense::Max);
    let a = p.add_binary("a", 2);
    let b = p.add_binary("b", 1);
    let c = p.add_binary("c", 3);
    p.add_constraint([(a, int(1)), (b, int(1))], Sense::Le, int(1)).unwrap();
    p.add_constraint([(b, int(1))], Sense::Le, int(1)).unwrap();
    p.add_constraint([(a, int(1)), (c, int(1))], Sense::Le, int(1)).unwrap();
    let d = derive_block_membership(&p, &[1, 2, 3], 3).unwrap();
    let report = check_extended_chain(&d, &p);
    println!("a in blocks 1 and 3 only:\n{report}");
    let fixed = repair_chain(d, &p);
    println!("after registering a with block 2:\n{}", check_extended_chain(&fixed, &p));

    let d = derive_block_membership(&p, &[1, 0, 2], 2).unwrap();
    println!("with a coupling row:\n{}", check_extended_chain(&d, &p));
}
