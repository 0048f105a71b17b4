//! Writes the worked example as decomposed-MIP JSON, reads it back and
//! solves it through the command layer.

use dwcuts::cli::{mip_to_json, parse_mip_json, solve_mip_file, SolveOptions};
use dwcuts::model::{check_extended_chain, worked_example};

fn main() {
    let (p, d) = worked_example();
    let text = mip_to_json(&p, &d);
    print!("{text}");
    let (p2, d2) = parse_mip_json(&text).unwrap();
    assert_eq!((&p, &d), (&p2, &d2));
    print!("{}", check_extended_chain(&d2, &p2));
    let path = std::env::temp_dir().join("dwcuts_worked_example.json");
    std::fs::write(&path, &text).unwrap();
    let report = solve_mip_file(&path, SolveOptions::default()).unwrap();
    print!("{}", report.to_json(false));
}
