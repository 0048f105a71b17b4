//! The two-block worked example: the relaxation over its twelve extreme
//! points is fractional at 6.5, one consistency cut closes it to 6.

use dwcuts::bnp::{self, BnpParams, Mode};
use dwcuts::cuts::{apply_cut, compute_phi, separate, Pattern};
use dwcuts::master::{BlockStructure, Column, RmpState};
use dwcuts::model::worked_example;

fn main() {
    let (p, d) = worked_example();
    let mut st = RmpState::new(BlockStructure::new(p.clone(), d.clone()));
    let s = st.structure.clone();
    let first = [[0., 0., 0.], [1., 0., 0.], [0., 1., 0.], [0., 0., 1.], [0., 1., 1.]];
    let second = [[0., 0., 0.], [1., 0., 0.], [0., 1., 0.], [0., 0., 1.], [1., 1., 0.], [1., 0., 1.], [0., 1., 1.]];
    for v in first {
        st.add_column(Column::new(&s, 1, v.to_vec()).unwrap()).unwrap();
    }
    for v in second {
        st.add_column(Column::new(&s, 2, v.to_vec()).unwrap()).unwrap();
    }

    let sol = st.solve(false).unwrap();
    let x = st.extract_original_solution(&sol).unwrap();
    println!("relaxation: {:.3}  x = {:?}", p.report_objective(sol.objective), x.x);
    for (c, l) in st.columns.iter().zip(&sol.lambda).filter(|(_, &l)| l > 1e-9) {
        println!("  block {} point {:?} weight {l:.3}", c.block, c.values);
    }

    let phi = compute_phi(&sol.lambda, &st.columns);
    for cand in separate(&phi, 0.05, |_| false) {
        println!("  violated pattern {:?}: {:.3} vs {:.3}", cand.pattern.bits, cand.weight_i, cand.weight_j);
    }

    let zero = Pattern { pair: (1, 2), bits: vec![(1, false), (2, false)] };
    apply_cut(&mut st, zero).unwrap();
    let sol = st.solve(false).unwrap();
    let x = st.extract_original_solution(&sol).unwrap();
    println!("with cut on x2 = x3 = 0: {:.3}  x = {:?}  integral = {}", p.report_objective(sol.objective), x.x, x.integral);

    for mode in [Mode::Cuts, Mode::NoCuts] {
        let r = bnp::solve(p.clone(), d.clone(), &BnpParams { mode, ..BnpParams::default() }).unwrap();
        println!(
            "{mode:?}: objective {:.3}, nodes {}, cuts {}",
            p.report_objective(r.incumbent.unwrap().value),
            r.nodes,
            r.cuts_added
        );
    }
}
