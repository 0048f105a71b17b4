mod common;

use dwcuts::bnp::{self, BnpParams, Mode, SolveStatus};
use dwcuts::cli::{json_f64, mip_to_json, parse_mip_json, solve_tkp_instance, SolveOptions};
use dwcuts::colgen::{run_colgen, ColGenParams};
use dwcuts::cuts::{compute_phi, NONZERO};
use dwcuts::master::{BlockStructure, RmpState};
use dwcuts::model::{binarize_linking_integers, check_extended_chain, rat_to_f64};
use dwcuts::oracle::brute_solve;
use dwcuts::tkp::{build_model, build_model_with, decompose, generate, GenParams, TkpInstance, TkpItem};
use proptest::prelude::*;

fn instance() -> impl Strategy<Value = TkpInstance> {
    let item = (0i64..12, 1i64..6, 1i64..6, 0i64..20).prop_map(|(s, d, w, p)| TkpItem { s, t: s + d, w, p });
    (prop::collection::vec(item, 1..12), 1i64..9).prop_map(|(items, capacity)| TkpInstance { capacity, items })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn text_round_trip(inst in instance()) {
        prop_assert_eq!(TkpInstance::parse(&inst.to_text()).unwrap(), inst);
    }

    #[test]
    fn chronological_blocks_form_chains(inst in instance(), b in 1usize..6) {
        let m = build_model(&inst);
        let d = decompose(&m, b).unwrap();
        prop_assert!(check_extended_chain(&d, &m.problem).integral_root_guaranteed());
    }

    #[test]
    fn dominated_rows_do_not_change_optimum(inst in instance()) {
        let full = brute_solve(&build_model_with(&inst, false).problem).unwrap();
        let reduced = brute_solve(&build_model(&inst).problem).unwrap();
        prop_assert_eq!(full.optimum, reduced.optimum);
    }

    #[test]
    fn cuts_mode_closes_root(inst in instance(), b in 1usize..4) {
        let oracle = brute_solve(&build_model(&inst).problem).unwrap().optimum.unwrap();
        let r = solve_tkp_instance(&inst, SolveOptions { block_size: b, ..SolveOptions::default() }).unwrap();
        prop_assert_eq!(r.nodes, 1);
        prop_assert!(r.root_integral);
        prop_assert!((r.objective.unwrap() + rat_to_f64(&oracle)).abs() < 1e-6);
    }

    #[test]
    fn reports_are_reproducible(inst in instance(), b in 1usize..4) {
        let opts = SolveOptions { block_size: b, ..SolveOptions::default() };
        let a = solve_tkp_instance(&inst, opts).unwrap().to_json(false);
        let c = solve_tkp_instance(&inst, opts).unwrap().to_json(false);
        prop_assert_eq!(a, c);
    }

    #[test]
    fn threads_do_not_change_results(inst in instance()) {
        let one = SolveOptions { block_size: 1, ..SolveOptions::default() };
        let mut many = one;
        many.bnp.colgen.threads = 3;
        let a = solve_tkp_instance(&inst, one).unwrap();
        let c = solve_tkp_instance(&inst, many).unwrap();
        prop_assert_eq!(a.objective, c.objective);
        prop_assert_eq!(a.nodes, c.nodes);
        prop_assert_eq!(a.colgen_iterations, c.colgen_iterations);
    }

    #[test]
    fn phi_weights_sum_to_one_per_pair(seed in 0u64..500, b in 1usize..4) {
        let m = build_model(&generate(seed, &GenParams::new(12, 4)));
        let d = decompose(&m, b).unwrap();
        let mut st = RmpState::new(BlockStructure::new(m.problem, d));
        let cg = run_colgen(&mut st, &ColGenParams::default()).unwrap();
        let phi = compute_phi(&cg.solution.lambda, &st.columns);
        for table in phi.pairs.values() {
            let (si, sj) = table.values().fold((0.0, 0.0), |acc, w| (acc.0 + w.0, acc.1 + w.1));
            prop_assert!(si <= 1.0 + 1e-6 && sj <= 1.0 + 1e-6);
            prop_assert!(table.values().all(|w| w.0 > NONZERO || w.1 > NONZERO));
        }
    }

    #[test]
    fn generic_programs_match_oracle(seed in 0u64..10_000) {
        let (p, d) = common::random_block_program(seed);
        let oracle = brute_solve(&p).unwrap();
        for mode in [Mode::Cuts, Mode::NoCuts] {
            let r = bnp::solve(p.clone(), d.clone(), &BnpParams { mode, ..BnpParams::default() }).unwrap();
            match &oracle.optimum {
                Some(o) => {
                    prop_assert_eq!(r.status, SolveStatus::Optimal);
                    prop_assert!((r.incumbent.unwrap().value - rat_to_f64(o)).abs() < 1e-6);
                }
                None => prop_assert_eq!(r.status, SolveStatus::Infeasible),
            }
        }
    }

    #[test]
    fn binarization_preserves_optimum(seed in 0u64..10_000) {
        let (p, d) = common::integer_linking_program(seed);
        let (bp, bd, map) = binarize_linking_integers(&p, &d).unwrap();
        prop_assert!(check_extended_chain(&bd, &bp).all_linking_binary);
        let before = brute_solve(&p).unwrap();
        let after = brute_solve(&bp).unwrap();
        prop_assert_eq!(&before.optimum, &after.optimum);
        if let Some(x) = after.assignment {
            prop_assert!(p.is_feasible(&map.translate(&x)));
        }
    }

    #[test]
    fn json_round_trip(seed in 0u64..10_000) {
        let (p, d) = common::random_block_program(seed);
        let (p2, d2) = parse_mip_json(&mip_to_json(&p, &d)).unwrap();
        prop_assert_eq!(p, p2);
        prop_assert_eq!(d, d2);
    }

    #[test]
    fn nine_significant_digits(x in -1e12f64..1e12) {
        let v = json_f64(x).as_f64().unwrap();
        prop_assert!((v - x).abs() <= x.abs() * 1e-8 + 1e-300);
    }
}
