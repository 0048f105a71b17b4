//! Acceptance checks, one line per criterion. Soft criteria are reported but
//! do not fail the run.

mod common;

use std::collections::BTreeMap;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{close, integer_linking_program, random_block_program, suite, SuiteCase};
use dwcuts::bnp::{self, BnpParams, Mode, SolveStatus};
use dwcuts::colgen::{run_colgen, run_cut_loop, ColGenParams, ColGenStatus};
use dwcuts::cuts::{apply_cut, build_consistency_matrix, compute_phi, observed_patterns, separate, CutError, Pattern};
use dwcuts::master::{BlockStructure, Column, RmpState, RowDrop};
use dwcuts::model::{binarize_linking_integers, check_extended_chain, worked_example, MipProblem};
use dwcuts::oracle::{brute_solve, naive_separate, tu_sample_check, OracleStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LP_TOL: f64 = 1e-6;
const SEP_TOL: f64 = 1e-9;
const SUITE_SIZE: u64 = 100;
const SUITE_TIME: Duration = Duration::from_secs(300);
const E1_TIME: Duration = Duration::from_secs(1);
const MAX_ROUNDS: usize = 10;
const SEP_SAMPLES: usize = 200;
const TU_INSTANCES: usize = 20;
const TU_TRIALS: usize = 200;
const REDUNDANCY_INSTANCES: usize = 20;
const NOCUT_TKP: u64 = 30;
const NOCUT_GENERIC: u64 = 20;
const BINARIZE_INSTANCES: u64 = 20;
const STAB_SHARE: f64 = 0.6;

struct Outcome {
    pass: bool,
    soft: bool,
    detail: String,
}

fn hard(pass: bool, detail: String) -> Outcome {
    Outcome { pass, soft: false, detail }
}

fn soft(pass: bool, detail: String) -> Outcome {
    Outcome { pass, soft: true, detail }
}

fn fresh(p: &MipProblem, d: &dwcuts::model::Decomposition) -> RmpState {
    RmpState::new(BlockStructure::new(p.clone(), d.clone()))
}

fn worked_example_fidelity() -> Outcome {
    let start = Instant::now();
    let (p, d) = worked_example();
    let mut st = fresh(&p, &d);
    let s = st.structure.clone();
    let b1: [[f64; 3]; 5] = [[0., 0., 0.], [1., 0., 0.], [0., 1., 0.], [0., 0., 1.], [0., 1., 1.]];
    let b2: [[f64; 3]; 7] =
        [[0., 0., 0.], [1., 0., 0.], [0., 1., 0.], [0., 0., 1.], [1., 1., 0.], [1., 0., 1.], [0., 1., 1.]];
    for v in b1 {
        st.add_column(Column::new(&s, 1, v.to_vec()).unwrap()).unwrap();
    }
    for v in b2 {
        st.add_column(Column::new(&s, 2, v.to_vec()).unwrap()).unwrap();
    }
    let relax = p.report_objective(st.solve(false).unwrap().objective);
    let q = Pattern { pair: (1, 2), bits: vec![(1, false), (2, false)] };
    let id = apply_cut(&mut st, q).unwrap();
    let row = s.num_stabilized_rows() + id;
    let ybar: Vec<i64> = st
        .columns
        .iter()
        .map(|c| st.column_coefficients(c).iter().find(|e| e.0 == row).map_or(0, |e| e.1.abs().round() as i64))
        .collect();
    let sol = st.solve(false).unwrap();
    let cut_value = p.report_objective(sol.objective);
    let cut_integral = st.extract_original_solution(&sol).unwrap().integral;
    let r = bnp::solve(p.clone(), d, &BnpParams::default()).unwrap();
    let root = r.root.as_ref().unwrap();
    let value = p.report_objective(r.incumbent.as_ref().unwrap().value);
    let elapsed = start.elapsed();
    let ok = (relax - 6.5).abs() <= LP_TOL
        && (cut_value - 6.0).abs() <= LP_TOL
        && cut_integral
        && ybar == [1, 1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0]
        && (p.report_objective(root.objective) - 6.0).abs() <= LP_TOL
        && root.integral
        && r.nodes == 1
        && (value - 6.0).abs() <= LP_TOL
        && elapsed < E1_TIME;
    hard(
        ok,
        format!(
            "relaxation={relax:.9} with_cut={cut_value:.9} ybar={ybar:?} root={:.9} integral={} nodes={} time={elapsed:.2?}",
            p.report_objective(root.objective),
            root.integral,
            r.nodes
        ),
    )
}

fn integral_root_suite(cases: &[SuiteCase]) -> (Outcome, Outcome) {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut max_rounds = (0, 0);
    for c in cases {
        let oracle = brute_solve(&c.problem).unwrap();
        let r = bnp::solve(c.problem.clone(), c.dec.clone(), &BnpParams::default()).unwrap();
        let root_integral = r.root.as_ref().is_some_and(|x| x.integral);
        let matches = match (&oracle.optimum, &r.incumbent) {
            (Some(o), Some(inc)) => close(inc.value, o, LP_TOL),
            _ => false,
        };
        if !(r.status == SolveStatus::Optimal && root_integral && r.nodes == 1 && matches) {
            failures.push(c.seed);
        }
        if r.cut_rounds() > max_rounds.0 {
            max_rounds = (r.cut_rounds(), c.seed);
        }
    }
    let elapsed = start.elapsed();
    let suite_ok = failures.is_empty() && elapsed < SUITE_TIME;
    (
        hard(suite_ok, format!("instances={} failures={failures:?} time={elapsed:.2?}", cases.len())),
        soft(max_rounds.0 <= MAX_ROUNDS, format!("max_rounds={} at seed {} (limit {MAX_ROUNDS})", max_rounds.0, max_rounds.1)),
    )
}

fn separation_equivalence(cases: &[SuiteCase]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    let mut mismatches = Vec::new();
    let params = ColGenParams::default();
    let per = SEP_SAMPLES / 20;
    for c in cases.iter().take(20) {
        let mut st = fresh(&c.problem, &c.dec);
        let cg = run_colgen(&mut st, &params).unwrap();
        let s = st.structure.clone();
        for t in 0..per {
            let lambda: Vec<f64> = cg
                .solution
                .lambda
                .iter()
                .map(|&l| match rng.gen_range(0..10) {
                    0 => 0.0,
                    1 => 5e-10,
                    _ => (l + rng.gen_range(-0.3..0.3)).max(0.0),
                })
                .collect();
            let delta = [0.05, 1e-6, 0.2][t % 3];
            let fast: BTreeMap<Pattern, (f64, f64)> = separate(&compute_phi(&lambda, &st.columns), delta, |_| false)
                .into_iter()
                .map(|x| (x.pattern, (x.weight_i, x.weight_j)))
                .collect();
            let slow: BTreeMap<Pattern, (f64, f64)> =
                naive_separate(&lambda, &st.columns, &s.block_vars, &s.dec.linking_sets, delta)
                    .into_iter()
                    .map(|x| (x.pattern, (x.weight_i, x.weight_j)))
                    .collect();
            let same = fast.len() == slow.len()
                && fast.iter().zip(&slow).all(|((qa, a), (qb, b))| {
                    qa == qb && (a.0 - b.0).abs() <= SEP_TOL && (a.1 - b.1).abs() <= SEP_TOL
                });
            if !same {
                mismatches.push((c.seed, t));
            }
            checked += 1;
        }
    }
    hard(mismatches.is_empty() && checked == SEP_SAMPLES, format!("samples={checked} mismatches={mismatches:?}"))
}

fn tu_sampling(cases: &[SuiteCase]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = ColGenParams::default();
    let mut failures = Vec::new();
    let mut sizes = Vec::new();
    for c in cases.iter().take(TU_INSTANCES) {
        let mut st = fresh(&c.problem, &c.dec);
        let first = run_colgen(&mut st, &params).unwrap();
        run_cut_loop(&mut st, &params, first).unwrap();
        let pats = observed_patterns(&st.columns, st.structure.k());
        let m = build_consistency_matrix(&st.columns, &pats);
        sizes.push((m.len(), st.columns.len()));
        let r = tu_sample_check(&m, TU_TRIALS, &mut rng);
        if !r.passed {
            failures.push(c.seed);
        }
    }
    let largest = sizes.iter().max_by_key(|s| s.0 * s.1).copied().unwrap_or_default();
    hard(
        failures.is_empty(),
        format!("instances={TU_INSTANCES} trials={TU_TRIALS} largest={}x{} failures={failures:?}", largest.0, largest.1),
    )
}

fn consecutive_pairs_linked(st: &RmpState) -> bool {
    let d = &st.structure.dec;
    (1..d.k).all(|i| !d.linking_set(i, i + 1).is_empty())
}

fn redundant_rows(cases: &[SuiteCase]) -> Outcome {
    let params = ColGenParams::default();
    let mut used = 0;
    let mut worst_drop: f64 = 0.0;
    let mut worst_skip: f64 = 0.0;
    for c in cases.iter().filter(|c| c.n <= 14 && c.dec.k >= 3) {
        if used == REDUNDANCY_INSTANCES {
            break;
        }
        let mut st = fresh(&c.problem, &c.dec);
        if !consecutive_pairs_linked(&st) || !check_extended_chain(&c.dec, &c.problem).integral_root_guaranteed() {
            continue;
        }
        let cg = run_colgen(&mut st, &params).unwrap();
        if cg.status != ColGenStatus::Converged {
            continue;
        }
        for q in observed_patterns(&st.columns, st.structure.k()) {
            match apply_cut(&mut st, q) {
                Ok(_) | Err(CutError::Duplicate) => {}
                Err(e) => panic!("{e}"),
            }
        }
        let sol = st.solve(false).unwrap();
        let dropped = st.solve_without(RowDrop { linking: true, convexity_after_first: true }).unwrap();
        worst_drop = worst_drop.max((sol.objective - dropped).abs());
        let s = st.structure.clone();
        let skip: BTreeMap<_, _> =
            s.dec.linking_sets.iter().filter(|(p, _)| p.1 > p.0 + 1).map(|(p, v)| (*p, v.clone())).collect();
        for v in naive_separate(&sol.lambda, &st.columns, &s.block_vars, &skip, 0.0) {
            worst_skip = worst_skip.max((v.weight_i - v.weight_j).abs());
        }
        used += 1;
    }
    hard(
        used == REDUNDANCY_INSTANCES && worst_drop < LP_TOL && worst_skip < LP_TOL,
        format!("instances={used} max_row_drop_change={worst_drop:.3e} max_skip_pair_gap={worst_skip:.3e}"),
    )
}

fn oracle_without_cuts(cases: &[SuiteCase]) -> Outcome {
    let params = BnpParams { mode: Mode::NoCuts, ..BnpParams::default() };
    let mut failures = Vec::new();
    let mut branched = 0;
    let mut infeasible = 0;
    let mut problems: Vec<(String, MipProblem, dwcuts::model::Decomposition)> = cases
        .iter()
        .take(NOCUT_TKP as usize)
        .map(|c| (format!("tkp{}", c.seed), c.problem.clone(), c.dec.clone()))
        .collect();
    for seed in 0..NOCUT_GENERIC {
        let (p, d) = random_block_program(seed);
        problems.push((format!("generic{seed}"), p, d));
    }
    let non_chain = problems
        .iter()
        .filter(|(_, p, d)| !check_extended_chain(d, p).integral_root_guaranteed())
        .count();
    for (name, p, d) in &problems {
        let oracle = brute_solve(p).unwrap();
        let r = bnp::solve(p.clone(), d.clone(), &params).unwrap();
        if r.nodes > 1 {
            branched += 1;
        }
        let ok = match oracle.status {
            OracleStatus::Infeasible => {
                infeasible += 1;
                r.status == SolveStatus::Infeasible
            }
            OracleStatus::Optimal => {
                r.status == SolveStatus::Optimal
                    && r.incumbent.as_ref().is_some_and(|i| close(i.value, oracle.optimum.as_ref().unwrap(), LP_TOL))
            }
        };
        if !ok {
            failures.push(name.clone());
        }
    }
    hard(
        failures.is_empty(),
        format!(
            "instances={} non_chain={non_chain} branched={branched} infeasible={infeasible} failures={failures:?}",
            problems.len()
        ),
    )
}

fn binarization() -> Outcome {
    let mut failures = Vec::new();
    let mut bits = 0;
    for seed in 0..BINARIZE_INSTANCES {
        let (p, d) = integer_linking_program(seed);
        let (bp, bd, map) = binarize_linking_integers(&p, &d).unwrap();
        bits += bp.num_vars() - p.num_vars();
        let before = brute_solve(&p).unwrap();
        let after = brute_solve(&bp).unwrap();
        let mut ok = before.optimum == after.optimum;
        if let Some(x) = &after.assignment {
            ok &= p.is_feasible(&map.translate(x)) && Some(p.objective(&map.translate(x))) == before.optimum;
        }
        let r = bnp::solve(bp, bd, &BnpParams::default()).unwrap();
        ok &= match (&before.optimum, &r.incumbent) {
            (Some(o), Some(inc)) => close(inc.value, o, LP_TOL) && p.is_feasible_f64(&map.translate_f64(&inc.x), LP_TOL),
            (None, None) => r.status == SolveStatus::Infeasible,
            _ => false,
        };
        if !ok {
            failures.push(seed);
        }
    }
    hard(failures.is_empty(), format!("instances={BINARIZE_INSTANCES} added_vars={bits} failures={failures:?}"))
}

fn stabilization(cases: &[SuiteCase]) -> (Outcome, Outcome) {
    let stab = ColGenParams::default();
    let plain = ColGenParams { rho: 0.0, ..stab };
    let mut worst: f64 = 0.0;
    let mut not_worse = 0;
    let mut bad = Vec::new();
    let (mut it_s, mut it_p) = (0, 0);
    for c in cases {
        let mut a = fresh(&c.problem, &c.dec);
        let mut b = fresh(&c.problem, &c.dec);
        let ra = run_colgen(&mut a, &stab).unwrap();
        let rb = run_colgen(&mut b, &plain).unwrap();
        if ra.status != ColGenStatus::Converged || rb.status != ColGenStatus::Converged {
            bad.push(c.seed);
            continue;
        }
        worst = worst.max((ra.solution.objective - rb.solution.objective).abs());
        if ra.iterations <= rb.iterations {
            not_worse += 1;
        }
        it_s += ra.iterations;
        it_p += rb.iterations;
    }
    let share = not_worse as f64 / cases.len() as f64;
    (
        hard(bad.is_empty() && worst < LP_TOL, format!("instances={} max_value_gap={worst:.3e} unconverged={bad:?}", cases.len())),
        soft(
            share >= STAB_SHARE,
            format!("stabilized_not_worse={not_worse}/{} iterations stabilized={it_s} plain={it_p}", cases.len()),
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/seed1_n20.tkp");
    let generated = dir.path().join("g.tkp");
    let gen = Command::new(env!("CARGO_BIN_EXE_dwcuts"))
        .args(["gen-tkp", "--seed", "11", "--n", "18", "--capacity", "5", "--out"])
        .arg(&generated)
        .status()
        .unwrap();
    let mut ok = gen.success();
    let mut runs = 0;
    for (path, b) in [(fixture.into(), "2"), (generated.clone(), "1"), (generated, "4")] {
        let run = || {
            Command::new(env!("CARGO_BIN_EXE_dwcuts"))
                .args(["solve-tkp", "--threads", "1", "--seed", "3", "--block-size", b])
                .arg::<&std::path::Path>(&path)
                .output()
                .unwrap()
        };
        let (x, y) = (run(), run());
        ok &= x.status.success() && y.status.success() && !x.stdout.is_empty() && x.stdout == y.stdout;
        runs += 1;
    }
    hard(ok, format!("invocations={runs} byte_identical={ok}"))
}

fn main() {
    let cases = suite(SUITE_SIZE);
    let (c2, c3) = integral_root_suite(&cases);
    let (c9, c9s) = stabilization(&cases);
    let results = [
        ("1 worked example", worked_example_fidelity()),
        ("2 integral root suite", c2),
        ("3 cut round bound", c3),
        ("4 separation equivalence", separation_equivalence(&cases)),
        ("5 TU sampling", tu_sampling(&cases)),
        ("6 redundancy", redundant_rows(&cases)),
        ("7 oracle without cuts", oracle_without_cuts(&cases)),
        ("8 binarization", binarization()),
        ("9 stabilization values", c9),
        ("9 stabilization iterations", c9s),
        ("10 determinism", determinism()),
    ];
    let mut hard_fail = false;
    for (name, o) in &results {
        let tag = match (o.pass, o.soft) {
            (true, _) => "PASS",
            (false, true) => "SOFT-FAIL",
            (false, false) => "FAIL",
        };
        hard_fail |= !o.pass && !o.soft;
        println!("criterion {name}: {tag} ({})", o.detail);
    }
    if hard_fail {
        std::process::exit(1);
    }
}
