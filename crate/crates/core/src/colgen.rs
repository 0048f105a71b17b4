//! Column generation with box-penalty stabilization, subproblem skipping
//! and budget escalation, plus the outer loop of consistency-cut rounds.

use log::{debug, info, warn};
use thiserror::Error;

use crate::cuts::{apply_cut, compute_phi, separate, CutError};
use crate::master::{
    lagrangian_bound, BlockStructure, Column, DualValues, MasterError, OriginalSolution, RmpSolution, RmpState, RmpStatus, Stabilizer,
};
use crate::model::BlockId;
use crate::subsolver::{
    build_farkas_objective, build_pricing_objective, solve_subproblem, Budget, PricingOutcome, PricingStatus, Subproblem,
};

/// Columns are accepted below this reduced cost.
pub const RC_TOL: f64 = 1e-6;
/// Separation threshold used when nothing exceeds delta but the point is fractional.
pub const FALLBACK_DELTA: f64 = 1e-6;
/// Relative gap between the Lagrangian bound and the master value at which
/// a stabilized run stops without shrinking further.
pub const CLOSE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColGenParams {
    pub delta: f64,
    pub tau: usize,
    pub eta: f64,
    pub rho: f64,
    pub xi: f64,
    pub eps: f64,
    pub threads: usize,
    pub max_iterations: usize,
}

impl Default for ColGenParams {
    fn default() -> Self {
        ColGenParams {
            delta: 0.05,
            tau: 10_000,
            eta: 10.0,
            rho: 1.0,
            xi: 0.15,
            eps: 9e-8,
            threads: 1,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ColGenError {
    #[error(transparent)]
    Master(#[from] MasterError),
    #[error(transparent)]
    Cut(#[from] CutError),
}

/// Per-block skip state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubproblemSchedule {
    pub fails: Vec<u32>,
    pub skip_until: Vec<usize>,
}

impl SubproblemSchedule {
    pub fn new(k: usize) -> Self {
        SubproblemSchedule { fails: vec![0; k], skip_until: vec![0; k] }
    }

    pub fn is_skipped(&self, block: BlockId, iteration: usize) -> bool {
        iteration < self.skip_until[block - 1]
    }
}

/// Records a pricing result: a fail skips the block for `min(2^fails, 8)`
/// iterations, a success clears the record.
pub fn skip_policy(schedule: &mut SubproblemSchedule, block: BlockId, success: bool, iteration: usize) {
    let b = block - 1;
    if success {
        schedule.fails[b] = 0;
        schedule.skip_until[b] = 0;
    } else {
        schedule.fails[b] += 1;
        let len = 1usize << schedule.fails[b].min(3);
        schedule.skip_until[b] = iteration + len.min(8);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColGenStatus {
    Converged,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColGenResult {
    pub status: ColGenStatus,
    /// Last exact master solution.
    pub solution: RmpSolution,
    /// Best Lagrangian bound seen (minimisation sense).
    pub bound: f64,
    pub iterations: usize,
    pub columns_added: usize,
    pub pricing_work: usize,
}

fn price_blocks(blocks: &[(BlockId, Subproblem, usize)], threads: usize) -> Vec<PricingOutcome> {
    if threads <= 1 || blocks.len() <= 1 {
        return blocks.iter().map(|(_, sp, w)| solve_subproblem(sp, *w)).collect();
    }
    let mut out: Vec<Option<PricingOutcome>> = vec![None; blocks.len()];
    let chunk = blocks.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = blocks
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|(_, sp, w)| solve_subproblem(sp, *w)).collect::<Vec<_>>()))
            .collect();
        let mut at = 0;
        for h in handles {
            for r in h.join().expect("pricing worker panicked") {
                out[at] = Some(r);
                at += 1;
            }
        }
    });
    out.into_iter().map(|r| r.expect("every block priced")).collect()
}

fn column_from(state: &RmpState, block: BlockId, out: &PricingOutcome) -> Option<Column> {
    let sol = out.solution.as_ref()?;
    let n = state.structure.block_vars[block].len();
    match Column::new(&state.structure, block, sol[..n].to_vec()) {
        Ok(c) => Some(c),
        Err(e) => {
            warn!("pricing returned an invalid column for block {block}: {e}");
            None
        }
    }
}

struct Proof {
    added: usize,
    bounds: Vec<Option<f64>>,
    work: usize,
    infeasible: bool,
}

/// Prices every block until it either yields an improving column or is
/// solved to optimality, multiplying the budget by eta after each limit.
fn proof_pass(
    state: &mut RmpState,
    params: &ColGenParams,
    duals: Option<&DualValues>,
    ray: Option<&DualValues>,
) -> Result<Proof, ColGenError> {
    let k = state.structure.k();
    let mut proof = Proof { added: 0, bounds: vec![None; k], work: 0, infeasible: false };
    let start = Budget { work_limit: params.tau, escalation: params.eta };
    let mut pending: Vec<(BlockId, Budget)> = (1..=k).map(|b| (b, start)).collect();
    let mut found: Vec<Column> = Vec::new();
    while !pending.is_empty() {
        let jobs: Vec<(BlockId, Subproblem, usize)> = pending
            .iter()
            .map(|&(b, w)| {
                let obj = match (duals, ray) {
                    (Some(d), _) => build_pricing_objective(state, b, d),
                    (None, Some(r)) => build_farkas_objective(state, b, r),
                    (None, None) => unreachable!("proof pass needs duals or a ray"),
                };
                (b, Subproblem::for_block(state, b, &obj), w.work_limit)
            })
            .collect();
        let outs = price_blocks(&jobs, params.threads);
        let mut next = Vec::new();
        for (((b, _, _), out), &(_, w)) in jobs.into_iter().zip(outs).zip(&pending) {
            proof.work += out.work;
            if out.status == PricingStatus::Infeasible {
                proof.infeasible = true;
                proof.bounds[b - 1] = Some(f64::INFINITY);
                continue;
            }
            let improving = out.value.is_some_and(|v| v < -RC_TOL);
            if improving {
                if let Some(c) = column_from(state, b, &out) {
                    found.push(c);
                }
            }
            if out.status == PricingStatus::Optimal || improving {
                proof.bounds[b - 1] = Some(out.dual_bound);
            } else {
                next.push((b, w.escalate()));
            }
        }
        pending = next;
    }
    for c in found {
        if state.add_column(c)?.is_some() {
            proof.added += 1;
        }
    }
    Ok(proof)
}

/// Column generation at the current node until no block prices out.
pub fn run_colgen(state: &mut RmpState, params: &ColGenParams) -> Result<ColGenResult, ColGenError> {
    let k = state.structure.k();
    state.stabilizer = Stabilizer::new(params.rho, params.xi, params.eps, state.stabilizer.center.clone());
    let mut schedule = SubproblemSchedule::new(k);
    let mut best_bound = f64::NEG_INFINITY;
    let mut columns_added = 0;
    let mut work = 0;
    let mut iteration = 0;
    loop {
        iteration += 1;
        if iteration > params.max_iterations {
            let solution = state.solve(false)?;
            return Ok(ColGenResult {
                status: ColGenStatus::IterationLimit,
                solution,
                bound: best_bound,
                iterations: iteration - 1,
                columns_added,
                pricing_work: work,
            });
        }
        let stabilized = state.stabilizer.is_active();
        let sol = state.solve(stabilized)?;
        if sol.status == RmpStatus::Infeasible {
            let ray = sol.farkas.clone().expect("infeasible master carries a ray");
            let proof = proof_pass(state, params, None, Some(&ray))?;
            work += proof.work;
            columns_added += proof.added;
            debug!("iter={iteration} farkas=1 added={}", proof.added);
            if proof.added == 0 || proof.infeasible {
                return Ok(ColGenResult {
                    status: ColGenStatus::Infeasible,
                    solution: sol,
                    bound: f64::INFINITY,
                    iterations: iteration,
                    columns_added,
                    pricing_work: work,
                });
            }
            continue;
        }
        let duals = sol.duals.clone();
        let dual_obj = state.dual_objective(&duals);
        let mut bounds: Vec<Option<f64>> = vec![None; k];
        let (active, skipped): (Vec<BlockId>, Vec<BlockId>) = (1..=k).partition(|&b| !schedule.is_skipped(b, iteration));
        let mut found = Vec::new();
        let mut infeasible_block = false;
        for group in [active, skipped] {
            if group.is_empty() || !found.is_empty() || infeasible_block {
                continue;
            }
            let jobs: Vec<(BlockId, Subproblem, usize)> = group
                .into_iter()
                .map(|b| {
                    let obj = build_pricing_objective(state, b, &duals);
                    (b, Subproblem::for_block(state, b, &obj), params.tau)
                })
                .collect();
            let outs = price_blocks(&jobs, params.threads);
            for ((b, _, _), out) in jobs.iter().zip(&outs) {
                work += out.work;
                if out.status == PricingStatus::Infeasible {
                    infeasible_block = true;
                    continue;
                }
                bounds[b - 1] = Some(out.dual_bound);
                let improving = out.value.is_some_and(|v| v < -RC_TOL);
                let col = if improving { column_from(state, *b, out) } else { None };
                skip_policy(&mut schedule, *b, col.is_some(), iteration);
                if let Some(c) = col {
                    found.push(c);
                }
            }
        }
        if infeasible_block {
            let solution = state.solve(false)?;
            return Ok(ColGenResult {
                status: ColGenStatus::Infeasible,
                solution,
                bound: f64::INFINITY,
                iterations: iteration,
                columns_added,
                pricing_work: work,
            });
        }
        if let Ok(b) = lagrangian_bound(dual_obj, &bounds) {
            best_bound = best_bound.max(b);
        }
        state.stabilizer.recenter(&duals);
        let mut added = 0;
        for c in found {
            if state.add_column(c)?.is_some() {
                added += 1;
            }
        }
        columns_added += added;
        info!(
            "iter={iteration} rmp_obj={:.9} bound={:.9} penalty={:.3e} columns={added} pool={}",
            sol.objective,
            best_bound,
            state.stabilizer.penalty,
            state.columns.len()
        );
        if added > 0 {
            continue;
        }
        if stabilized {
            if best_bound.is_finite() {
                let exact = state.solve(false)?;
                if exact.status == RmpStatus::Optimal && best_bound >= exact.objective - CLOSE_TOL * exact.objective.abs().max(1.0) {
                    debug!("iter={iteration} bound meets master value, penalty dropped");
                    return Ok(ColGenResult {
                        status: ColGenStatus::Converged,
                        bound: best_bound,
                        solution: exact,
                        iterations: iteration,
                        columns_added,
                        pricing_work: work,
                    });
                }
            }
            state.stabilizer.shrink_penalty();
            continue;
        }
        let proof = proof_pass(state, params, Some(&duals), None)?;
        work += proof.work;
        if proof.infeasible {
            return Ok(ColGenResult {
                status: ColGenStatus::Infeasible,
                solution: sol,
                bound: f64::INFINITY,
                iterations: iteration,
                columns_added,
                pricing_work: work,
            });
        }
        if proof.added > 0 {
            columns_added += proof.added;
            schedule = SubproblemSchedule::new(k);
            continue;
        }
        let b = lagrangian_bound(dual_obj, &proof.bounds)?;
        best_bound = best_bound.max(b);
        return Ok(ColGenResult {
            status: ColGenStatus::Converged,
            bound: best_bound,
            solution: sol,
            iterations: iteration,
            columns_added,
            pricing_work: work,
        });
    }
}

/// Statistics of one separation round.
#[derive(Debug, Clone, PartialEq)]
pub struct CutRound {
    pub round: usize,
    pub cuts_added: usize,
    pub rmp_objective: f64,
    pub columns: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutLoopResult {
    pub colgen: ColGenResult,
    pub point: Option<OriginalSolution>,
    pub rounds: Vec<CutRound>,
    pub cuts_added: usize,
    pub colgen_iterations: usize,
    pub columns_added: usize,
}

/// Alternates separation and re-convergence until no cut is violated.
pub fn run_cut_loop(state: &mut RmpState, params: &ColGenParams, first: ColGenResult) -> Result<CutLoopResult, ColGenError> {
    let mut colgen_iterations = first.iterations;
    let mut columns_added = first.columns_added;
    let mut current = first;
    let mut rounds = Vec::new();
    let mut cuts_added = 0;
    loop {
        if current.status != ColGenStatus::Converged {
            return Ok(CutLoopResult { colgen: current, point: None, rounds, cuts_added, colgen_iterations, columns_added });
        }
        let point = state.extract_original_solution(&current.solution)?;
        let phi = compute_phi(&current.solution.lambda, &state.columns);
        let mut cands = separate(&phi, params.delta, |q| state.has_cut(q));
        if cands.is_empty() && !point.integral {
            cands = separate(&phi, FALLBACK_DELTA, |q| state.has_cut(q));
        }
        if cands.is_empty() {
            return Ok(CutLoopResult {
                colgen: current,
                point: Some(point),
                rounds,
                cuts_added,
                colgen_iterations,
                columns_added,
            });
        }
        let n = cands.len();
        for c in cands {
            apply_cut(state, c.pattern)?;
        }
        cuts_added += n;
        current = run_colgen(state, params)?;
        colgen_iterations += current.iterations;
        columns_added += current.columns_added;
        let round = CutRound {
            round: rounds.len() + 1,
            cuts_added: n,
            rmp_objective: current.solution.objective,
            columns: state.columns.len(),
        };
        info!("round={} cuts={} rmp_obj={:.9} columns={}", round.round, n, round.rmp_objective, round.columns);
        rounds.push(round);
    }
}

/// A feasible start from a budgeted solve of the compact problem.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitialSolution {
    pub columns: Vec<Column>,
    pub point: Option<Vec<f64>>,
}

pub fn initial_columns(s: &BlockStructure, budget: usize) -> InitialSolution {
    if budget == 0 {
        return InitialSolution::default();
    }
    let out = solve_subproblem(&Subproblem::compact(&s.problem), budget);
    let Some(x) = out.solution else {
        return InitialSolution::default();
    };
    let mut columns = Vec::new();
    for b in 1..=s.k() {
        let vals = s.block_vars[b].iter().map(|&v| x[v]).collect();
        match Column::new(s, b, vals) {
            Ok(c) => columns.push(c),
            Err(e) => {
                warn!("warm start point does not split into columns: {e}");
                return InitialSolution::default();
            }
        }
    }
    InitialSolution { columns, point: Some(x) }
}
