//! Best-first branch-and-cut-and-price over original variables.

use log::info;
use thiserror::Error;

use crate::colgen::{initial_columns, run_colgen, run_cut_loop, ColGenError, ColGenParams, ColGenStatus, CutRound};
use crate::master::{BlockStructure, MasterError, RmpState};
use crate::model::{rat_to_f64, Decomposition, MipProblem, VarId};

const INT_TOL: f64 = 1e-6;
pub const GAP_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BnpError {
    #[error(transparent)]
    ColGen(#[from] ColGenError),
    #[error(transparent)]
    Master(#[from] MasterError),
    #[error("no fractional integer variable to branch on")]
    NothingToBranch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Cuts,
    NoCuts,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BnpParams {
    pub colgen: ColGenParams,
    pub mode: Mode,
    pub node_limit: usize,
    /// Simplex iterations for the warm-start solve of the compact problem.
    pub warm_start_budget: usize,
}

impl Default for BnpParams {
    fn default() -> Self {
        BnpParams { colgen: ColGenParams::default(), mode: Mode::Cuts, node_limit: 100_000, warm_start_budget: 5_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    /// Minimisation sense, including the objective offset.
    pub value: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootStats {
    /// Master value after the cut loop, minimisation sense with offset.
    pub objective: f64,
    /// Master value before any cut.
    pub relaxation: f64,
    pub bound: f64,
    pub integral: bool,
    pub rounds: Vec<CutRound>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    pub status: SolveStatus,
    pub incumbent: Option<Incumbent>,
    /// Global lower bound, minimisation sense with offset.
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub root: Option<RootStats>,
    pub cuts_added: usize,
    pub colgen_iterations: usize,
    pub columns_added: usize,
}

impl SearchState {
    pub fn cut_rounds(&self) -> usize {
        self.root.as_ref().map_or(0, |r| r.rounds.len())
    }
}

pub struct BnpNode {
    pub state: RmpState,
    pub bound: f64,
    pub depth: usize,
}

/// Largest `|c| * distance to the nearest integer`; ties go to the most
/// fractional variable, then the lowest id.
pub fn choose_branch_variable(x: &[f64], costs: &[f64], integral: &[bool]) -> Option<VarId> {
    let mut best: Option<(VarId, f64, f64)> = None;
    for (v, &val) in x.iter().enumerate() {
        if !integral[v] {
            continue;
        }
        let frac = (val - val.floor()).min(val.ceil() - val);
        if frac <= INT_TOL {
            continue;
        }
        let f = costs[v].abs() * frac;
        let better = match best {
            None => true,
            Some((_, bf, bfrac)) => f > bf + 1e-12 || ((f - bf).abs() <= 1e-12 && frac > bfrac + 1e-12),
        };
        if better {
            best = Some((v, f, frac));
        }
    }
    best.map(|b| b.0)
}

/// Children `x <= floor(value)` and `x >= ceil(value)` with filtered columns.
pub fn branch(node: &BnpNode, var: VarId, value: f64, bound: f64) -> [BnpNode; 2] {
    let mut down = node.state.clone();
    down.restrict(var, f64::NEG_INFINITY, value.floor());
    let mut up = node.state.clone();
    up.restrict(var, value.ceil(), f64::INFINITY);
    [
        BnpNode { state: down, bound, depth: node.depth + 1 },
        BnpNode { state: up, bound, depth: node.depth + 1 },
    ]
}

fn gap(incumbent: f64, bound: f64) -> f64 {
    (incumbent - bound).abs() / incumbent.abs().max(1.0)
}

fn prunable(bound: f64, incumbent: &Option<Incumbent>) -> bool {
    incumbent.as_ref().is_some_and(|inc| bound >= inc.value - GAP_TOL * inc.value.abs().max(1.0))
}

pub fn solve(problem: MipProblem, dec: Decomposition, params: &BnpParams) -> Result<SearchState, BnpError> {
    let structure = BlockStructure::new(problem, dec);
    let problem = &structure.problem;
    let offset = rat_to_f64(&problem.objective_offset);
    let integral: Vec<bool> = problem.variables.iter().map(|v| v.kind.is_integral()).collect();
    let mut root = RmpState::new(structure.clone());
    let mut incumbent: Option<Incumbent> = None;
    let init = initial_columns(&structure, params.warm_start_budget);
    for c in init.columns {
        root.add_column(c)?;
    }
    if let Some(x) = init.point {
        if problem.is_feasible_f64(&x, INT_TOL) {
            incumbent = Some(Incumbent { value: problem.objective_f64(&x), x });
        }
    }
    let mut search = SearchState {
        status: SolveStatus::Optimal,
        incumbent: None,
        bound: f64::NEG_INFINITY,
        gap: f64::INFINITY,
        nodes: 0,
        root: None,
        cuts_added: 0,
        colgen_iterations: 0,
        columns_added: 0,
    };
    let mut open = vec![BnpNode { state: root, bound: f64::NEG_INFINITY, depth: 0 }];
    let mut limited = false;
    while !open.is_empty() {
        let pick = (0..open.len())
            .min_by(|&a, &b| open[a].bound.total_cmp(&open[b].bound).then(a.cmp(&b)))
            .expect("open nonempty");
        if prunable(open[pick].bound, &incumbent) {
            open.remove(pick);
            continue;
        }
        if search.nodes >= params.node_limit {
            limited = true;
            break;
        }
        let mut node = open.remove(pick);
        search.nodes += 1;
        let first = run_colgen(&mut node.state, &params.colgen)?;
        let relaxation = first.solution.objective + offset;
        search.colgen_iterations += first.iterations;
        search.columns_added += first.columns_added;
        let (cg, point, rounds) = match params.mode {
            Mode::Cuts => {
                let it = first.iterations;
                let cols = first.columns_added;
                let r = run_cut_loop(&mut node.state, &params.colgen, first)?;
                search.colgen_iterations += r.colgen_iterations - it;
                search.columns_added += r.columns_added - cols;
                search.cuts_added += r.cuts_added;
                (r.colgen, r.point, r.rounds)
            }
            Mode::NoCuts => {
                let point = match first.status {
                    ColGenStatus::Converged => Some(node.state.extract_original_solution(&first.solution)?),
                    _ => None,
                };
                (first, point, Vec::new())
            }
        };
        let value = cg.solution.objective + offset;
        if search.nodes == 1 {
            search.root = Some(RootStats {
                objective: value,
                relaxation,
                bound: cg.bound + offset,
                integral: point.as_ref().is_some_and(|p| p.integral),
                rounds,
            });
        }
        info!("node={} depth={} status={:?} value={:.9}", search.nodes, node.depth, cg.status, value);
        match cg.status {
            ColGenStatus::Infeasible => continue,
            ColGenStatus::IterationLimit => {
                limited = true;
                open.push(BnpNode { bound: node.bound.max(cg.bound + offset), ..node });
                break;
            }
            ColGenStatus::Converged => {}
        }
        let node_bound = node.bound.max(value);
        if prunable(node_bound, &incumbent) {
            continue;
        }
        let point = point.expect("converged node has a point");
        if point.integral {
            let x: Vec<f64> =
                point.x.iter().zip(&integral).map(|(&v, &i)| if i { v.round() } else { v }).collect();
            if problem.is_feasible_f64(&x, INT_TOL) {
                let v = problem.objective_f64(&x);
                if incumbent.as_ref().is_none_or(|inc| v < inc.value) {
                    incumbent = Some(Incumbent { value: v, x });
                }
                continue;
            }
        }
        let var = choose_branch_variable(&point.x, &structure.costs, &integral).ok_or(BnpError::NothingToBranch)?;
        let node = BnpNode { bound: node_bound, ..node };
        for child in branch(&node, var, point.x[var], node_bound) {
            open.push(child);
        }
    }
    let open_bound = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    search.status = if limited {
        SolveStatus::NodeLimit
    } else if incumbent.is_some() {
        SolveStatus::Optimal
    } else {
        SolveStatus::Infeasible
    };
    search.bound = match &incumbent {
        Some(inc) if !limited => inc.value,
        Some(inc) => open_bound.min(inc.value),
        None if limited => open_bound,
        None => f64::INFINITY,
    };
    if let Some(inc) = &incumbent {
        search.gap = gap(inc.value, search.bound);
    }
    search.incumbent = incumbent;
    Ok(search)
}
