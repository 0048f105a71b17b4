//! Pricing subproblems and the branch and bound that solves them.

use crate::lp::{solve_lp, LinearProgram, LpRow, LpStatus, Sense};
use crate::master::{DualValues, RmpState};
use crate::model::{rat_to_f64, BlockId, MipProblem, VarId};

const INT_TOL: f64 = 1e-6;

/// Deterministic work allowance in simplex iterations, and the factor by
/// which it grows when a proof is required.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub work_limit: usize,
    pub escalation: f64,
}

impl Budget {
    pub fn escalate(self) -> Budget {
        let next = (self.work_limit as f64 * self.escalation).ceil() as usize;
        Budget { work_limit: next.max(self.work_limit + 1), ..self }
    }
}

/// Linear objective of a block's pricing problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PricingObjective {
    /// Aligned with the block's variables.
    pub var_coeffs: Vec<f64>,
    /// (cut index, coefficient of its indicator).
    pub cut_coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

/// Reduced-cost objective of `block` under `duals`.
pub fn build_pricing_objective(state: &RmpState, block: BlockId, duals: &DualValues) -> PricingObjective {
    assemble(state, block, duals, true)
}

/// Feasibility objective of `block` under a master infeasibility ray.
pub fn build_farkas_objective(state: &RmpState, block: BlockId, ray: &DualValues) -> PricingObjective {
    assemble(state, block, ray, false)
}

fn assemble(state: &RmpState, block: BlockId, y: &DualValues, with_costs: bool) -> PricingObjective {
    let s = &*state.structure;
    let vars = &s.block_vars[block];
    let mut coeffs: Vec<f64> = vars
        .iter()
        .map(|&v| if with_costs { s.dec.cost_share(v, block) * s.costs[v] } else { 0.0 })
        .collect();
    for (r, &c) in s.coupling.iter().enumerate() {
        for (&v, a) in &s.problem.constraints[c].coeffs {
            if s.dec.owner_block(v) == Some(block) {
                coeffs[s.position(block, v).expect("owned var")] -= y.coupling[r] * rat_to_f64(a);
            }
        }
    }
    for (r, l) in s.links.iter().enumerate() {
        if l.from == block {
            coeffs[s.position(block, l.var).expect("linked var")] -= y.linking[r];
        } else if l.to == block {
            coeffs[s.position(block, l.var).expect("linked var")] += y.linking[r];
        }
    }
    let cut_coeffs = state
        .cuts_touching(block)
        .into_iter()
        .map(|(t, q)| (t, if q.pair.0 == block { -y.cuts[t] } else { y.cuts[t] }))
        .collect();
    PricingObjective { var_coeffs: coeffs, cut_coeffs, constant: -y.convexity[block - 1] }
}

/// A bounded MIP over one block's variables plus one indicator per cut.
#[derive(Debug, Clone, PartialEq)]
pub struct Subproblem {
    pub block: BlockId,
    pub vars: Vec<VarId>,
    pub integral: Vec<bool>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
    /// (cut index, pattern over local positions).
    pub indicators: Vec<(usize, Vec<(usize, bool)>)>,
    /// One entry per variable, then one per indicator.
    pub objective: Vec<f64>,
    pub constant: f64,
}

impl Subproblem {
    /// Pricing problem of `block` at the master's node bounds.
    pub fn for_block(state: &RmpState, block: BlockId, obj: &PricingObjective) -> Subproblem {
        let s = &*state.structure;
        let vars = s.block_vars[block].clone();
        let rows = s.block_rows[block]
            .iter()
            .map(|&c| {
                let row = &s.problem.constraints[c];
                LpRow {
                    coeffs: row
                        .coeffs
                        .iter()
                        .map(|(&v, a)| (s.position(block, v).expect("row var"), rat_to_f64(a)))
                        .collect(),
                    sense: row.sense,
                    rhs: rat_to_f64(&row.rhs),
                }
            })
            .collect();
        let indicators: Vec<(usize, Vec<(usize, bool)>)> = state
            .cuts_touching(block)
            .into_iter()
            .map(|(t, q)| (t, q.bits.iter().map(|&(v, b)| (s.position(block, v).expect("cut var"), b)).collect()))
            .collect();
        let mut objective = obj.var_coeffs.clone();
        for (t, _) in &indicators {
            let c = obj.cut_coeffs.iter().find(|e| e.0 == *t).map_or(0.0, |e| e.1);
            objective.push(c);
        }
        Subproblem {
            block,
            integral: vars.iter().map(|&v| s.problem.variables[v].kind.is_integral()).collect(),
            lower: vars.iter().map(|&v| state.lower[v]).collect(),
            upper: vars.iter().map(|&v| state.upper[v]).collect(),
            vars,
            rows,
            indicators,
            objective,
            constant: obj.constant,
        }
    }

    /// The whole problem as one MIP with its own objective.
    pub fn compact(problem: &MipProblem) -> Subproblem {
        let vars: Vec<VarId> = (0..problem.num_vars()).collect();
        Subproblem {
            block: 0,
            integral: problem.variables.iter().map(|v| v.kind.is_integral()).collect(),
            lower: problem.variables.iter().map(|v| v.lower_f64()).collect(),
            upper: problem.variables.iter().map(|v| v.upper_f64()).collect(),
            rows: problem
                .constraints
                .iter()
                .map(|c| LpRow {
                    coeffs: c.coeffs.iter().map(|(&v, a)| (v, rat_to_f64(a))).collect(),
                    sense: c.sense,
                    rhs: rat_to_f64(&c.rhs),
                })
                .collect(),
            indicators: Vec::new(),
            objective: problem.variables.iter().map(|v| rat_to_f64(&v.cost)).collect(),
            constant: rat_to_f64(&problem.objective_offset),
            vars,
        }
    }

    pub fn num_columns(&self) -> usize {
        self.vars.len() + self.indicators.len()
    }

    fn relaxation(&self, lower: &[f64], upper: &[f64]) -> LinearProgram {
        let mut lp = LinearProgram::new();
        for j in 0..self.num_columns() {
            lp.add_column(self.objective[j], lower[j], upper[j]);
        }
        for r in &self.rows {
            lp.add_row(r.coeffs.clone(), r.sense, r.rhs);
        }
        let n = self.vars.len();
        for (t, (_, bits)) in self.indicators.iter().enumerate() {
            let y = n + t;
            let size = bits.len() as f64;
            let zeros = bits.iter().filter(|b| !b.1).count() as f64;
            let mut coeffs: Vec<(usize, f64)> = bits.iter().map(|&(p, b)| (p, if b { 1.0 } else { -1.0 })).collect();
            let mut lower_row = coeffs.clone();
            lower_row.push((y, -size));
            lp.add_row(lower_row, Sense::Ge, -zeros);
            coeffs.push((y, -1.0));
            lp.add_row(coeffs, Sense::Le, size - 1.0 - zeros);
        }
        lp
    }

    fn column_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.lower.clone();
        let mut hi = self.upper.clone();
        lo.extend(std::iter::repeat_n(0.0, self.indicators.len()));
        hi.extend(std::iter::repeat_n(1.0, self.indicators.len()));
        (lo, hi)
    }

    fn is_integral(&self, j: usize) -> bool {
        j >= self.vars.len() || self.integral[j]
    }

    /// Bound from the variable box alone; `-inf` if a needed bound is infinite.
    fn box_bound(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(&c, (&l, &u))| {
                if c == 0.0 {
                    0.0
                } else if c > 0.0 {
                    c * l
                } else {
                    c * u
                }
            })
            .sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PricingStatus {
    Optimal,
    LimitHit,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingOutcome {
    pub status: PricingStatus,
    /// Best point found: the block's variables, then the indicators.
    pub solution: Option<Vec<f64>>,
    /// Objective of `solution` including the constant.
    pub value: Option<f64>,
    /// Lower bound on the optimum including the constant.
    pub dual_bound: f64,
    pub work: usize,
    pub nodes: usize,
}

struct Node {
    lower: Vec<f64>,
    upper: Vec<f64>,
    bound: f64,
}

/// Best-bound branch and bound on the most fractional integer variable.
/// `work_limit` caps the simplex iterations summed over all nodes.
pub fn solve_subproblem(sp: &Subproblem, work_limit: usize) -> PricingOutcome {
    let (lo, hi) = sp.column_bounds();
    if lo.iter().zip(&hi).any(|(l, u)| l > u) {
        return infeasible(0, 0);
    }
    let root_bound = sp.box_bound(&lo, &hi);
    let mut open = vec![Node { lower: lo, upper: hi, bound: root_bound }];
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut work = 0usize;
    let mut nodes = 0usize;
    let mut limit_hit = false;
    while !open.is_empty() {
        let pick = (0..open.len())
            .min_by(|&a, &b| open[a].bound.total_cmp(&open[b].bound).then(a.cmp(&b)))
            .expect("open nonempty");
        if let Some((inc, _)) = &incumbent {
            if open[pick].bound >= inc - 1e-9 {
                open.clear();
                break;
            }
        }
        if work >= work_limit {
            limit_hit = true;
            break;
        }
        let lp = sp.relaxation(&open[pick].lower, &open[pick].upper);
        let sol = solve_lp(&lp, work_limit - work);
        work += sol.iterations;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                open.remove(pick);
                nodes += 1;
                continue;
            }
            _ => {
                limit_hit = true;
                break;
            }
        }
        nodes += 1;
        let node = open.remove(pick);
        let obj = sol.objective;
        if incumbent.as_ref().is_some_and(|(inc, _)| obj >= inc - 1e-9) {
            continue;
        }
        let branch = (0..sp.num_columns())
            .filter(|&j| sp.is_integral(j))
            .map(|j| {
                let x = sol.primal[j];
                (j, (x - x.floor()).min(x.ceil() - x))
            })
            .filter(|&(_, f)| f > INT_TOL)
            .fold(None::<(usize, f64)>, |best, cand| match best {
                Some(b) if b.1 >= cand.1 => Some(b),
                _ => Some(cand),
            });
        match branch {
            None => {
                let x: Vec<f64> = sol
                    .primal
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| if sp.is_integral(j) { v.round() } else { v })
                    .collect();
                let value = sp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                incumbent = Some((value, x));
            }
            Some((j, _)) => {
                let x = sol.primal[j];
                let mut down = Node { lower: node.lower.clone(), upper: node.upper.clone(), bound: obj };
                down.upper[j] = x.floor();
                let mut up = Node { lower: node.lower, upper: node.upper, bound: obj };
                up.lower[j] = x.ceil();
                open.push(down);
                open.push(up);
            }
        }
    }
    let open_bound = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    match incumbent {
        Some((value, x)) => {
            let bound = if limit_hit { open_bound.min(value) } else { value };
            PricingOutcome {
                status: if limit_hit { PricingStatus::LimitHit } else { PricingStatus::Optimal },
                solution: Some(x),
                value: Some(value + sp.constant),
                dual_bound: bound + sp.constant,
                work,
                nodes,
            }
        }
        None if limit_hit => PricingOutcome {
            status: PricingStatus::LimitHit,
            solution: None,
            value: None,
            dual_bound: open_bound + sp.constant,
            work,
            nodes,
        },
        None => infeasible(work, nodes),
    }
}

fn infeasible(work: usize, nodes: usize) -> PricingOutcome {
    PricingOutcome {
        status: PricingStatus::Infeasible,
        solution: None,
        value: None,
        dual_bound: f64::INFINITY,
        work,
        nodes,
    }
}
