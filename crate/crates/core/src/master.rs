//! Restricted master problem over block columns.
//!
//! Row layout: coupling rows, variable-linking rows (consecutive copies of
//! each linking variable), one convexity row per block, then one equality
//! row per installed consistency cut. Variables that appear in no block are
//! carried as direct master columns.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use thiserror::Error;

use crate::cuts::Pattern;
use crate::lp::{resolve, solve_lp, Basis, LinearProgram, LpStatus, Sense};
use crate::model::{rat_to_f64, BlockId, ConsId, Decomposition, MipProblem, VarId};

pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MasterError {
    #[error("block {block} out of range 1..={k}")]
    BlockOutOfRange { block: BlockId, k: usize },
    #[error("column for block {block} has {got} values, expected {expected}")]
    WrongLength { block: BlockId, expected: usize, got: usize },
    #[error("column for block {block} is not integral in variable {var}")]
    Fractional { block: BlockId, var: VarId },
    #[error("column for block {block} violates row {row}")]
    InfeasibleColumn { block: BlockId, row: ConsId },
    #[error("column for block {block} violates the bounds of variable {var}")]
    OutOfBounds { block: BlockId, var: VarId },
    #[error("copies of variable {var} disagree by {gap}")]
    CopyMismatch { var: VarId, gap: f64 },
    #[error("master LP ended with status {0:?}")]
    Lp(LpStatus),
    #[error("no pricing bound for block {0}")]
    MissingBound(BlockId),
}

/// `copy_from - copy_to = 0` for one linking variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkRow {
    pub var: VarId,
    pub from: BlockId,
    pub to: BlockId,
}

/// Problem, decomposition and the index maps derived from them.
#[derive(Debug, Clone)]
pub struct BlockStructure {
    pub problem: MipProblem,
    pub dec: Decomposition,
    /// `block_vars[b]` for `b` in `1..=k`; entry 0 is empty.
    pub block_vars: Vec<Vec<VarId>>,
    positions: Vec<BTreeMap<VarId, usize>>,
    pub block_rows: Vec<Vec<ConsId>>,
    pub coupling: Vec<ConsId>,
    pub links: Vec<LinkRow>,
    pub master_vars: Vec<VarId>,
    pub costs: Vec<f64>,
}

impl BlockStructure {
    pub fn new(problem: MipProblem, dec: Decomposition) -> Arc<Self> {
        let k = dec.k;
        let mut block_vars = vec![Vec::new()];
        let mut positions = vec![BTreeMap::new()];
        let mut block_rows = vec![Vec::new()];
        for b in 1..=k {
            let vars = dec.block_vars(b);
            positions.push(vars.iter().enumerate().map(|(p, &v)| (v, p)).collect());
            block_vars.push(vars);
            block_rows.push(dec.block_constraints(b));
        }
        let mut links = Vec::new();
        for (v, blocks) in dec.var_blocks.iter().enumerate() {
            for w in blocks.windows(2) {
                links.push(LinkRow { var: v, from: w[0], to: w[1] });
            }
        }
        let master_vars = (0..problem.num_vars()).filter(|&v| dec.master_only[v]).collect();
        let costs = problem.variables.iter().map(|v| rat_to_f64(&v.cost)).collect();
        Arc::new(BlockStructure {
            coupling: dec.coupling_constraints(),
            problem,
            dec,
            block_vars,
            positions,
            block_rows,
            links,
            master_vars,
            costs,
        })
    }

    pub fn k(&self) -> usize {
        self.dec.k
    }

    pub fn position(&self, block: BlockId, v: VarId) -> Option<usize> {
        self.positions.get(block)?.get(&v).copied()
    }

    pub fn num_stabilized_rows(&self) -> usize {
        self.coupling.len() + self.links.len() + self.k()
    }

    fn convexity_row(&self, block: BlockId) -> usize {
        self.coupling.len() + self.links.len() + block - 1
    }
}

/// An integer point of one block, with its share of the objective and its
/// cached patterns on each neighbouring block's linking set.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub block: BlockId,
    /// Aligned with `BlockStructure::block_vars[block]`.
    pub values: Vec<f64>,
    pub cost: f64,
    /// Neighbour block -> assignment on the shared linking set.
    pub patterns: BTreeMap<BlockId, Vec<(VarId, bool)>>,
}

impl Column {
    /// Certifies the point against the block's rows and variable bounds.
    pub fn new(s: &BlockStructure, block: BlockId, mut values: Vec<f64>) -> Result<Column, MasterError> {
        let k = s.k();
        if block == 0 || block > k {
            return Err(MasterError::BlockOutOfRange { block, k });
        }
        let vars = &s.block_vars[block];
        if values.len() != vars.len() {
            return Err(MasterError::WrongLength { block, expected: vars.len(), got: values.len() });
        }
        for (x, &v) in values.iter_mut().zip(vars) {
            let var = &s.problem.variables[v];
            if var.kind.is_integral() {
                let r = x.round();
                if (r - *x).abs() > FEAS_TOL {
                    return Err(MasterError::Fractional { block, var: v });
                }
                *x = r;
            }
            if *x < var.lower_f64() - FEAS_TOL || *x > var.upper_f64() + FEAS_TOL {
                return Err(MasterError::OutOfBounds { block, var: v });
            }
        }
        for &c in &s.block_rows[block] {
            let row = &s.problem.constraints[c];
            let act: f64 = row
                .coeffs
                .iter()
                .map(|(&v, a)| rat_to_f64(a) * values[s.position(block, v).expect("row var in block")])
                .sum();
            let rhs = rat_to_f64(&row.rhs);
            let ok = match row.sense {
                Sense::Le => act <= rhs + FEAS_TOL,
                Sense::Ge => act >= rhs - FEAS_TOL,
                Sense::Eq => (act - rhs).abs() <= FEAS_TOL,
            };
            if !ok {
                return Err(MasterError::InfeasibleColumn { block, row: c });
            }
        }
        let cost = vars
            .iter()
            .zip(&values)
            .map(|(&v, &x)| s.dec.cost_share(v, block) * s.costs[v] * x)
            .sum();
        let mut patterns = BTreeMap::new();
        for j in s.dec.neighbours(block) {
            let bits = s
                .dec
                .linking_set(block, j)
                .iter()
                .map(|&v| (v, values[s.position(block, v).expect("linking var in block")] > 0.5))
                .collect();
            patterns.insert(j, bits);
        }
        Ok(Column { block, values, cost, patterns })
    }

    pub fn value(&self, s: &BlockStructure, v: VarId) -> Option<f64> {
        s.position(self.block, v).map(|p| self.values[p])
    }

    /// Whether the column's pattern towards the cut's partner block is `q`.
    pub fn matches(&self, cut: &Pattern) -> bool {
        let (i, j) = cut.pair;
        let other = if self.block == i {
            j
        } else if self.block == j {
            i
        } else {
            return false;
        };
        self.patterns.get(&other) == Some(&cut.bits)
    }

    fn key(&self) -> (BlockId, Vec<i64>) {
        (self.block, self.values.iter().map(|x| (x * 1e6).round() as i64).collect())
    }
}

/// One dual value per master row, grouped by row family.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DualValues {
    pub coupling: Vec<f64>,
    pub linking: Vec<f64>,
    /// Index `b - 1` for block `b`.
    pub convexity: Vec<f64>,
    pub cuts: Vec<f64>,
}

impl DualValues {
    pub fn zeros(s: &BlockStructure, cuts: usize) -> Self {
        DualValues {
            coupling: vec![0.0; s.coupling.len()],
            linking: vec![0.0; s.links.len()],
            convexity: vec![0.0; s.k()],
            cuts: vec![0.0; cuts],
        }
    }

    fn from_rows(s: &BlockStructure, y: &[f64]) -> Self {
        let (nc, nl, k) = (s.coupling.len(), s.links.len(), s.k());
        DualValues {
            coupling: y[..nc].to_vec(),
            linking: y[nc..nc + nl].to_vec(),
            convexity: y[nc + nl..nc + nl + k].to_vec(),
            cuts: y[nc + nl + k..].to_vec(),
        }
    }

    /// Values of the rows that take part in stabilization.
    pub fn stabilized(&self) -> Vec<f64> {
        self.coupling.iter().chain(&self.linking).chain(&self.convexity).copied().collect()
    }
}

/// Width-0 box penalty on dual deviations from a center.
#[derive(Debug, Clone, PartialEq)]
pub struct Stabilizer {
    pub penalty: f64,
    pub shrink: f64,
    pub floor: f64,
    pub center: Vec<f64>,
}

impl Stabilizer {
    pub fn new(rho: f64, xi: f64, eps: f64, center: Vec<f64>) -> Self {
        let mut s = Stabilizer { penalty: rho, shrink: xi, floor: eps, center };
        if s.penalty < s.floor {
            s.penalty = 0.0;
        }
        s
    }

    pub fn is_active(&self) -> bool {
        self.penalty > 0.0
    }

    /// Called when pricing finds nothing at the current penalty.
    pub fn shrink_penalty(&mut self) {
        self.penalty *= self.shrink;
        if self.penalty < self.floor {
            self.penalty = 0.0;
        }
    }

    pub fn recenter(&mut self, duals: &DualValues) {
        self.center = duals.stabilized();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmpSolution {
    pub status: RmpStatus,
    pub lambda: Vec<f64>,
    /// Values of the direct master columns, aligned with `master_vars`.
    pub master_values: Vec<f64>,
    pub duals: DualValues,
    /// `c^T lambda` plus direct-column costs, without penalty terms.
    pub objective: f64,
    pub farkas: Option<DualValues>,
    pub iterations: usize,
}

/// Original-variable point recovered from a master solution.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginalSolution {
    pub x: Vec<f64>,
    pub integral: bool,
}

/// Rows left out of the master LP, for redundancy experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RowDrop {
    pub linking: bool,
    pub convexity_after_first: bool,
}

#[derive(Debug, Clone)]
pub struct RmpState {
    pub structure: Arc<BlockStructure>,
    pub columns: Vec<Column>,
    keys: HashSet<(BlockId, Vec<i64>)>,
    pub cuts: Vec<Pattern>,
    cut_keys: BTreeSet<Pattern>,
    /// Node bounds per original variable.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub stabilizer: Stabilizer,
    basis: Option<Basis>,
    pub lp_iteration_limit: usize,
}

impl RmpState {
    pub fn new(structure: Arc<BlockStructure>) -> Self {
        let lower = structure.problem.variables.iter().map(|v| v.lower_f64()).collect();
        let upper = structure.problem.variables.iter().map(|v| v.upper_f64()).collect();
        let center = vec![0.0; structure.num_stabilized_rows()];
        RmpState {
            structure,
            columns: Vec::new(),
            keys: HashSet::new(),
            cuts: Vec::new(),
            cut_keys: BTreeSet::new(),
            lower,
            upper,
            stabilizer: Stabilizer::new(0.0, 0.0, 0.0, center),
            basis: None,
            lp_iteration_limit: 1_000_000,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.structure.num_stabilized_rows() + self.cuts.len()
    }

    /// Installs a column; `Ok(None)` when an identical column exists.
    pub fn add_column(&mut self, column: Column) -> Result<Option<usize>, MasterError> {
        let k = self.structure.k();
        if column.block == 0 || column.block > k {
            return Err(MasterError::BlockOutOfRange { block: column.block, k });
        }
        if !self.keys.insert(column.key()) {
            return Ok(None);
        }
        self.columns.push(column);
        Ok(Some(self.columns.len() - 1))
    }

    pub fn has_cut(&self, pattern: &Pattern) -> bool {
        self.cut_keys.contains(pattern)
    }

    /// Appends a consistency row; `None` if the pattern is installed already.
    pub fn push_cut(&mut self, pattern: Pattern) -> Option<usize> {
        if !self.cut_keys.insert(pattern.clone()) {
            return None;
        }
        self.cuts.push(pattern);
        Some(self.cuts.len() - 1)
    }

    /// Cuts whose pair involves `block`, as (cut index, pattern).
    pub fn cuts_touching(&self, block: BlockId) -> Vec<(usize, &Pattern)> {
        self.cuts
            .iter()
            .enumerate()
            .filter(|(_, q)| q.pair.0 == block || q.pair.1 == block)
            .collect()
    }

    /// Tightens node bounds and drops columns that violate them.
    pub fn restrict(&mut self, var: VarId, lower: f64, upper: f64) {
        self.lower[var] = self.lower[var].max(lower);
        self.upper[var] = self.upper[var].min(upper);
        let s = self.structure.clone();
        let (lo, hi) = (self.lower.clone(), self.upper.clone());
        self.columns.retain(|c| {
            s.block_vars[c.block]
                .iter()
                .zip(&c.values)
                .all(|(&v, &x)| x >= lo[v] - FEAS_TOL && x <= hi[v] + FEAS_TOL)
        });
        self.keys = self.columns.iter().map(Column::key).collect();
        self.basis = None;
    }

    /// Sparse master-row coefficients of a column.
    pub fn column_coefficients(&self, col: &Column) -> Vec<(usize, f64)> {
        let s = &*self.structure;
        let mut out = Vec::new();
        for (r, &c) in s.coupling.iter().enumerate() {
            let a: f64 = s.problem.constraints[c]
                .coeffs
                .iter()
                .filter(|(&v, _)| s.dec.owner_block(v) == Some(col.block))
                .map(|(&v, a)| rat_to_f64(a) * col.value(s, v).expect("owned var in block"))
                .sum();
            if a != 0.0 {
                out.push((r, a));
            }
        }
        let base = s.coupling.len();
        for (r, l) in s.links.iter().enumerate() {
            let sign = if l.from == col.block {
                1.0
            } else if l.to == col.block {
                -1.0
            } else {
                continue;
            };
            let x = col.value(s, l.var).expect("linking var in block");
            if x != 0.0 {
                out.push((base + r, sign * x));
            }
        }
        out.push((s.convexity_row(col.block), 1.0));
        let base = s.num_stabilized_rows();
        for (t, q) in self.cuts.iter().enumerate() {
            if col.matches(q) {
                out.push((base + t, if col.block == q.pair.0 { 1.0 } else { -1.0 }));
            }
        }
        out
    }

    /// `cost - y^T a` for an existing or candidate column.
    pub fn reduced_cost(&self, col: &Column, duals: &DualValues) -> f64 {
        let y = self.flat(duals);
        col.cost - self.column_coefficients(col).iter().map(|&(r, a)| y[r] * a).sum::<f64>()
    }

    fn flat(&self, d: &DualValues) -> Vec<f64> {
        d.coupling.iter().chain(&d.linking).chain(&d.convexity).chain(&d.cuts).copied().collect()
    }

    fn rhs(&self) -> Vec<f64> {
        let s = &*self.structure;
        let mut b: Vec<f64> = s.coupling.iter().map(|&c| rat_to_f64(&s.problem.constraints[c].rhs)).collect();
        b.extend(std::iter::repeat_n(0.0, s.links.len()));
        b.extend(std::iter::repeat_n(1.0, s.k()));
        b.extend(std::iter::repeat_n(0.0, self.cuts.len()));
        b
    }

    /// Master LP with direct columns first, then one penalty column per
    /// stabilized row, then the lambda columns.
    pub fn build_lp(&self, penalty: f64, drop: RowDrop) -> LinearProgram {
        let s = &*self.structure;
        let mut lp = LinearProgram::new();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_rows()];
        for &v in &s.master_vars {
            let j = lp.add_column(s.costs[v], self.lower[v], self.upper[v]);
            for (r, &c) in s.coupling.iter().enumerate() {
                if let Some(a) = s.problem.constraints[c].coeffs.get(&v) {
                    rows[r].push((j, rat_to_f64(a)));
                }
            }
        }
        for r in 0..s.num_stabilized_rows() {
            let j = lp.add_column(-self.stabilizer.center[r], -penalty, penalty);
            rows[r].push((j, -1.0));
        }
        for col in &self.columns {
            let j = lp.add_column(col.cost, 0.0, f64::INFINITY);
            for (r, a) in self.column_coefficients(col) {
                rows[r].push((j, a));
            }
        }
        let b = self.rhs();
        let nl = s.coupling.len() + s.links.len();
        for (r, coeffs) in rows.into_iter().enumerate() {
            let dropped = (drop.linking && r >= s.coupling.len() && r < nl)
                || (drop.convexity_after_first && r > nl && r < s.num_stabilized_rows());
            if dropped {
                continue;
            }
            let sense = if r < s.coupling.len() { s.problem.constraints[s.coupling[r]].sense } else { Sense::Eq };
            lp.add_row(coeffs, sense, b[r]);
        }
        lp
    }

    fn penalty_columns(&self) -> std::ops::Range<usize> {
        let m = self.structure.master_vars.len();
        m..m + self.structure.num_stabilized_rows()
    }

    /// Solves the master, stabilized with the current penalty if asked.
    /// An infeasible master is re-solved without penalty to obtain a ray.
    pub fn solve(&mut self, stabilized: bool) -> Result<RmpSolution, MasterError> {
        let penalty = if stabilized { self.stabilizer.penalty } else { 0.0 };
        let lp = self.build_lp(penalty, RowDrop::default());
        let sol = match &self.basis {
            Some(b) if b.columns.len() <= lp.num_columns() && b.rows.len() <= lp.num_rows() => {
                resolve(&lp, b, self.lp_iteration_limit)
            }
            _ => solve_lp(&lp, self.lp_iteration_limit),
        };
        let s = self.structure.clone();
        match sol.status {
            LpStatus::Optimal => {
                self.basis = sol.basis.clone();
                let nm = s.master_vars.len();
                let skip = nm + s.num_stabilized_rows();
                let lambda = sol.primal[skip..].to_vec();
                let master_values = sol.primal[..nm].to_vec();
                let objective = lp.columns[..nm]
                    .iter()
                    .chain(&lp.columns[skip..])
                    .zip(master_values.iter().chain(&lambda))
                    .map(|(c, x)| c.cost * x)
                    .sum();
                Ok(RmpSolution {
                    status: RmpStatus::Optimal,
                    lambda,
                    master_values,
                    duals: DualValues::from_rows(&s, &sol.duals),
                    objective,
                    farkas: None,
                    iterations: sol.iterations,
                })
            }
            LpStatus::Infeasible if penalty > 0.0 => {
                let mut exact = self.solve(false)?;
                exact.iterations += sol.iterations;
                Ok(exact)
            }
            LpStatus::Infeasible => {
                self.basis = None;
                let ray = sol.farkas.expect("infeasible LP carries a certificate");
                debug_assert!(self.penalty_columns().len() == s.num_stabilized_rows());
                Ok(RmpSolution {
                    status: RmpStatus::Infeasible,
                    lambda: vec![0.0; self.columns.len()],
                    master_values: vec![0.0; s.master_vars.len()],
                    duals: DualValues::zeros(&s, self.cuts.len()),
                    objective: f64::INFINITY,
                    farkas: Some(DualValues::from_rows(&s, &ray)),
                    iterations: sol.iterations,
                })
            }
            other => Err(MasterError::Lp(other)),
        }
    }

    /// Optimum of the unstabilized master with some row families removed.
    pub fn solve_without(&self, drop: RowDrop) -> Result<f64, MasterError> {
        let lp = self.build_lp(0.0, drop);
        let sol = solve_lp(&lp, self.lp_iteration_limit);
        if sol.status != LpStatus::Optimal {
            return Err(MasterError::Lp(sol.status));
        }
        Ok(sol.objective)
    }

    /// `b^T y` plus the best box contribution of the direct columns. With
    /// exact duals this equals the master optimum.
    pub fn dual_objective(&self, duals: &DualValues) -> f64 {
        let s = &*self.structure;
        let y = self.flat(duals);
        let mut value: f64 = self.rhs().iter().zip(&y).map(|(b, y)| b * y).sum();
        for &v in &s.master_vars {
            let mut d = s.costs[v];
            for (r, &c) in s.coupling.iter().enumerate() {
                if let Some(a) = s.problem.constraints[c].coeffs.get(&v) {
                    d -= y[r] * rat_to_f64(a);
                }
            }
            if d.abs() <= 1e-12 {
                continue;
            }
            let x = if d > 0.0 { self.lower[v] } else { self.upper[v] };
            value += d * x;
        }
        value
    }

    /// `x = sum_p lambda_p x_p`, reading linking variables from their first
    /// block and checking that the other copies agree.
    pub fn extract_original_solution(&self, sol: &RmpSolution) -> Result<OriginalSolution, MasterError> {
        let s = &*self.structure;
        let n = s.problem.num_vars();
        let mut copies: BTreeMap<(VarId, BlockId), f64> = BTreeMap::new();
        for (col, &l) in self.columns.iter().zip(&sol.lambda) {
            if l == 0.0 {
                continue;
            }
            for (&v, &x) in s.block_vars[col.block].iter().zip(&col.values) {
                *copies.entry((v, col.block)).or_insert(0.0) += l * x;
            }
        }
        let mut x = vec![0.0; n];
        for (t, &v) in s.master_vars.iter().enumerate() {
            x[v] = sol.master_values[t];
        }
        for v in 0..n {
            let blocks = &s.dec.var_blocks[v];
            let Some(&owner) = blocks.first() else { continue };
            x[v] = copies.get(&(v, owner)).copied().unwrap_or(0.0);
            for &b in &blocks[1..] {
                let other = copies.get(&(v, b)).copied().unwrap_or(0.0);
                let gap = (other - x[v]).abs();
                if gap > FEAS_TOL {
                    return Err(MasterError::CopyMismatch { var: v, gap });
                }
            }
        }
        let integral = s
            .problem
            .variables
            .iter()
            .zip(&x)
            .all(|(var, &val)| !var.kind.is_integral() || (val - val.round()).abs() <= FEAS_TOL);
        Ok(OriginalSolution { x, integral })
    }
}

/// Valid lower bound on the node's master relaxation from a dual objective
/// and one pricing bound per block (minimisation sense).
pub fn lagrangian_bound(rmp_objective: f64, block_bounds: &[Option<f64>]) -> Result<f64, MasterError> {
    let mut bound = rmp_objective;
    for (i, b) in block_bounds.iter().enumerate() {
        match b {
            Some(v) => bound += v.min(0.0),
            None => return Err(MasterError::MissingBound(i + 1)),
        }
    }
    Ok(bound)
}
