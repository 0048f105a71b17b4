//! The original program, its block decomposition and structure analysis.
//!
//! Objectives are stored in minimisation sense. A maximisation input is
//! negated when variables are added and re-negated by
//! [`MipProblem::report_objective`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::lp::{LinearProgram, Sense};

pub type Rat = Rational64;
pub type VarId = usize;
pub type ConsId = usize;
pub type BlockId = usize;

pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn int(v: i64) -> Rat {
    Rat::from_integer(v)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("constraint {0} references unknown variable {1}")]
    UnknownVariable(ConsId, VarId),
    #[error("variable {0}: lower bound exceeds upper bound")]
    EmptyDomain(String),
    #[error("variable {0}: binary bounds must lie within [0, 1]")]
    BinaryBounds(String),
    #[error("block assignment covers {got} constraints, problem has {expected}")]
    UnknownConstraint { expected: usize, got: usize },
    #[error("constraint {cons} assigned to block {block} but k = {k}")]
    BlockOutOfRange { cons: ConsId, block: BlockId, k: usize },
    #[error("decomposition needs at least one block")]
    NoBlocks,
    #[error("variable {0} is not a linking variable")]
    NotLinking(String),
    #[error("integer linking variable {0} has an infinite bound")]
    UnboundedInteger(String),
    #[error("duplicate variable name {0}")]
    DuplicateName(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjSense {
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    /// `None` is an infinite bound.
    pub lower: Option<Rat>,
    pub upper: Option<Rat>,
    pub kind: VarKind,
    /// Minimisation-sense cost.
    pub cost: Rat,
}

impl Variable {
    pub fn lower_f64(&self) -> f64 {
        self.lower.as_ref().map_or(f64::NEG_INFINITY, rat_to_f64)
    }

    pub fn upper_f64(&self) -> f64 {
        self.upper.as_ref().map_or(f64::INFINITY, rat_to_f64)
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_some() && self.upper.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: BTreeMap<VarId, Rat>,
    pub sense: Sense,
    pub rhs: Rat,
}

impl Constraint {
    pub fn activity(&self, x: &[Rat]) -> Rat {
        self.coeffs.iter().fold(Rat::zero(), |acc, (&v, a)| acc + *a * x[v])
    }

    pub fn is_satisfied(&self, x: &[Rat]) -> bool {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => act <= self.rhs,
            Sense::Ge => act >= self.rhs,
            Sense::Eq => act == self.rhs,
        }
    }

    pub fn violation_f64(&self, x: &[f64]) -> f64 {
        let act: f64 = self.coeffs.iter().map(|(&v, a)| rat_to_f64(a) * x[v]).sum();
        let rhs = rat_to_f64(&self.rhs);
        match self.sense {
            Sense::Le => (act - rhs).max(0.0),
            Sense::Ge => (rhs - act).max(0.0),
            Sense::Eq => (act - rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipProblem {
    pub original_sense: ObjSense,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Minimisation-sense constant.
    pub objective_offset: Rat,
}

impl MipProblem {
    pub fn new(sense: ObjSense) -> Self {
        MipProblem {
            original_sense: sense,
            variables: Vec::new(),
            constraints: Vec::new(),
            objective_offset: Rat::zero(),
        }
    }

    /// Adds a variable; `cost` is given in the problem's original sense.
    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        lower: Option<Rat>,
        upper: Option<Rat>,
        kind: VarKind,
        cost: Rat,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        if let (Some(l), Some(u)) = (&lower, &upper) {
            if l > u {
                return Err(ModelError::EmptyDomain(name));
            }
        }
        if kind == VarKind::Binary {
            let ok_l = lower.is_some_and(|l| l >= Rat::zero());
            let ok_u = upper.is_some_and(|u| u <= int(1));
            if !ok_l || !ok_u {
                return Err(ModelError::BinaryBounds(name));
            }
        }
        let id = self.variables.len();
        let cost = match self.original_sense {
            ObjSense::Min => cost,
            ObjSense::Max => -cost,
        };
        self.variables.push(Variable { id, name, lower, upper, kind, cost });
        Ok(id)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: i64) -> VarId {
        self.add_variable(name, Some(int(0)), Some(int(1)), VarKind::Binary, int(cost))
            .expect("binary bounds are valid")
    }

    pub fn add_constraint(
        &mut self,
        coeffs: impl IntoIterator<Item = (VarId, Rat)>,
        sense: Sense,
        rhs: Rat,
    ) -> Result<ConsId, ModelError> {
        let id = self.constraints.len();
        let mut map = BTreeMap::new();
        for (v, a) in coeffs {
            if v >= self.variables.len() {
                return Err(ModelError::UnknownVariable(id, v));
            }
            *map.entry(v).or_insert_with(Rat::zero) += a;
        }
        map.retain(|_, a| !a.is_zero());
        self.constraints.push(Constraint { coeffs: map, sense, rhs });
        Ok(id)
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Internal (minimisation) objective of an exact point.
    pub fn objective(&self, x: &[Rat]) -> Rat {
        self.variables
            .iter()
            .fold(self.objective_offset, |acc, v| acc + v.cost * x[v.id])
    }

    pub fn objective_f64(&self, x: &[f64]) -> f64 {
        rat_to_f64(&self.objective_offset)
            + self.variables.iter().map(|v| rat_to_f64(&v.cost) * x[v.id]).sum::<f64>()
    }

    /// Converts an internal objective value to the original sense.
    pub fn report_objective(&self, internal: f64) -> f64 {
        match self.original_sense {
            ObjSense::Min => internal,
            ObjSense::Max => -internal,
        }
    }

    pub fn report_objective_exact(&self, internal: Rat) -> Rat {
        match self.original_sense {
            ObjSense::Min => internal,
            ObjSense::Max => -internal,
        }
    }

    pub fn is_feasible(&self, x: &[Rat]) -> bool {
        self.variables.iter().all(|v| {
            let val = x[v.id];
            v.lower.is_none_or(|l| val >= l)
                && v.upper.is_none_or(|u| val <= u)
                && (!v.kind.is_integral() || val.is_integer())
        }) && self.constraints.iter().all(|c| c.is_satisfied(x))
    }

    /// Feasibility of a floating point, with bound, row and integrality tolerance `tol`.
    pub fn is_feasible_f64(&self, x: &[f64], tol: f64) -> bool {
        self.variables.iter().all(|v| {
            let val = x[v.id];
            val >= v.lower_f64() - tol
                && val <= v.upper_f64() + tol
                && (!v.kind.is_integral() || (val - val.round()).abs() <= tol)
        }) && self.constraints.iter().all(|c| c.violation_f64(x) <= tol)
    }

    /// LP relaxation with columns in variable order.
    pub fn lp_relaxation(&self) -> LinearProgram {
        let mut lp = LinearProgram::new();
        for v in &self.variables {
            lp.add_column(rat_to_f64(&v.cost), v.lower_f64(), v.upper_f64());
        }
        for c in &self.constraints {
            lp.add_row(
                c.coeffs.iter().map(|(&v, a)| (v, rat_to_f64(a))).collect(),
                c.sense,
                rat_to_f64(&c.rhs),
            );
        }
        lp
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut names = BTreeSet::new();
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                return Err(ModelError::DuplicateName(v.name.clone()));
            }
        }
        for (id, c) in self.constraints.iter().enumerate() {
            for &v in c.coeffs.keys() {
                if v >= self.variables.len() {
                    return Err(ModelError::UnknownVariable(id, v));
                }
            }
        }
        Ok(())
    }
}

/// Assignment of constraints to the coupling set (block 0) and blocks `1..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub k: usize,
    pub block_of: Vec<BlockId>,
    /// Blocks in which each variable has a nonzero coefficient.
    pub native_blocks: Vec<Vec<BlockId>>,
    /// Native blocks plus registered intermediate links, sorted.
    pub var_blocks: Vec<Vec<BlockId>>,
    pub extra_links: BTreeSet<(VarId, BlockId)>,
    /// `X_ij` for `i < j`: binary variables shared by both blocks. Empty sets are not stored.
    pub linking_sets: BTreeMap<(BlockId, BlockId), Vec<VarId>>,
    /// Variables that appear in no block (coupling rows only, or nowhere).
    pub master_only: Vec<bool>,
}

impl Decomposition {
    pub fn block_constraints(&self, block: BlockId) -> Vec<ConsId> {
        (0..self.block_of.len()).filter(|&c| self.block_of[c] == block).collect()
    }

    pub fn coupling_constraints(&self) -> Vec<ConsId> {
        self.block_constraints(0)
    }

    /// Variables carried by a block's columns, ascending.
    pub fn block_vars(&self, block: BlockId) -> Vec<VarId> {
        (0..self.var_blocks.len())
            .filter(|&v| self.var_blocks[v].binary_search(&block).is_ok())
            .collect()
    }

    pub fn is_linking(&self, v: VarId) -> bool {
        self.var_blocks[v].len() >= 2
    }

    /// `X_ij` regardless of argument order.
    pub fn linking_set(&self, i: BlockId, j: BlockId) -> &[VarId] {
        let key = if i < j { (i, j) } else { (j, i) };
        self.linking_sets.get(&key).map_or(&[], |v| v.as_slice())
    }

    /// Blocks sharing at least one binary variable with `block`.
    pub fn neighbours(&self, block: BlockId) -> Vec<BlockId> {
        (1..=self.k)
            .filter(|&j| j != block && !self.linking_set(block, j).is_empty())
            .collect()
    }

    /// Fraction of a variable's cost carried by a block's columns: native
    /// blocks share it evenly, intermediate links carry none.
    pub fn cost_share(&self, v: VarId, block: BlockId) -> f64 {
        let native = &self.native_blocks[v];
        if native.contains(&block) {
            1.0 / native.len() as f64
        } else {
            0.0
        }
    }

    /// Block whose copy of `v` stands for the variable in coupling rows and
    /// in the recovered original solution.
    pub fn owner_block(&self, v: VarId) -> Option<BlockId> {
        self.var_blocks[v].first().copied()
    }

    fn rebuild(&mut self, problem: &MipProblem) {
        let n = problem.num_vars();
        let mut var_blocks = self.native_blocks.clone();
        for &(v, b) in &self.extra_links {
            if !var_blocks[v].contains(&b) {
                var_blocks[v].push(b);
            }
        }
        for vb in &mut var_blocks {
            vb.sort_unstable();
        }
        let mut linking_sets: BTreeMap<(BlockId, BlockId), Vec<VarId>> = BTreeMap::new();
        for v in 0..n {
            if problem.variables[v].kind != VarKind::Binary || var_blocks[v].len() < 2 {
                continue;
            }
            let bl = &var_blocks[v];
            for a in 0..bl.len() {
                for b in a + 1..bl.len() {
                    linking_sets.entry((bl[a], bl[b])).or_default().push(v);
                }
            }
        }
        self.master_only = var_blocks.iter().map(|b| b.is_empty()).collect();
        self.var_blocks = var_blocks;
        self.linking_sets = linking_sets;
    }
}

/// Derives variable/block membership and the linking sets `X_ij`.
pub fn derive_block_membership(
    problem: &MipProblem,
    block_of: &[BlockId],
    k: usize,
) -> Result<Decomposition, ModelError> {
    if k < 1 {
        return Err(ModelError::NoBlocks);
    }
    if block_of.len() != problem.constraints.len() {
        return Err(ModelError::UnknownConstraint {
            expected: problem.constraints.len(),
            got: block_of.len(),
        });
    }
    let mut native: Vec<BTreeSet<BlockId>> = vec![BTreeSet::new(); problem.num_vars()];
    for (c, (&b, cons)) in block_of.iter().zip(&problem.constraints).enumerate() {
        if b > k {
            return Err(ModelError::BlockOutOfRange { cons: c, block: b, k });
        }
        if b == 0 {
            continue;
        }
        for &v in cons.coeffs.keys() {
            native[v].insert(b);
        }
    }
    let mut dec = Decomposition {
        k,
        block_of: block_of.to_vec(),
        native_blocks: native.into_iter().map(|s| s.into_iter().collect()).collect(),
        var_blocks: Vec::new(),
        extra_links: BTreeSet::new(),
        linking_sets: BTreeMap::new(),
        master_only: Vec::new(),
    };
    dec.rebuild(problem);
    Ok(dec)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainViolation {
    pub variable: VarId,
    /// Consecutive occurrences of the variable with a gap between them.
    pub blocks: (BlockId, BlockId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainReport {
    pub no_coupling: bool,
    pub all_linking_binary: bool,
    /// Every linking variable occupies a contiguous run of blocks.
    pub chain_ok: bool,
    /// Linking sets only between neighbouring blocks.
    pub strict_chain: bool,
    pub bounded_blocks: bool,
    pub violations: Vec<ChainViolation>,
}

impl ChainReport {
    pub fn integral_root_guaranteed(&self) -> bool {
        self.no_coupling && self.all_linking_binary && self.chain_ok && self.bounded_blocks
    }
}

impl fmt::Display for ChainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "no_coupling={}", self.no_coupling)?;
        writeln!(f, "all_linking_binary={}", self.all_linking_binary)?;
        writeln!(f, "chain_ok={}", self.chain_ok)?;
        writeln!(f, "strict_chain={}", self.strict_chain)?;
        writeln!(f, "bounded_blocks={}", self.bounded_blocks)?;
        for v in &self.violations {
            writeln!(f, "violation var={} blocks={},{}", v.variable, v.blocks.0, v.blocks.1)?;
        }
        Ok(())
    }
}

/// Reports which of the four integrality conditions a decomposition meets.
pub fn check_extended_chain(dec: &Decomposition, problem: &MipProblem) -> ChainReport {
    let no_coupling = dec.block_of.iter().all(|&b| b != 0);
    let mut all_linking_binary = true;
    let mut violations = Vec::new();
    let mut bounded_blocks = true;
    for v in 0..problem.num_vars() {
        let blocks = &dec.var_blocks[v];
        if !blocks.is_empty() && !problem.variables[v].is_bounded() {
            bounded_blocks = false;
        }
        if blocks.len() < 2 {
            continue;
        }
        if problem.variables[v].kind != VarKind::Binary {
            all_linking_binary = false;
        }
        for w in blocks.windows(2) {
            if w[1] - w[0] > 1 {
                violations.push(ChainViolation { variable: v, blocks: (w[0], w[1]) });
            }
        }
    }
    let strict_chain = dec.linking_sets.keys().all(|&(i, j)| j - i < 2)
        && (0..problem.num_vars()).all(|v| {
            let b = &dec.var_blocks[v];
            b.len() < 2 || b[b.len() - 1] - b[0] < 2
        });
    ChainReport {
        no_coupling,
        all_linking_binary,
        chain_ok: violations.is_empty(),
        strict_chain,
        bounded_blocks,
        violations,
    }
}

/// Registers `v` with every block strictly between its first and last block.
pub fn add_missing_intermediate_links(
    mut dec: Decomposition,
    problem: &MipProblem,
    v: VarId,
) -> Result<Decomposition, ModelError> {
    if !dec.is_linking(v) {
        return Err(ModelError::NotLinking(problem.variables[v].name.clone()));
    }
    let blocks = dec.var_blocks[v].clone();
    let (first, last) = (blocks[0], blocks[blocks.len() - 1]);
    for b in first + 1..last {
        if !blocks.contains(&b) {
            dec.extra_links.insert((v, b));
        }
    }
    dec.rebuild(problem);
    Ok(dec)
}

/// Applies [`add_missing_intermediate_links`] to every variable with a gap.
pub fn repair_chain(dec: Decomposition, problem: &MipProblem) -> Decomposition {
    let gaps: BTreeSet<VarId> = check_extended_chain(&dec, problem)
        .violations
        .iter()
        .map(|w| w.variable)
        .collect();
    gaps.into_iter().fold(dec, |d, v| {
        add_missing_intermediate_links(d, problem, v).expect("gap variables are linking")
    })
}

/// How an original variable is represented after binarisation.
#[derive(Debug, Clone, PartialEq)]
pub enum VarMapping {
    Kept(VarId),
    /// `x = offset + sum weight * z`.
    Binarized { offset: Rat, bits: Vec<(VarId, i64)> },
    Fixed(Rat),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Binarization {
    pub mapping: Vec<VarMapping>,
}

impl Binarization {
    pub fn translate(&self, x: &[Rat]) -> Vec<Rat> {
        self.mapping
            .iter()
            .map(|m| match m {
                VarMapping::Kept(id) => x[*id],
                VarMapping::Fixed(v) => *v,
                VarMapping::Binarized { offset, bits } => {
                    bits.iter().fold(*offset, |acc, &(z, w)| acc + x[z] * int(w))
                }
            })
            .collect()
    }

    pub fn translate_f64(&self, x: &[f64]) -> Vec<f64> {
        self.mapping
            .iter()
            .map(|m| match m {
                VarMapping::Kept(id) => x[*id],
                VarMapping::Fixed(v) => rat_to_f64(v),
                VarMapping::Binarized { offset, bits } => {
                    rat_to_f64(offset) + bits.iter().map(|&(z, w)| x[z] * w as f64).sum::<f64>()
                }
            })
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, m)| *m == VarMapping::Kept(i))
    }
}

/// Number of bits `m = floor(log2(range)) + 1` for a positive integer range.
pub fn binary_width(range: i64) -> u32 {
    debug_assert!(range > 0);
    64 - (range as u64).leading_zeros()
}

/// Replaces each integer linking variable over `[LB, UB]` by binaries with
/// `x = LB + sum 2^t z_t`, keeping the row `sum 2^t z_t <= UB - LB`.
pub fn binarize_linking_integers(
    problem: &MipProblem,
    dec: &Decomposition,
) -> Result<(MipProblem, Decomposition, Binarization), ModelError> {
    let mut out = MipProblem::new(problem.original_sense);
    out.objective_offset = problem.objective_offset;
    let mut mapping = Vec::with_capacity(problem.num_vars());
    type Row = (Vec<(VarId, Rat)>, Rat, BlockId);
    let mut extra_rows: Vec<Row> = Vec::new();
    // Substitutions: var -> (constant, [(new var, weight)])
    for v in &problem.variables {
        let targeted = v.kind == VarKind::Integer && dec.var_blocks[v.id].len() >= 2;
        if !targeted {
            let id = out.variables.len();
            out.variables.push(Variable { id, ..v.clone() });
            mapping.push(VarMapping::Kept(id));
            continue;
        }
        let (Some(l), Some(u)) = (v.lower, v.upper) else {
            return Err(ModelError::UnboundedInteger(v.name.clone()));
        };
        let lb = l.ceil().to_integer();
        let ub = u.floor().to_integer();
        if lb > ub {
            return Err(ModelError::EmptyDomain(v.name.clone()));
        }
        out.objective_offset += v.cost * int(lb);
        if lb == ub {
            mapping.push(VarMapping::Fixed(int(lb)));
            continue;
        }
        let m = binary_width(ub - lb);
        let mut bits = Vec::with_capacity(m as usize);
        for t in 0..m {
            let id = out.variables.len();
            let w = 1i64 << t;
            out.variables.push(Variable {
                id,
                name: format!("{}#b{}", v.name, t),
                lower: Some(int(0)),
                upper: Some(int(1)),
                kind: VarKind::Binary,
                cost: v.cost * int(w),
            });
            bits.push((id, w));
        }
        let row = bits.iter().map(|&(z, w)| (z, int(w))).collect();
        extra_rows.push((row, int(ub - lb), dec.var_blocks[v.id][0]));
        mapping.push(VarMapping::Binarized { offset: int(lb), bits });
    }

    let mut block_of = Vec::with_capacity(problem.constraints.len() + extra_rows.len());
    for (c, cons) in problem.constraints.iter().enumerate() {
        let mut rhs = cons.rhs;
        let mut coeffs: Vec<(VarId, Rat)> = Vec::new();
        for (&v, &a) in &cons.coeffs {
            match &mapping[v] {
                VarMapping::Kept(id) => coeffs.push((*id, a)),
                VarMapping::Fixed(val) => rhs -= a * *val,
                VarMapping::Binarized { offset, bits } => {
                    rhs -= a * *offset;
                    coeffs.extend(bits.iter().map(|&(z, w)| (z, a * int(w))));
                }
            }
        }
        out.add_constraint(coeffs, cons.sense, rhs)?;
        block_of.push(dec.block_of[c]);
    }
    for (row, rhs, block) in extra_rows {
        out.add_constraint(row, Sense::Le, rhs)?;
        block_of.push(block);
    }

    let mut new_dec = derive_block_membership(&out, &block_of, dec.k)?;
    for &(v, b) in &dec.extra_links {
        match &mapping[v] {
            VarMapping::Kept(id) => {
                new_dec.extra_links.insert((*id, b));
            }
            VarMapping::Binarized { bits, .. } => {
                for &(z, _) in bits {
                    new_dec.extra_links.insert((z, b));
                }
            }
            VarMapping::Fixed(_) => {}
        }
    }
    new_dec.rebuild(&out);
    Ok((out, new_dec, Binarization { mapping }))
}

/// The small two-block program used throughout the docs and tests:
/// `max 3x1 + 2x2 + 2x3 + 3x4` s.t. `2x1 + x2 + x3 <= 2`, `x2 + x3 + x4 <= 2`.
pub fn worked_example() -> (MipProblem, Decomposition) {
    let mut p = MipProblem::new(ObjSense::Max);
    let x1 = p.add_binary("x1", 3);
    let x2 = p.add_binary("x2", 2);
    let x3 = p.add_binary("x3", 2);
    let x4 = p.add_binary("x4", 3);
    p.add_constraint([(x1, int(2)), (x2, int(1)), (x3, int(1))], Sense::Le, int(2))
        .unwrap();
    p.add_constraint([(x2, int(1)), (x3, int(1)), (x4, int(1))], Sense::Le, int(2))
        .unwrap();
    let dec = derive_block_membership(&p, &[1, 2], 2).unwrap();
    (p, dec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_block_gap() -> (MipProblem, Decomposition) {
        // v shared by blocks 1 and 3 only.
        let mut p = MipProblem::new(ObjSense::Min);
        let a = p.add_binary("a", -1);
        let b = p.add_binary("b", -1);
        let c = p.add_binary("c", -1);
        let v = p.add_binary("v", -2);
        p.add_constraint([(a, int(1)), (v, int(1))], Sense::Le, int(1)).unwrap();
        p.add_constraint([(b, int(1))], Sense::Le, int(1)).unwrap();
        p.add_constraint([(c, int(1)), (v, int(1))], Sense::Le, int(1)).unwrap();
        let dec = derive_block_membership(&p, &[1, 2, 3], 3).unwrap();
        (p, dec)
    }

    #[test]
    fn worked_example_linking_set() {
        let (p, dec) = worked_example();
        assert_eq!(dec.linking_set(1, 2), &[1, 2]);
        assert_eq!(dec.linking_set(2, 1), &[1, 2]);
        assert_eq!(p.report_objective(-6.0), 6.0);
        assert_eq!(p.variables[0].cost, int(-3));
    }

    #[test]
    fn single_block_has_no_linking() {
        let (p, _) = worked_example();
        let dec = derive_block_membership(&p, &[1, 1], 1).unwrap();
        assert!(dec.linking_sets.is_empty());
    }

    #[test]
    fn gap_variable_links_blocks_one_and_three() {
        let (_, dec) = three_block_gap();
        assert_eq!(dec.linking_set(1, 3), &[3]);
        assert!(dec.linking_set(1, 2).is_empty());
        assert!(dec.linking_set(2, 3).is_empty());
    }

    #[test]
    fn membership_errors() {
        let (p, _) = worked_example();
        assert!(matches!(derive_block_membership(&p, &[1], 2), Err(ModelError::UnknownConstraint { .. })));
        assert!(matches!(derive_block_membership(&p, &[1, 3], 2), Err(ModelError::BlockOutOfRange { .. })));
        assert_eq!(derive_block_membership(&p, &[1, 1], 0), Err(ModelError::NoBlocks));
    }

    #[test]
    fn master_only_variables_flagged() {
        let mut p = MipProblem::new(ObjSense::Min);
        let a = p.add_binary("a", 1);
        let b = p.add_binary("b", 1);
        p.add_constraint([(a, int(1)), (b, int(1))], Sense::Ge, int(1)).unwrap();
        p.add_constraint([(a, int(1))], Sense::Le, int(1)).unwrap();
        let dec = derive_block_membership(&p, &[0, 1], 1).unwrap();
        assert_eq!(dec.master_only, vec![false, true]);
        let rep = check_extended_chain(&dec, &p);
        assert!(!rep.no_coupling);
    }

    #[test]
    fn chain_check_and_repair() {
        let (p, dec) = worked_example();
        let rep = check_extended_chain(&dec, &p);
        assert!(rep.integral_root_guaranteed());
        assert!(rep.strict_chain);

        let (p, dec) = three_block_gap();
        let rep = check_extended_chain(&dec, &p);
        assert!(!rep.chain_ok);
        assert_eq!(rep.violations, vec![ChainViolation { variable: 3, blocks: (1, 3) }]);

        let fixed = add_missing_intermediate_links(dec.clone(), &p, 3).unwrap();
        assert!(fixed.extra_links.contains(&(3, 2)));
        let rep = check_extended_chain(&fixed, &p);
        assert!(rep.chain_ok);
        assert!(!rep.strict_chain);
        assert_eq!(fixed.cost_share(3, 2), 0.0);
        assert_eq!(fixed.cost_share(3, 1), 0.5);
        assert_eq!(fixed.linking_set(2, 3), &[3]);

        assert!(matches!(add_missing_intermediate_links(dec, &p, 0), Err(ModelError::NotLinking(_))));
    }

    #[test]
    fn repair_spans_several_blocks() {
        let mut p = MipProblem::new(ObjSense::Min);
        let v = p.add_binary("v", 1);
        let others: Vec<_> = (0..4).map(|i| p.add_binary(format!("o{i}"), 1)).collect();
        p.add_constraint([(v, int(1)), (others[0], int(1))], Sense::Le, int(1)).unwrap();
        p.add_constraint([(others[1], int(1))], Sense::Le, int(1)).unwrap();
        p.add_constraint([(others[2], int(1))], Sense::Le, int(1)).unwrap();
        p.add_constraint([(v, int(1)), (others[3], int(1))], Sense::Le, int(1)).unwrap();
        let dec = derive_block_membership(&p, &[1, 2, 3, 4], 4).unwrap();
        let fixed = add_missing_intermediate_links(dec, &p, v).unwrap();
        assert_eq!(fixed.extra_links, BTreeSet::from([(v, 2), (v, 3)]));

        // consecutive blocks: nothing to add
        let (p, dec) = worked_example();
        let same = add_missing_intermediate_links(dec.clone(), &p, 1).unwrap();
        assert!(same.extra_links.is_empty());
        assert_eq!(same, dec);
    }

    #[test]
    fn binary_width_values() {
        assert_eq!(binary_width(5), 3);
        assert_eq!(binary_width(1), 1);
        assert_eq!(binary_width(4), 3);
        assert_eq!(binary_width(7), 3);
        assert_eq!(binary_width(8), 4);
    }

    fn integer_link(lb: i64, ub: i64) -> (MipProblem, Decomposition) {
        let mut p = MipProblem::new(ObjSense::Min);
        let x = p
            .add_variable("x", Some(int(lb)), Some(int(ub)), VarKind::Integer, int(-1))
            .unwrap();
        let a = p.add_binary("a", 1);
        p.add_constraint([(x, int(1)), (a, int(1))], Sense::Le, int(4)).unwrap();
        p.add_constraint([(x, int(2))], Sense::Le, int(9)).unwrap();
        let dec = derive_block_membership(&p, &[1, 2], 2).unwrap();
        (p, dec)
    }

    #[test]
    fn binarize_zero_to_five() {
        let (p, dec) = integer_link(0, 5);
        let (q, qd, map) = binarize_linking_integers(&p, &dec).unwrap();
        let VarMapping::Binarized { bits, .. } = &map.mapping[0] else { panic!() };
        assert_eq!(bits.len(), 3);
        let bound_row = q.constraints.last().unwrap();
        assert_eq!(bound_row.rhs, int(5));
        assert_eq!(bound_row.coeffs.values().copied().collect::<Vec<_>>(), vec![int(1), int(2), int(4)]);
        assert!(check_extended_chain(&qd, &q).all_linking_binary);
    }

    #[test]
    fn binarize_fixed_and_unit_range() {
        let (p, dec) = integer_link(2, 2);
        let (q, _, map) = binarize_linking_integers(&p, &dec).unwrap();
        assert_eq!(map.mapping[0], VarMapping::Fixed(int(2)));
        assert_eq!(q.num_vars(), 1);
        assert_eq!(q.objective_offset, int(-2));

        let (p, dec) = integer_link(-1, 0);
        let (_, _, map) = binarize_linking_integers(&p, &dec).unwrap();
        let VarMapping::Binarized { offset, bits } = &map.mapping[0] else { panic!() };
        assert_eq!(*offset, int(-1));
        assert_eq!(bits.len(), 1);
    }

    #[test]
    fn binarize_rejects_unbounded() {
        let mut p = MipProblem::new(ObjSense::Min);
        let x = p.add_variable("x", Some(int(0)), None, VarKind::Integer, int(1)).unwrap();
        p.add_constraint([(x, int(1))], Sense::Le, int(4)).unwrap();
        p.add_constraint([(x, int(1))], Sense::Ge, int(1)).unwrap();
        let dec = derive_block_membership(&p, &[1, 2], 2).unwrap();
        assert!(matches!(binarize_linking_integers(&p, &dec), Err(ModelError::UnboundedInteger(_))));
    }

    #[test]
    fn invalid_variables_rejected() {
        let mut p = MipProblem::new(ObjSense::Min);
        assert!(p.add_variable("b", Some(int(0)), Some(int(2)), VarKind::Binary, int(0)).is_err());
        assert!(p.add_variable("c", Some(int(3)), Some(int(2)), VarKind::Integer, int(0)).is_err());
        assert!(p.add_constraint([(7, int(1))], Sense::Le, int(0)).is_err());
    }
}
