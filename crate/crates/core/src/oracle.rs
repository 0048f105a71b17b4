//! Brute-force reference machinery for tests: exhaustive MIP enumeration,
//! direct evaluation of consistency-cut violations, and determinant
//! sampling for total unimodularity.

use std::collections::BTreeSet;

use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

use crate::cuts::Pattern;
use crate::lp::Sense;
use crate::master::Column;
use crate::model::{int, BlockId, MipProblem, Rat, VarKind};

pub const MAX_SPACE: u128 = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("variable {0} is continuous")]
    Continuous(String),
    #[error("variable {0} has an infinite bound")]
    Unbounded(String),
    #[error("search space of {0} points exceeds the enumeration limit")]
    TooLarge(u128),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub status: OracleStatus,
    /// Minimisation-sense optimum including the objective offset.
    pub optimum: Option<Rat>,
    pub assignment: Option<Vec<Rat>>,
    pub feasible_count: u64,
}

struct IntRow {
    coeffs: Vec<(usize, i128)>,
    sense: Sense,
    rhs: i128,
}

fn lcm_denoms<'a>(vals: impl Iterator<Item = &'a Rat>) -> i128 {
    vals.fold(1i128, |acc, r| acc.lcm(&(*r.denom() as i128)))
}

fn scaled(r: &Rat, scale: i128) -> i128 {
    *r.numer() as i128 * (scale / *r.denom() as i128)
}

/// Exact optimum by enumerating every integer point in the variable box.
/// Rows are scaled to integers, so all arithmetic is exact.
pub fn brute_solve(problem: &MipProblem) -> Result<OracleResult, OracleError> {
    let n = problem.num_vars();
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    let mut space: u128 = 1;
    for v in &problem.variables {
        if v.kind == VarKind::Continuous {
            return Err(OracleError::Continuous(v.name.clone()));
        }
        let (Some(l), Some(u)) = (v.lower, v.upper) else {
            return Err(OracleError::Unbounded(v.name.clone()));
        };
        let l = l.ceil().to_integer() as i128;
        let u = u.floor().to_integer() as i128;
        lo.push(l);
        hi.push(u);
        let size = (u - l + 1).max(0) as u128;
        space = space.saturating_mul(size.max(1));
        if space > MAX_SPACE {
            return Err(OracleError::TooLarge(space));
        }
        if size == 0 {
            return Ok(OracleResult { status: OracleStatus::Infeasible, optimum: None, assignment: None, feasible_count: 0 });
        }
    }
    let rows: Vec<IntRow> = problem
        .constraints
        .iter()
        .map(|c| {
            let scale = lcm_denoms(c.coeffs.values().chain(std::iter::once(&c.rhs)));
            IntRow {
                coeffs: c.coeffs.iter().map(|(&v, a)| (v, scaled(a, scale))).collect(),
                sense: c.sense,
                rhs: scaled(&c.rhs, scale),
            }
        })
        .collect();
    let cscale = lcm_denoms(problem.variables.iter().map(|v| &v.cost));
    let costs: Vec<i128> = problem.variables.iter().map(|v| scaled(&v.cost, cscale)).collect();

    // Per row, per depth: min/max activity reachable from variables >= depth.
    let mut rest_min = vec![vec![0i128; n + 1]; rows.len()];
    let mut rest_max = vec![vec![0i128; n + 1]; rows.len()];
    let mut by_var: Vec<Vec<(usize, i128)>> = vec![Vec::new(); n];
    for (r, row) in rows.iter().enumerate() {
        for &(v, a) in &row.coeffs {
            by_var[v].push((r, a));
        }
        for d in (0..n).rev() {
            let a = row.coeffs.iter().find(|(v, _)| *v == d).map_or(0, |x| x.1);
            let (p, q) = (a * lo[d], a * hi[d]);
            rest_min[r][d] = rest_min[r][d + 1] + p.min(q);
            rest_max[r][d] = rest_max[r][d + 1] + p.max(q);
        }
    }

    let mut search = Search {
        lo: &lo,
        hi: &hi,
        rows: &rows,
        by_var: &by_var,
        rest_min: &rest_min,
        rest_max: &rest_max,
        costs: &costs,
        act: vec![0; rows.len()],
        x: lo.clone(),
        best: None,
        count: 0,
    };
    search.dfs(0, 0);
    let count = search.count;
    Ok(match search.best {
        None => OracleResult { status: OracleStatus::Infeasible, optimum: None, assignment: None, feasible_count: 0 },
        Some((val, x)) => {
            let optimum = Rat::new(val.to_i64().expect("objective fits in i64"), cscale as i64)
                + problem.objective_offset;
            OracleResult {
                status: OracleStatus::Optimal,
                optimum: Some(optimum),
                assignment: Some(x.into_iter().map(|v| int(v as i64)).collect()),
                feasible_count: count,
            }
        }
    })
}

struct Search<'a> {
    lo: &'a [i128],
    hi: &'a [i128],
    rows: &'a [IntRow],
    by_var: &'a [Vec<(usize, i128)>],
    rest_min: &'a [Vec<i128>],
    rest_max: &'a [Vec<i128>],
    costs: &'a [i128],
    act: Vec<i128>,
    x: Vec<i128>,
    best: Option<(i128, Vec<i128>)>,
    count: u64,
}

impl Search<'_> {
    fn viable(&self, depth: usize) -> bool {
        self.rows.iter().enumerate().all(|(r, row)| {
            let lo = self.act[r] + self.rest_min[r][depth];
            let hi = self.act[r] + self.rest_max[r][depth];
            match row.sense {
                Sense::Le => lo <= row.rhs,
                Sense::Ge => hi >= row.rhs,
                Sense::Eq => lo <= row.rhs && hi >= row.rhs,
            }
        })
    }

    fn dfs(&mut self, depth: usize, obj: i128) {
        if !self.viable(depth) {
            return;
        }
        if depth == self.x.len() {
            self.count += 1;
            if self.best.as_ref().is_none_or(|(b, _)| obj < *b) {
                self.best = Some((obj, self.x.clone()));
            }
            return;
        }
        for val in self.lo[depth]..=self.hi[depth] {
            self.x[depth] = val;
            for &(r, a) in &self.by_var[depth] {
                self.act[r] += a * val;
            }
            self.dfs(depth + 1, obj + self.costs[depth] * val);
            for &(r, a) in &self.by_var[depth] {
                self.act[r] -= a * val;
            }
        }
    }
}

/// A violated consistency equality found by direct evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveViolation {
    pub pattern: Pattern,
    pub weight_i: f64,
    pub weight_j: f64,
}

/// Evaluates both sides of every consistency equality whose pattern occurs
/// in a column with nonzero weight, summing over all columns directly.
pub fn naive_separate(
    lambda: &[f64],
    columns: &[Column],
    block_vars: &[Vec<usize>],
    linking_sets: &std::collections::BTreeMap<(BlockId, BlockId), Vec<usize>>,
    delta: f64,
) -> Vec<NaiveViolation> {
    let value_of = |col: &Column, v: usize| -> Option<f64> {
        block_vars[col.block].iter().position(|&w| w == v).map(|p| col.values[p])
    };
    let pattern_of = |col: &Column, vars: &[usize]| -> Option<Vec<(usize, bool)>> {
        vars.iter().map(|&v| value_of(col, v).map(|x| (v, x > 0.5))).collect()
    };
    let mut out = Vec::new();
    for (&(i, j), vars) in linking_sets {
        let mut seen: BTreeSet<Vec<(usize, bool)>> = BTreeSet::new();
        for (col, &l) in columns.iter().zip(lambda) {
            if l > crate::cuts::NONZERO && (col.block == i || col.block == j) {
                if let Some(p) = pattern_of(col, vars) {
                    seen.insert(p);
                }
            }
        }
        for bits in seen {
            let side = |b: BlockId| -> f64 {
                columns
                    .iter()
                    .zip(lambda)
                    .filter(|(c, _)| c.block == b && pattern_of(c, vars).as_ref() == Some(&bits))
                    .map(|(_, &l)| if l > crate::cuts::NONZERO { l } else { 0.0 })
                    .sum()
            };
            let (wi, wj) = (side(i), side(j));
            if (wi - wj).abs() > delta {
                out.push(NaiveViolation {
                    pattern: Pattern { pair: (i, j), bits: bits.clone() },
                    weight_i: wi,
                    weight_j: wj,
                });
            }
        }
    }
    out
}

/// Exact integer determinant (fraction-free Bareiss elimination).
pub fn determinant(m: &[Vec<i64>]) -> i128 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&r| !a[r][k].is_zero()) else {
                return 0;
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuSample {
    pub passed: bool,
    pub trials: usize,
    /// First sampled square submatrix with determinant outside {-1, 0, 1}.
    pub witness: Option<Vec<Vec<i64>>>,
}

/// Samples random square submatrices and checks their determinants.
pub fn tu_sample_check<R: Rng>(matrix: &[Vec<i64>], trials: usize, rng: &mut R) -> TuSample {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    let max = rows.min(cols);
    if max == 0 {
        return TuSample { passed: true, trials: 0, witness: None };
    }
    for t in 0..trials {
        let size = rng.gen_range(1..=max);
        let mut rs = sample(rng, rows, size).into_vec();
        let mut cs = sample(rng, cols, size).into_vec();
        rs.sort_unstable();
        cs.sort_unstable();
        let sub: Vec<Vec<i64>> = rs.iter().map(|&r| cs.iter().map(|&c| matrix[r][c]).collect()).collect();
        let d = determinant(&sub);
        if d.abs() > 1 {
            return TuSample { passed: false, trials: t + 1, witness: Some(sub) };
        }
    }
    TuSample { passed: true, trials, witness: None }
}
