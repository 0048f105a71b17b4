//! Consistency cuts: patterns on shared binaries, the weight table built
//! from a master solution, separation and installation.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::master::{BlockStructure, Column, RmpState};
use crate::model::{BlockId, VarId};

/// Weights at or below this are treated as zero.
pub const NONZERO: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CutError {
    #[error("blocks {0} and {1} share no binary variables")]
    EmptyLinkingSet(BlockId, BlockId),
    #[error("column of block {block} is not in pair ({i}, {j})")]
    NotInPair { block: BlockId, i: BlockId, j: BlockId },
    #[error("pattern does not cover the linking set of ({0}, {1})")]
    Incomplete(BlockId, BlockId),
    #[error("pattern already installed")]
    Duplicate,
}

/// Assignment of every variable in `X_ij`, sorted by variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    pub pair: (BlockId, BlockId),
    pub bits: Vec<(VarId, bool)>,
}

impl Pattern {
    /// Variables set to one.
    pub fn alpha(&self) -> Vec<VarId> {
        self.bits.iter().filter(|b| b.1).map(|b| b.0).collect()
    }

    /// Variables set to zero.
    pub fn beta(&self) -> Vec<VarId> {
        self.bits.iter().filter(|b| !b.1).map(|b| b.0).collect()
    }
}

/// Pattern of `col` on the variables it shares with `other`.
pub fn extract_pattern(s: &BlockStructure, col: &Column, other: BlockId) -> Result<Pattern, CutError> {
    let pair = (col.block.min(other), col.block.max(other));
    let vars = s.dec.linking_set(pair.0, pair.1);
    if vars.is_empty() || col.block == other {
        return Err(CutError::EmptyLinkingSet(pair.0, pair.1));
    }
    let bits = vars
        .iter()
        .map(|&v| (v, col.value(s, v).expect("linking var in block") > 0.5))
        .collect();
    Ok(Pattern { pair, bits })
}

/// Counters for the work done by [`compute_phi`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhiWork {
    pub pairs: usize,
    pub scanned: usize,
    pub nonzero: usize,
    pub lookups: usize,
}

/// Pattern bits mapped to (weight in the lower block, weight in the higher block).
pub type PairWeights = BTreeMap<Vec<(VarId, bool)>, (f64, f64)>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhiTable {
    pub pairs: BTreeMap<(BlockId, BlockId), PairWeights>,
    pub work: PhiWork,
}

impl PhiTable {
    pub fn get(&self, pair: (BlockId, BlockId), bits: &[(VarId, bool)]) -> Option<(f64, f64)> {
        self.pairs.get(&pair)?.get(bits).copied()
    }
}

/// Accumulates the weight of every nonzero column into the entry of its
/// pattern towards each neighbour.
pub fn compute_phi(lambda: &[f64], columns: &[Column]) -> PhiTable {
    let mut phi = PhiTable::default();
    for (col, &l) in columns.iter().zip(lambda) {
        phi.work.scanned += 1;
        if l <= NONZERO {
            continue;
        }
        phi.work.nonzero += 1;
        for (&j, bits) in &col.patterns {
            phi.work.lookups += 1;
            let i = col.block;
            let table = phi.pairs.entry((i.min(j), i.max(j))).or_default();
            let entry = table.entry(bits.clone()).or_insert((0.0, 0.0));
            if i < j {
                entry.0 += l;
            } else {
                entry.1 += l;
            }
        }
    }
    phi.work.pairs = phi.pairs.len();
    phi
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutCandidate {
    pub pattern: Pattern,
    pub weight_i: f64,
    pub weight_j: f64,
}

impl CutCandidate {
    pub fn violation(&self) -> f64 {
        (self.weight_i - self.weight_j).abs()
    }
}

/// Entries whose two weights differ by more than `delta`, skipping
/// patterns for which `installed` is true. Ordered by pair, then pattern.
pub fn separate(phi: &PhiTable, delta: f64, installed: impl Fn(&Pattern) -> bool) -> Vec<CutCandidate> {
    let mut out = Vec::new();
    for (&pair, table) in &phi.pairs {
        for (bits, &(vi, vj)) in table {
            if (vi - vj).abs() <= delta {
                continue;
            }
            let pattern = Pattern { pair, bits: bits.clone() };
            if installed(&pattern) {
                continue;
            }
            out.push(CutCandidate { pattern, weight_i: vi, weight_j: vj });
        }
    }
    out
}

/// Adds the equality row of `pattern` to the master. Pricing picks up the
/// indicator variable from the master's cut list.
pub fn apply_cut(state: &mut RmpState, pattern: Pattern) -> Result<usize, CutError> {
    let (i, j) = pattern.pair;
    let vars = state.structure.dec.linking_set(i, j);
    if vars.is_empty() || i >= j {
        return Err(CutError::EmptyLinkingSet(i, j));
    }
    if pattern.bits.len() != vars.len() || pattern.bits.iter().zip(vars).any(|(b, v)| b.0 != *v) {
        return Err(CutError::Incomplete(i, j));
    }
    state.push_cut(pattern).ok_or(CutError::Duplicate)
}

/// Every pattern on consecutive block pairs that some column carries.
pub fn observed_patterns(columns: &[Column], k: usize) -> Vec<Pattern> {
    let mut set = BTreeSet::new();
    for col in columns {
        for (&j, bits) in &col.patterns {
            let pair = (col.block.min(j), col.block.max(j));
            if pair.1 == pair.0 + 1 && pair.1 <= k {
                set.insert(Pattern { pair, bits: bits.clone() });
            }
        }
    }
    set.into_iter().collect()
}

/// Staircase matrix over columns sorted by block: for each consecutive
/// pair pattern a row with `+1` on matching lower-block columns and `-1` on
/// matching upper-block columns, and a final row of ones over block 1.
pub fn build_consistency_matrix(columns: &[Column], patterns: &[Pattern]) -> Vec<Vec<i64>> {
    let mut order: Vec<usize> = (0..columns.len()).collect();
    order.sort_by_key(|&c| columns[c].block);
    let mut rows = Vec::with_capacity(patterns.len() + 1);
    for q in patterns {
        rows.push(
            order
                .iter()
                .map(|&c| {
                    let col = &columns[c];
                    if !col.matches(q) {
                        0
                    } else if col.block == q.pair.0 {
                        1
                    } else {
                        -1
                    }
                })
                .collect(),
        );
    }
    rows.push(order.iter().map(|&c| i64::from(columns[c].block == 1)).collect());
    rows
}
