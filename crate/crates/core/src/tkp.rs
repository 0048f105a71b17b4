//! Temporal knapsack: instances, the compact model and its chronological
//! decomposition, and a seeded generator.
//!
//! Text format: a header line `n C`, then one line `s t w p` per item.
//! Blank lines and lines starting with `#` are ignored. Intervals are
//! half-open: an item is active at `s` but not at `t`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lp::Sense;
use crate::model::{derive_block_membership, int, Decomposition, ModelError, MipProblem, ObjSense};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TkpError {
    #[error("empty instance")]
    Empty,
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("expected {expected} items, found {found}")]
    ItemCount { expected: usize, found: usize },
    #[error("block size must be at least 1")]
    BlockSize,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TkpItem {
    pub s: i64,
    pub t: i64,
    pub w: i64,
    pub p: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TkpInstance {
    pub capacity: i64,
    pub items: Vec<TkpItem>,
}

impl TkpInstance {
    /// The four-item instance whose model is the two-row worked example.
    pub fn worked_example() -> Self {
        TkpInstance {
            capacity: 2,
            items: vec![
                TkpItem { s: 0, t: 1, w: 2, p: 3 },
                TkpItem { s: 0, t: 2, w: 1, p: 2 },
                TkpItem { s: 0, t: 2, w: 1, p: 2 },
                TkpItem { s: 1, t: 2, w: 1, p: 3 },
            ],
        }
    }

    pub fn parse(text: &str) -> Result<Self, TkpError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or(TkpError::Empty)?;
        let h = ints(hl, header, 2)?;
        if h[0] < 1 || h[1] < 0 {
            return Err(TkpError::Malformed { line: hl, msg: "need n >= 1 and C >= 0".into() });
        }
        let n = h[0] as usize;
        let mut items = Vec::with_capacity(n);
        for (ln, l) in lines {
            let v = ints(ln, l, 4)?;
            let item = TkpItem { s: v[0], t: v[1], w: v[2], p: v[3] };
            if item.s >= item.t {
                return Err(TkpError::Malformed { line: ln, msg: "start must precede end".into() });
            }
            if item.w < 0 || item.p < 0 {
                return Err(TkpError::Malformed { line: ln, msg: "negative weight or profit".into() });
            }
            items.push(item);
        }
        if items.len() != n {
            return Err(TkpError::ItemCount { expected: n, found: items.len() });
        }
        Ok(TkpInstance { capacity: h[1], items })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.items.len(), self.capacity);
        for it in &self.items {
            let _ = writeln!(out, "{} {} {} {}", it.s, it.t, it.w, it.p);
        }
        out
    }

    /// Items active at the start of item `j`.
    pub fn active_at_start(&self, j: usize) -> BTreeSet<usize> {
        let sj = self.items[j].s;
        (0..self.items.len()).filter(|&i| self.items[i].s <= sj && sj < self.items[i].t).collect()
    }
}

fn ints(line: usize, text: &str, count: usize) -> Result<Vec<i64>, TkpError> {
    let v: Result<Vec<i64>, _> = text.split_whitespace().map(str::parse).collect();
    match v {
        Ok(v) if v.len() == count => Ok(v),
        Ok(v) => Err(TkpError::Malformed { line, msg: format!("expected {count} fields, found {}", v.len()) }),
        Err(e) => Err(TkpError::Malformed { line, msg: e.to_string() }),
    }
}

/// Compact model with the start time and item behind each row.
#[derive(Debug, Clone, PartialEq)]
pub struct TkpModel {
    pub problem: MipProblem,
    pub row_start: Vec<i64>,
    pub row_item: Vec<usize>,
}

/// One capacity row per undominated active set: a set contained in another,
/// or equal to an earlier one, is dropped.
pub fn build_model(inst: &TkpInstance) -> TkpModel {
    build_model_with(inst, true)
}

/// As [`build_model`], optionally keeping every row.
pub fn build_model_with(inst: &TkpInstance, reduce: bool) -> TkpModel {
    let mut p = MipProblem::new(ObjSense::Max);
    let xs: Vec<usize> = inst.items.iter().enumerate().map(|(i, it)| p.add_binary(format!("x{}", i + 1), it.p)).collect();
    let sets: Vec<BTreeSet<usize>> = (0..inst.items.len()).map(|j| inst.active_at_start(j)).collect();
    let mut row_start = Vec::new();
    let mut row_item = Vec::new();
    for j in 0..sets.len() {
        let dominated = reduce
            && (0..sets.len()).any(|m| m != j && sets[j].is_subset(&sets[m]) && (sets[j].len() < sets[m].len() || m < j));
        if dominated {
            continue;
        }
        p.add_constraint(sets[j].iter().map(|&i| (xs[i], int(inst.items[i].w))), Sense::Le, int(inst.capacity))
            .expect("item variables exist");
        row_start.push(inst.items[j].s);
        row_item.push(j);
    }
    TkpModel { problem: p, row_start, row_item }
}

/// Rows sorted by start time (ties by item), cut into blocks of `block_size`.
pub fn decompose(model: &TkpModel, block_size: usize) -> Result<Decomposition, TkpError> {
    if block_size == 0 {
        return Err(TkpError::BlockSize);
    }
    let m = model.row_start.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&r| (model.row_start[r], model.row_item[r]));
    let mut block_of = vec![0; m];
    for (pos, &r) in order.iter().enumerate() {
        block_of[r] = pos / block_size + 1;
    }
    let k = m.div_ceil(block_size).max(1);
    Ok(derive_block_membership(&model.problem, &block_of, k)?)
}

/// Generator settings; ranges are inclusive. Items are drawn uniformly and
/// do not follow any published benchmark family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenParams {
    pub n: usize,
    pub capacity: i64,
    pub horizon: i64,
    pub weight: (i64, i64),
    pub profit: (i64, i64),
    pub duration: (i64, i64),
}

impl GenParams {
    pub fn new(n: usize, capacity: i64) -> Self {
        GenParams { n, capacity, horizon: n as i64, weight: (1, 5), profit: (1, 20), duration: (1, 6) }
    }
}

pub fn generate(seed: u64, g: &GenParams) -> TkpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = (0..g.n)
        .map(|_| {
            let s = rng.gen_range(0..g.horizon.max(1));
            let d = rng.gen_range(g.duration.0..=g.duration.1);
            TkpItem {
                s,
                t: s + d.max(1),
                w: rng.gen_range(g.weight.0..=g.weight.1),
                p: rng.gen_range(g.profit.0..=g.profit.1),
            }
        })
        .collect();
    TkpInstance { capacity: g.capacity, items }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{check_extended_chain, worked_example};
    use crate::oracle::brute_solve;

    #[test]
    fn worked_example_model() {
        let m = build_model(&TkpInstance::worked_example());
        let (p, _) = worked_example();
        assert_eq!(m.problem.constraints, p.constraints);
        assert_eq!(m.row_item, vec![0, 3]);
        let d = decompose(&m, 1).unwrap();
        assert_eq!(d.k, 2);
        assert_eq!(d.linking_set(1, 2), &[1, 2]);
    }

    #[test]
    fn identical_intervals_keep_one_row() {
        let inst = TkpInstance {
            capacity: 3,
            items: vec![TkpItem { s: 2, t: 5, w: 1, p: 1 }, TkpItem { s: 2, t: 5, w: 2, p: 1 }],
        };
        assert_eq!(build_model(&inst).problem.constraints.len(), 1);
    }

    #[test]
    fn single_item() {
        let inst = TkpInstance { capacity: 4, items: vec![TkpItem { s: 0, t: 1, w: 3, p: 7 }] };
        let m = build_model(&inst);
        assert_eq!(m.problem.constraints.len(), 1);
        let r = brute_solve(&m.problem).unwrap();
        assert_eq!(m.problem.report_objective_exact(r.optimum.unwrap()), int(7));
    }

    #[test]
    fn block_sizes() {
        let m = build_model(&TkpInstance::worked_example());
        assert_eq!(decompose(&m, 5).unwrap().k, 1);
        assert_eq!(decompose(&m, 0), Err(TkpError::BlockSize));
        let inst = TkpInstance {
            capacity: 1,
            items: (0..6).map(|i| TkpItem { s: i, t: i + 1, w: 1, p: 1 }).collect(),
        };
        let m = build_model(&inst);
        assert_eq!(m.problem.constraints.len(), 6);
        let d = decompose(&m, 4).unwrap();
        let sizes: Vec<usize> = (1..=d.k).map(|b| d.block_constraints(b).len()).collect();
        assert_eq!(sizes, vec![4, 2]);
    }

    #[test]
    fn text_round_trip_and_errors() {
        let inst = TkpInstance::worked_example();
        let text = inst.to_text();
        assert_eq!(text, "4 2\n0 1 2 3\n0 2 1 2\n0 2 1 2\n1 2 1 3\n");
        assert_eq!(TkpInstance::parse(&text).unwrap(), inst);
        let commented = format!("# four items\n{text}\n# end\n");
        assert_eq!(TkpInstance::parse(&commented).unwrap(), inst);
        assert_eq!(TkpInstance::parse(""), Err(TkpError::Empty));
        assert!(matches!(TkpInstance::parse("1 2\n3 3 1 1\n"), Err(TkpError::Malformed { line: 2, .. })));
        assert!(matches!(TkpInstance::parse("1 2\n0 3 -1 1\n"), Err(TkpError::Malformed { .. })));
        assert!(matches!(TkpInstance::parse("2 2\n0 3 1 1\n"), Err(TkpError::ItemCount { .. })));
        assert!(matches!(TkpInstance::parse("1 2\n0 x 1 1\n"), Err(TkpError::Malformed { .. })));
    }

    #[test]
    fn generator_is_deterministic() {
        let g = GenParams::new(12, 5);
        assert_eq!(generate(7, &g), generate(7, &g));
        assert_ne!(generate(7, &g), generate(8, &g));
        let unit = GenParams { duration: (1, 1), ..g };
        assert!(generate(3, &unit).items.iter().all(|it| it.t == it.s + 1));
    }

    #[test]
    fn generated_decompositions_are_chains() {
        for seed in 0..30 {
            let inst = generate(seed, &GenParams::new(10 + seed as usize % 8, 4));
            let m = build_model(&inst);
            for b in [1, 2, 4, 8] {
                let d = decompose(&m, b).unwrap();
                assert!(check_extended_chain(&d, &m.problem).integral_root_guaranteed(), "seed {seed} B {b}");
            }
        }
    }

    #[test]
    fn dominance_keeps_optimum() {
        for seed in 0..20 {
            let inst = generate(seed, &GenParams::new(10, 4));
            let full = brute_solve(&build_model_with(&inst, false).problem).unwrap();
            let reduced = brute_solve(&build_model(&inst).problem).unwrap();
            assert_eq!(full.optimum, reduced.optimum);
        }
    }
}
