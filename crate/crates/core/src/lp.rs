//! Bounded-variable revised simplex.
//!
//! Every row `a x (<=|=|>=) b` is turned into `a x + s = b` with a slack whose
//! bounds encode the sense. Phase 1 minimises the sum of artificials placed on
//! the rows the starting point violates; a positive phase-1 optimum yields the
//! Farkas certificate returned in [`LpSolution::farkas`]. Duals follow the usual
//! minimisation convention: `d_j = c_j - y^T a_j`, so `<=` rows carry `y <= 0`
//! and `>=` rows carry `y >= 0`.

use std::fmt;

/// Row sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpColumn {
    pub cost: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimisation LP over bounded columns. Bounds may be infinite.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub columns: Vec<LpColumn>,
    pub rows: Vec<LpRow>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_column(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.columns.push(LpColumn { cost, lower, upper });
        self.columns.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(LpRow { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.columns.iter().zip(x).map(|(c, v)| c.cost * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (c, &v) in self.columns.iter().zip(x) {
            worst = worst.max(c.lower - v).max(v - c.upper);
        }
        for row in &self.rows {
            let act: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// `y^T b - sup_{x in box} y^T [A I] (x, s)`; strictly positive iff `y`
    /// certifies infeasibility. Returns `-inf` when the supremum is unbounded.
    pub fn farkas_value(&self, y: &[f64]) -> f64 {
        let mut ya = vec![0.0; self.columns.len()];
        let mut value = 0.0;
        for (row, &yi) in self.rows.iter().zip(y) {
            value += yi * row.rhs;
            for &(j, a) in &row.coeffs {
                ya[j] += yi * a;
            }
            let (sl, su) = slack_bounds(row.sense);
            match sup_linear(yi, sl, su) {
                Some(s) => value -= s,
                None => return f64::NEG_INFINITY,
            }
        }
        for (c, &g) in self.columns.iter().zip(&ya) {
            match sup_linear(g, c.lower, c.upper) {
                Some(s) => value -= s,
                None => return f64::NEG_INFINITY,
            }
        }
        value
    }
}

fn sup_linear(g: f64, lower: f64, upper: f64) -> Option<f64> {
    if g.abs() <= 1e-12 {
        Some(0.0)
    } else if g > 0.0 {
        upper.is_finite().then_some(g * upper)
    } else {
        lower.is_finite().then_some(g * lower)
    }
}

fn slack_bounds(sense: Sense) -> (f64, f64) {
    match sense {
        Sense::Le => (0.0, f64::INFINITY),
        Sense::Ge => (f64::NEG_INFINITY, 0.0),
        Sense::Eq => (0.0, 0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Free,
}

/// A simplex basis over structurals and row slacks; reusable on a grown LP.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub columns: Vec<VarStatus>,
    pub rows: Vec<VarStatus>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub farkas: Option<Vec<f64>>,
    pub objective: f64,
    pub iterations: usize,
    pub basis: Option<Basis>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn failed(status: LpStatus, iterations: usize, n: usize, m: usize) -> Self {
        LpSolution {
            status,
            primal: vec![0.0; n],
            duals: vec![0.0; m],
            reduced_costs: vec![0.0; n],
            farkas: None,
            objective: f64::NAN,
            iterations,
            basis: None,
        }
    }
}

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-8;
const REFACTOR_EVERY: usize = 64;
const STALL_LIMIT: usize = 1000;

/// Solves `lp` from a slack/artificial starting basis.
pub fn solve_lp(lp: &LinearProgram, iteration_limit: usize) -> LpSolution {
    let mut s = Simplex::new(lp);
    s.run_cold(lp, iteration_limit)
}

/// Solves `lp` starting from `basis`, which may come from an LP with fewer
/// rows or columns: new columns start nonbasic at a bound, new slacks basic.
/// Falls back to a cold start when the basis is unusable or primal infeasible.
pub fn resolve(lp: &LinearProgram, basis: &Basis, iteration_limit: usize) -> LpSolution {
    let mut s = Simplex::new(lp);
    if s.load_basis(lp, basis) {
        if let Some(sol) = s.run_warm(lp, iteration_limit) {
            return sol;
        }
    }
    let mut s = Simplex::new(lp);
    s.run_cold(lp, iteration_limit)
}

struct Simplex {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    status: Vec<VarStatus>,
    basic: Vec<usize>,
    x: Vec<f64>,
    binv: Vec<f64>,
    b: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
    Limit,
    Numerical,
}

impl Simplex {
    fn new(lp: &LinearProgram) -> Self {
        let n = lp.columns.len();
        let m = lp.rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
            cols[n + i].push((i, 1.0));
        }
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for c in &lp.columns {
            lower.push(c.lower);
            upper.push(c.upper);
        }
        for row in &lp.rows {
            let (l, u) = slack_bounds(row.sense);
            lower.push(l);
            upper.push(u);
        }
        Simplex {
            n,
            m,
            cols,
            lower,
            upper,
            cost: vec![0.0; n + m],
            status: vec![VarStatus::AtLower; n + m],
            basic: Vec::with_capacity(m),
            x: vec![0.0; n + m],
            binv: vec![0.0; m * m],
            b: lp.rows.iter().map(|r| r.rhs).collect(),
            iterations: 0,
            since_refactor: 0,
        }
    }

    fn nonbasic_rest(&self, j: usize) -> (VarStatus, f64) {
        if self.lower[j].is_finite() {
            (VarStatus::AtLower, self.lower[j])
        } else if self.upper[j].is_finite() {
            (VarStatus::AtUpper, self.upper[j])
        } else {
            (VarStatus::Free, 0.0)
        }
    }

    fn run_cold(&mut self, lp: &LinearProgram, limit: usize) -> LpSolution {
        let (n, m) = (self.n, self.m);
        for j in 0..n {
            let (st, v) = self.nonbasic_rest(j);
            self.status[j] = st;
            self.x[j] = v;
        }
        let mut residual = self.b.clone();
        for j in 0..n {
            if self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    residual[i] -= a * self.x[j];
                }
            }
        }
        // Slack basic where it fits, otherwise an artificial covers the gap.
        self.basic.clear();
        let mut artificial = Vec::new();
        for (i, &r) in residual.iter().enumerate() {
            let sj = n + i;
            if r >= self.lower[sj] - FEAS_TOL && r <= self.upper[sj] + FEAS_TOL {
                self.status[sj] = VarStatus::Basic;
                self.x[sj] = r;
                self.basic.push(sj);
            } else {
                let v = if r < self.lower[sj] { self.lower[sj] } else { self.upper[sj] };
                self.status[sj] = if r < self.lower[sj] { VarStatus::AtLower } else { VarStatus::AtUpper };
                self.x[sj] = v;
                let sign = if r - v > 0.0 { 1.0 } else { -1.0 };
                let aj = self.cols.len();
                self.cols.push(vec![(i, sign)]);
                self.lower.push(0.0);
                self.upper.push(f64::INFINITY);
                self.cost.push(0.0);
                self.status.push(VarStatus::Basic);
                self.x.push((r - v).abs());
                self.basic.push(aj);
                artificial.push(aj);
            }
        }
        if !self.refactor() {
            return LpSolution::failed(LpStatus::NumericalFailure, self.iterations, n, m);
        }

        if !artificial.is_empty() {
            for c in self.cost.iter_mut() {
                *c = 0.0;
            }
            for &a in &artificial {
                self.cost[a] = 1.0;
            }
            match self.iterate(limit) {
                Outcome::Optimal => {}
                Outcome::Limit => return LpSolution::failed(LpStatus::IterationLimit, self.iterations, n, m),
                Outcome::Unbounded | Outcome::Numerical => {
                    return LpSolution::failed(LpStatus::NumericalFailure, self.iterations, n, m)
                }
            }
            let infeas: f64 = artificial.iter().map(|&a| self.x[a]).sum();
            if infeas > PHASE1_TOL {
                let y = self.duals();
                let mut sol = LpSolution::failed(LpStatus::Infeasible, self.iterations, n, m);
                sol.primal = self.x[..n].to_vec();
                sol.farkas = Some(y[..m].to_vec());
                return sol;
            }
            for &a in &artificial {
                self.upper[a] = 0.0;
                self.cost[a] = 0.0;
                if self.status[a] != VarStatus::Basic {
                    self.status[a] = VarStatus::AtLower;
                    self.x[a] = 0.0;
                }
            }
        }
        self.phase_two(lp, limit)
    }

    fn load_basis(&mut self, lp: &LinearProgram, basis: &Basis) -> bool {
        let (n, m) = (self.n, self.m);
        if basis.columns.len() > n || basis.rows.len() > m {
            return false;
        }
        self.basic.clear();
        for j in 0..n + m {
            let given = if j < n {
                basis.columns.get(j).copied()
            } else {
                basis.rows.get(j - n).copied()
            };
            let st = match given {
                Some(st) => st,
                None if j >= n => VarStatus::Basic,
                None => self.nonbasic_rest(j).0,
            };
            let value = match st {
                VarStatus::Basic => 0.0,
                VarStatus::AtLower => self.lower[j],
                VarStatus::AtUpper => self.upper[j],
                VarStatus::Free => 0.0,
            };
            if !value.is_finite() {
                return false;
            }
            if st == VarStatus::Free && (self.lower[j].is_finite() || self.upper[j].is_finite()) {
                return false;
            }
            self.status[j] = st;
            self.x[j] = value;
            if st == VarStatus::Basic {
                self.basic.push(j);
            }
        }
        let _ = lp;
        self.basic.len() == m && self.refactor()
    }

    fn run_warm(&mut self, lp: &LinearProgram, limit: usize) -> Option<LpSolution> {
        for &j in &self.basic {
            if self.x[j] < self.lower[j] - FEAS_TOL || self.x[j] > self.upper[j] + FEAS_TOL {
                return None;
            }
        }
        Some(self.phase_two(lp, limit))
    }

    fn phase_two(&mut self, lp: &LinearProgram, limit: usize) -> LpSolution {
        let (n, m) = (self.n, self.m);
        for c in self.cost.iter_mut() {
            *c = 0.0;
        }
        for (j, c) in lp.columns.iter().enumerate() {
            self.cost[j] = c.cost;
        }
        let status = match self.iterate(limit) {
            Outcome::Optimal => LpStatus::Optimal,
            Outcome::Unbounded => LpStatus::Unbounded,
            Outcome::Limit => LpStatus::IterationLimit,
            Outcome::Numerical => LpStatus::NumericalFailure,
        };
        if status != LpStatus::Optimal {
            let mut sol = LpSolution::failed(status, self.iterations, n, m);
            sol.primal = self.x[..n].to_vec();
            return sol;
        }
        let y = self.duals();
        let reduced_costs: Vec<f64> = (0..n).map(|j| self.reduced_cost(j, &y)).collect();
        let primal: Vec<f64> = self.x[..n].to_vec();
        let mut columns = self.status[..n].to_vec();
        let mut rows = self.status[n..n + m].to_vec();
        // An artificial still basic at zero stands in for its row slack.
        for (r, &j) in self.basic.iter().enumerate() {
            if j >= n + m {
                let _ = r;
                let row = self.cols[j][0].0;
                rows[row] = VarStatus::Basic;
            }
        }
        let nb = columns.iter().chain(rows.iter()).filter(|s| **s == VarStatus::Basic).count();
        let basis = if nb == m {
            Some(Basis { columns: std::mem::take(&mut columns), rows: std::mem::take(&mut rows) })
        } else {
            None
        };
        LpSolution {
            status,
            objective: lp.objective(&primal),
            primal,
            duals: y[..m].to_vec(),
            reduced_costs,
            farkas: None,
            iterations: self.iterations,
            basis,
        }
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        let mut d = self.cost[j];
        for &(i, a) in &self.cols[j] {
            d -= y[i] * a;
        }
        d
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &j) in self.basic.iter().enumerate() {
            let c = self.cost[j];
            if c != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for k in 0..m {
                    y[k] += c * row[k];
                }
            }
        }
        y
    }

    /// Rebuilds `B^{-1}` by Gauss-Jordan elimination and recomputes basic values.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        self.since_refactor = 0;
        if m == 0 {
            return true;
        }
        let mut a = vec![0.0; m * m];
        for (r, &j) in self.basic.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                a[i * m + r] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let mut piv = c;
            let mut best = a[c * m + c].abs();
            for r in c + 1..m {
                let v = a[r * m + c].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-11 {
                return false;
            }
            if piv != c {
                for k in 0..m {
                    a.swap(c * m + k, piv * m + k);
                    inv.swap(c * m + k, piv * m + k);
                }
            }
            let p = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= p;
                inv[c * m + k] /= p;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        // `inv` inverts B where B's column r is basic[r]; rows of inv index basis positions.
        self.binv = inv;
        let mut rhs = self.b.clone();
        for j in 0..self.cols.len() {
            if self.status[j] != VarStatus::Basic && self.x[j] != 0.0 {
                for &(i, v) in &self.cols[j] {
                    rhs[i] -= v * self.x[j];
                }
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(a, b)| a * b).sum();
            let j = self.basic[r];
            self.x[j] = v;
        }
        true
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(i, v) in &self.cols[j] {
            for r in 0..m {
                alpha[r] += self.binv[r * m + i] * v;
            }
        }
        alpha
    }

    fn iterate(&mut self, limit: usize) -> Outcome {
        let m = self.m;
        let total = self.cols.len();
        let mut stalled = 0usize;
        let mut bland = false;
        let mut fresh = self.since_refactor == 0;
        loop {
            if self.since_refactor >= REFACTOR_EVERY {
                if !self.refactor() {
                    return Outcome::Numerical;
                }
                fresh = true;
            }
            let y = self.duals();
            // Pricing.
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..total {
                let st = self.status[j];
                if st == VarStatus::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = self.reduced_cost(j, &y);
                let dir = match st {
                    VarStatus::AtLower if d < -OPT_TOL => 1.0,
                    VarStatus::AtUpper if d > OPT_TOL => -1.0,
                    VarStatus::Free if d.abs() > OPT_TOL => -d.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, dir, d));
                    break;
                }
                if entering.is_none_or(|(_, _, best)| d.abs() > best.abs()) {
                    entering = Some((j, dir, d));
                }
            }
            let Some((q, dir, _)) = entering else {
                if !fresh {
                    if !self.refactor() {
                        return Outcome::Numerical;
                    }
                    fresh = true;
                    continue;
                }
                return Outcome::Optimal;
            };
            if self.iterations >= limit {
                return Outcome::Limit;
            }
            let alpha = self.ftran(q);
            // Ratio test, including the entering variable's own bound flip.
            let mut step = self.upper[q] - self.lower[q];
            let mut leave: Option<usize> = None;
            let mut leave_piv = 0.0f64;
            for r in 0..m {
                let a = alpha[r];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.basic[r];
                let delta = -dir * a;
                let room = if delta < 0.0 {
                    if !self.lower[j].is_finite() {
                        continue;
                    }
                    ((self.x[j] - self.lower[j]) / -delta).max(0.0)
                } else {
                    if !self.upper[j].is_finite() {
                        continue;
                    }
                    ((self.upper[j] - self.x[j]) / delta).max(0.0)
                };
                let take = match leave {
                    _ if room < step - 1e-12 => true,
                    None => room <= step + 1e-12,
                    Some(cur) if room <= step + 1e-12 => {
                        if bland {
                            j < self.basic[cur]
                        } else {
                            a.abs() > leave_piv
                        }
                    }
                    Some(_) => false,
                };
                if take {
                    step = room.min(step);
                    leave = Some(r);
                    leave_piv = a.abs();
                }
            }
            if !step.is_finite() {
                return Outcome::Unbounded;
            }
            self.iterations += 1;
            // Primal update.
            if step != 0.0 {
                self.x[q] += dir * step;
                for r in 0..m {
                    if alpha[r] != 0.0 {
                        let j = self.basic[r];
                        self.x[j] -= dir * step * alpha[r];
                    }
                }
            }
            if step > 1e-12 {
                stalled = 0;
                bland = false;
            } else {
                stalled += 1;
                if stalled >= STALL_LIMIT {
                    bland = true;
                }
            }
            match leave {
                None => {
                    // Bound flip.
                    self.status[q] = if dir > 0.0 { VarStatus::AtUpper } else { VarStatus::AtLower };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Some(r) => {
                    let j = self.basic[r];
                    let delta = -dir * alpha[r];
                    if delta < 0.0 {
                        self.status[j] = VarStatus::AtLower;
                        self.x[j] = self.lower[j];
                    } else {
                        self.status[j] = VarStatus::AtUpper;
                        self.x[j] = self.upper[j];
                    }
                    if self.lower[j] == self.upper[j] {
                        self.status[j] = VarStatus::AtLower;
                    }
                    self.status[q] = VarStatus::Basic;
                    self.basic[r] = q;
                    let p = alpha[r];
                    let (head, tail) = self.binv.split_at_mut(r * m);
                    let (prow, rest) = tail.split_at_mut(m);
                    for v in prow.iter_mut() {
                        *v /= p;
                    }
                    for k in 0..m {
                        if k == r || alpha[k] == 0.0 {
                            continue;
                        }
                        let f = alpha[k];
                        let row = if k < r {
                            &mut head[k * m..(k + 1) * m]
                        } else {
                            &mut rest[(k - r - 1) * m..(k - r) * m]
                        };
                        for (dst, src) in row.iter_mut().zip(prow.iter()) {
                            *dst -= f * src;
                        }
                    }
                    self.since_refactor += 1;
                    fresh = false;
                }
            }
        }
    }
}
