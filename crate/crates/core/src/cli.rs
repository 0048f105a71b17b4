//! Command implementations behind the `dwcuts` binary: decomposed-MIP JSON,
//! run reports and the subcommands themselves.
//!
//! Decomposed-MIP JSON:
//!
//! ```json
//! {"sense": "max", "k": 2,
//!  "vars": [{"name": "x1", "lb": 0, "ub": 1, "kind": "binary", "cost": 3}],
//!  "cons": [{"coeffs": {"x1": 2}, "sense": "<=", "rhs": 2, "block": 1}]}
//! ```
//!
//! Missing or null bounds are infinite, except that binaries default to
//! `[0, 1]`. Block 0 holds coupling rows.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Number, Value};
use thiserror::Error;

use crate::bnp::{self, BnpError, BnpParams, Mode, SearchState, SolveStatus};
use crate::colgen::ColGenParams;
use crate::lp::Sense;
use crate::model::{
    binarize_linking_integers, check_extended_chain, derive_block_membership, int, rat_to_f64, ChainReport,
    Decomposition, MipProblem, ModelError, ObjSense, Rat, VarKind,
};
use crate::tkp::{build_model, decompose, generate, GenParams, TkpError, TkpInstance};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid number {0:?}")]
    Number(String),
    #[error("unknown {what} {value:?}")]
    Unknown { what: &'static str, value: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tkp(#[from] TkpError),
    #[error(transparent)]
    Solve(#[from] BnpError),
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

/// Exact value of a decimal literal such as `-2.5` or `1e3`.
pub fn parse_decimal(text: &str) -> Result<Rat, CliError> {
    let err = || CliError::Number(text.to_string());
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(p) => (&text[..p], text[p + 1..].parse::<i32>().map_err(|_| err())?),
        None => (text, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() || !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let all: String = format!("{whole}{frac}");
    let numer: i64 = all.parse().map_err(|_| err())?;
    let scale = exp - frac.len() as i32;
    let pow = 10i64.checked_pow(scale.unsigned_abs()).ok_or_else(err)?;
    let mut r = if scale >= 0 { Rat::from_integer(numer.checked_mul(pow).ok_or_else(err)?) } else { Rat::new(numer, pow) };
    if neg {
        r = -r;
    }
    Ok(r)
}

fn number(n: &Number) -> Result<Rat, CliError> {
    parse_decimal(&n.to_string())
}

fn rat_number(r: &Rat) -> Value {
    if r.is_integer() {
        Value::Number(Number::from(*r.numer()))
    } else {
        json_f64(rat_to_f64(r))
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct JsonVar {
    name: String,
    #[serde(default)]
    lb: Option<Number>,
    #[serde(default)]
    ub: Option<Number>,
    #[serde(default = "default_kind")]
    kind: String,
    #[serde(default)]
    cost: Option<Number>,
}

fn default_kind() -> String {
    "continuous".into()
}

#[derive(Debug, Deserialize, Serialize)]
struct JsonCons {
    coeffs: BTreeMap<String, Number>,
    sense: String,
    rhs: Number,
    #[serde(default)]
    block: usize,
}

#[derive(Debug, Deserialize, Serialize)]
struct JsonMip {
    sense: String,
    vars: Vec<JsonVar>,
    cons: Vec<JsonCons>,
    k: usize,
}

fn parse_sense(s: &str) -> Result<Sense, CliError> {
    match s {
        "<=" | "le" => Ok(Sense::Le),
        "=" | "==" | "eq" => Ok(Sense::Eq),
        ">=" | "ge" => Ok(Sense::Ge),
        _ => Err(CliError::Unknown { what: "row sense", value: s.into() }),
    }
}

/// Reads a decomposed MIP.
pub fn parse_mip_json(text: &str) -> Result<(MipProblem, Decomposition), CliError> {
    let raw: JsonMip = serde_json::from_str(text)?;
    let sense = match raw.sense.as_str() {
        "min" | "minimize" => ObjSense::Min,
        "max" | "maximize" => ObjSense::Max,
        other => return Err(CliError::Unknown { what: "objective sense", value: other.into() }),
    };
    let mut p = MipProblem::new(sense);
    for v in &raw.vars {
        let kind = match v.kind.as_str() {
            "binary" => VarKind::Binary,
            "integer" => VarKind::Integer,
            "continuous" => VarKind::Continuous,
            other => return Err(CliError::Unknown { what: "variable kind", value: other.into() }),
        };
        let lb = v.lb.as_ref().map(number).transpose()?;
        let ub = v.ub.as_ref().map(number).transpose()?;
        let (lb, ub) = match kind {
            VarKind::Binary => (lb.or(Some(int(0))), ub.or(Some(int(1)))),
            _ => (lb, ub),
        };
        let cost = v.cost.as_ref().map(number).transpose()?.unwrap_or_else(|| int(0));
        if p.var_by_name(&v.name).is_some() {
            return Err(ModelError::DuplicateName(v.name.clone()).into());
        }
        p.add_variable(v.name.clone(), lb, ub, kind, cost)?;
    }
    let mut block_of = Vec::with_capacity(raw.cons.len());
    for c in &raw.cons {
        let mut coeffs = Vec::with_capacity(c.coeffs.len());
        for (name, val) in &c.coeffs {
            let id = p.var_by_name(name).ok_or_else(|| CliError::Unknown { what: "variable", value: name.clone() })?;
            coeffs.push((id, number(val)?));
        }
        p.add_constraint(coeffs, parse_sense(&c.sense)?, number(&c.rhs)?)?;
        block_of.push(c.block);
    }
    p.validate()?;
    let dec = derive_block_membership(&p, &block_of, raw.k)?;
    Ok((p, dec))
}

/// Writes a decomposed MIP in the format read by [`parse_mip_json`].
pub fn mip_to_json(p: &MipProblem, dec: &Decomposition) -> String {
    let sign = match p.original_sense {
        ObjSense::Min => int(1),
        ObjSense::Max => int(-1),
    };
    let vars: Vec<Value> = p
        .variables
        .iter()
        .map(|v| {
            json!({
                "name": v.name,
                "lb": v.lower.as_ref().map(rat_number),
                "ub": v.upper.as_ref().map(rat_number),
                "kind": match v.kind { VarKind::Binary => "binary", VarKind::Integer => "integer", VarKind::Continuous => "continuous" },
                "cost": rat_number(&(v.cost * sign)),
            })
        })
        .collect();
    let cons: Vec<Value> = p
        .constraints
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let coeffs: Map<String, Value> =
                c.coeffs.iter().map(|(&v, a)| (p.variables[v].name.clone(), rat_number(a))).collect();
            json!({"coeffs": coeffs, "sense": c.sense.to_string(), "rhs": rat_number(&c.rhs), "block": dec.block_of[i]})
        })
        .collect();
    let doc = json!({
        "sense": match p.original_sense { ObjSense::Min => "min", ObjSense::Max => "max" },
        "k": dec.k,
        "vars": vars,
        "cons": cons,
    });
    serde_json::to_string_pretty(&doc).expect("JSON value serializes") + "\n"
}

/// Rounds to nine significant digits; non-finite values become null.
pub fn json_f64(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let r: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    let r = if r == 0.0 { 0.0 } else { r };
    if r.fract() == 0.0 && r.abs() < 1e15 {
        Value::Number(Number::from(r as i64))
    } else {
        Value::Number(Number::from_f64(r).expect("finite"))
    }
}

/// Options shared by the solve commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub bnp: BnpParams,
    pub block_size: usize,
    pub seed: u64,
    pub binarize: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { bnp: BnpParams::default(), block_size: 1, seed: 0, binarize: false }
    }
}

/// Outcome of a solve command in the original objective sense.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub dual_bound: Option<f64>,
    pub gap: Option<f64>,
    pub root_relaxation: Option<f64>,
    pub root_objective: Option<f64>,
    pub root_integral: bool,
    pub rounds: Vec<(usize, usize, f64, usize)>,
    pub nodes: usize,
    pub cuts_added: usize,
    pub columns_added: usize,
    pub colgen_iterations: usize,
    pub solution: BTreeMap<String, f64>,
    pub wall_time: f64,
    pub params: SolveOptions,
    pub blocks: usize,
}

impl RunReport {
    pub fn from_search(problem: &MipProblem, names: &[String], x_map: impl Fn(&[f64]) -> Vec<f64>, s: &SearchState, opts: SolveOptions, blocks: usize, wall: f64) -> Self {
        let rep = |v: f64| problem.report_objective(v);
        let finite = |v: f64| v.is_finite().then_some(v);
        let solution = match &s.incumbent {
            Some(inc) => names.iter().cloned().zip(x_map(&inc.x)).collect(),
            None => BTreeMap::new(),
        };
        RunReport {
            status: s.status,
            objective: s.incumbent.as_ref().map(|i| rep(i.value)),
            dual_bound: finite(s.bound).map(rep),
            gap: s.incumbent.as_ref().map(|_| s.gap),
            root_relaxation: s.root.as_ref().and_then(|r| finite(r.relaxation)).map(rep),
            root_objective: s.root.as_ref().and_then(|r| finite(r.objective)).map(rep),
            root_integral: s.root.as_ref().is_some_and(|r| r.integral),
            rounds: s
                .root
                .as_ref()
                .map(|r| r.rounds.iter().map(|c| (c.round, c.cuts_added, rep(c.rmp_objective + rat_to_f64(&problem.objective_offset)), c.columns)).collect())
                .unwrap_or_default(),
            nodes: s.nodes,
            cuts_added: s.cuts_added,
            columns_added: s.columns_added,
            colgen_iterations: s.colgen_iterations,
            solution,
            wall_time: wall,
            params: opts,
            blocks,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            SolveStatus::Optimal | SolveStatus::Infeasible => 0,
            SolveStatus::NodeLimit => 2,
        }
    }

    pub fn to_value(&self, with_wall_time: bool) -> Value {
        let opt = |v: Option<f64>| v.map_or(Value::Null, json_f64);
        let c = &self.params.bnp.colgen;
        let mut m = Map::new();
        m.insert("status".into(), json!(match self.status {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::NodeLimit => "limit",
        }));
        m.insert("objective".into(), opt(self.objective));
        m.insert("dual_bound".into(), opt(self.dual_bound));
        m.insert("gap".into(), opt(self.gap));
        m.insert("root".into(), json!({
            "relaxation": opt(self.root_relaxation),
            "objective": opt(self.root_objective),
            "integral": self.root_integral,
        }));
        m.insert("rounds".into(), Value::Array(self.rounds.iter().map(|&(r, cuts, obj, cols)| json!({
            "round": r, "cuts_added": cuts, "rmp_objective": json_f64(obj), "columns": cols,
        })).collect()));
        m.insert("cut_rounds".into(), json!(self.rounds.len()));
        m.insert("nodes".into(), json!(self.nodes));
        m.insert("blocks".into(), json!(self.blocks));
        m.insert("cuts_added".into(), json!(self.cuts_added));
        m.insert("columns_added".into(), json!(self.columns_added));
        m.insert("colgen_iterations".into(), json!(self.colgen_iterations));
        m.insert("solution".into(), Value::Object(self.solution.iter().map(|(k, &v)| (k.clone(), json_f64(v))).collect()));
        m.insert("params".into(), json!({
            "delta": json_f64(c.delta), "tau": c.tau, "eta": json_f64(c.eta), "rho": json_f64(c.rho),
            "xi": json_f64(c.xi), "eps": json_f64(c.eps), "threads": c.threads,
            "block_size": self.params.block_size,
            "cuts": self.params.bnp.mode == Mode::Cuts,
            "binarize": self.params.binarize,
        }));
        m.insert("seed".into(), json!(self.params.seed));
        if with_wall_time {
            m.insert("wall_time".into(), json_f64(self.wall_time));
        }
        Value::Object(m)
    }

    /// Pretty JSON with sorted keys.
    pub fn to_json(&self, with_wall_time: bool) -> String {
        serde_json::to_string_pretty(&self.to_value(with_wall_time)).expect("JSON value serializes") + "\n"
    }
}

fn run(problem: MipProblem, dec: Decomposition, opts: SolveOptions) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let names: Vec<String> = problem.variables.iter().map(|v| v.name.clone()).collect();
    let (work_p, work_d, mapping) = if opts.binarize {
        let (p, d, m) = binarize_linking_integers(&problem, &dec)?;
        (p, d, Some(m))
    } else {
        (problem.clone(), dec, None)
    };
    let blocks = work_d.k;
    let s = bnp::solve(work_p, work_d, &opts.bnp)?;
    let x_map = |x: &[f64]| match &mapping {
        Some(m) => m.translate_f64(x),
        None => x.to_vec(),
    };
    Ok(RunReport::from_search(&problem, &names, x_map, &s, opts, blocks, start.elapsed().as_secs_f64()))
}

pub fn solve_tkp_instance(inst: &TkpInstance, opts: SolveOptions) -> Result<RunReport, CliError> {
    let model = build_model(inst);
    let dec = decompose(&model, opts.block_size)?;
    run(model.problem, dec, opts)
}

pub fn solve_tkp_file(path: &Path, opts: SolveOptions) -> Result<RunReport, CliError> {
    let inst = TkpInstance::parse(&read_file(path)?)?;
    solve_tkp_instance(&inst, opts)
}

pub fn solve_mip_file(path: &Path, opts: SolveOptions) -> Result<RunReport, CliError> {
    let (p, d) = parse_mip_json(&read_file(path)?)?;
    run(p, d, opts)
}

pub fn check_structure_file(path: &Path) -> Result<ChainReport, CliError> {
    let (p, d) = parse_mip_json(&read_file(path)?)?;
    Ok(check_extended_chain(&d, &p))
}

/// Chain report followed by one line per gap naming the variable.
pub fn structure_text(path: &Path) -> Result<String, CliError> {
    let (p, d) = parse_mip_json(&read_file(path)?)?;
    let report = check_extended_chain(&d, &p);
    let mut out = report.to_string();
    for v in &report.violations {
        out.push_str(&format!(
            "witness {} appears in blocks {} and {} but not in between\n",
            p.variables[v.variable].name, v.blocks.0, v.blocks.1
        ));
    }
    out.push_str(&format!("integral_root_guaranteed={}\n", report.integral_root_guaranteed()));
    Ok(out)
}

/// Instance text with the generator settings echoed as a comment.
pub fn gen_tkp_text(seed: u64, g: &GenParams) -> String {
    let inst = generate(seed, g);
    format!(
        "# gen-tkp seed={seed} n={} capacity={} horizon={} weight={}..{} profit={}..{} duration={}..{}\n{}",
        g.n,
        g.capacity,
        g.horizon,
        g.weight.0,
        g.weight.1,
        g.profit.0,
        g.profit.1,
        g.duration.0,
        g.duration.1,
        inst.to_text()
    )
}

/// Solver parameters with the given overrides of the defaults.
pub fn colgen_params(delta: f64, tau: usize, eta: f64, rho: f64, xi: f64, eps: f64, threads: usize) -> ColGenParams {
    ColGenParams { delta, tau, eta, rho, xi, eps, threads: threads.max(1), ..ColGenParams::default() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::worked_example;

    #[test]
    fn decimals() {
        assert_eq!(parse_decimal("3").unwrap(), int(3));
        assert_eq!(parse_decimal("-2.5").unwrap(), Rat::new(-5, 2));
        assert_eq!(parse_decimal("1e3").unwrap(), int(1000));
        assert_eq!(parse_decimal("0.125").unwrap(), Rat::new(1, 8));
        assert_eq!(parse_decimal("25E-2").unwrap(), Rat::new(1, 4));
        assert!(parse_decimal("abc").is_err());
        assert!(parse_decimal("").is_err());
    }

    #[test]
    fn json_round_trip() {
        let (p, d) = worked_example();
        let text = mip_to_json(&p, &d);
        let (p2, d2) = parse_mip_json(&text).unwrap();
        assert_eq!(p, p2);
        assert_eq!(d, d2);
    }

    #[test]
    fn json_errors() {
        let bad_block = r#"{"sense":"min","k":1,"vars":[{"name":"x","kind":"binary"}],
            "cons":[{"coeffs":{"x":1},"sense":"<=","rhs":1,"block":2}]}"#;
        assert!(matches!(parse_mip_json(bad_block), Err(CliError::Model(ModelError::BlockOutOfRange { .. }))));
        let bad_var = r#"{"sense":"min","k":1,"vars":[],"cons":[{"coeffs":{"y":1},"sense":"<=","rhs":1,"block":1}]}"#;
        assert!(matches!(parse_mip_json(bad_var), Err(CliError::Unknown { .. })));
        assert!(parse_mip_json("{").is_err());
    }

    #[test]
    fn nine_digit_numbers() {
        assert_eq!(json_f64(6.0).to_string(), "6");
        assert_eq!(json_f64(1.0 / 3.0).to_string(), "0.333333333");
        assert_eq!(json_f64(-6.499999999999).to_string(), "-6.5");
        assert_eq!(json_f64(f64::NAN), Value::Null);
    }

    #[test]
    fn worked_example_report() {
        let r = solve_tkp_instance(&TkpInstance::worked_example(), SolveOptions::default()).unwrap();
        assert_eq!(r.objective, Some(6.0));
        assert_eq!(r.nodes, 1);
        assert!(r.cuts_added >= 1);
        assert_eq!(r.exit_code(), 0);
        let v = r.to_value(false);
        assert!(v.get("wall_time").is_none());
        assert_eq!(v["solution"]["x4"], json!(1));
    }
}
