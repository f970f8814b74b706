use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use interbank_eq::model::bank_drift;
use interbank_eq::simulate::paths_csv;
use interbank_eq::*;
use serde_json::{json, Map, Value};

use crate::output::{csv_num, emit, render_json, SCHEMA_VERSION};
use crate::{Format, Io, Mode, Sweep, Variant};

/// Weights at or below this are treated as no exposure in the graph.
const EDGE_EPS: f64 = 1e-12;

pub enum Failure {
    Usage(String),
    Model(Error),
    Io(String, io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Model(e) => match e {
                Error::Config(_)
                | Error::Invalid(_)
                | Error::UnsupportedUtility { .. }
                | Error::NotApplicable(_)
                | Error::DegenerateRequirement { .. } => 2,
                Error::NonConvergence { .. } | Error::NoBracket { .. } => 3,
                _ => 1,
            },
            Failure::Io(..) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Model(Error::Invalid(v)) => {
                write!(f, "invalid config")?;
                for x in v {
                    write!(f, "\n  {x}")?;
                }
                Ok(())
            }
            Failure::Model(e) => write!(f, "{e}"),
            Failure::Io(path, e) => write!(f, "{path}: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load(path: &Path) -> std::result::Result<SystemParams, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(path.display().to_string(), e))?;
    Ok(parse_config(&text)?)
}

fn write(out: Option<&Path>, text: &str) -> Outcome {
    emit(out, text).map_err(|e| {
        let name = out.map_or("stdout".to_string(), |p| p.display().to_string());
        Failure::Io(name, e)
    })
}

fn report(command: &str, system: &SystemParams) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("command".into(), json!(command));
    m.insert("config".into(), config_json(system));
    m
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result types serialize to JSON")
}

fn single_mode(mode: Mode) -> std::result::Result<bool, Failure> {
    match mode {
        Mode::Dec => Ok(false),
        Mode::Cent => Ok(true),
        Mode::Both => Err(Failure::Usage("this command needs --mode dec or --mode cent".into())),
    }
}

fn solve_mode(system: &SystemParams, planner: bool) -> Result<EquilibriumResult> {
    if planner {
        solve_centralized(system)
    } else {
        solve_decentralized(system)
    }
}

pub fn solve(io: &Io, mode: Mode) -> Outcome {
    let sys = load(&io.config)?;
    let mut rep = report("solve", &sys);
    let dec = (mode != Mode::Cent).then(|| solve_decentralized(&sys)).transpose()?;
    let cent = (mode != Mode::Dec).then(|| solve_centralized(&sys)).transpose()?;
    if let Some(d) = &dec {
        rep.insert("decentralized".into(), to_value(d));
    }
    if let Some(c) = &cent {
        rep.insert("centralized".into(), to_value(c));
    }
    if let (Some(d), Some(c)) = (&dec, &cent) {
        let ratio = |mode: RatioMode| match welfare_ratio(&sys, d, c, 0.0, &mode) {
            Ok(v) => json!(v),
            // Equal allocations mean equal welfare, whatever the sign.
            Err(Error::IllDefinedRatio { .. }) if d.allocation == c.allocation => json!(1.0),
            Err(Error::IllDefinedRatio { .. }) => Value::Null,
            Err(e) => json!(e.to_string()),
        };
        rep.insert(
            "welfare".into(),
            json!({
                "gap": welfare_gap(&sys, d, c, 0.0)?,
                "ratio_drift_only": ratio(RatioMode::DriftOnly),
                "ratio_at_initial_wealth": ratio(RatioMode::AtWealths(sys.initial_wealth.clone())),
            }),
        );
    }
    write(io.out.as_deref(), &render_json(&Value::Object(rep)))
}

struct Edge {
    from: usize,
    to: usize,
    nominal: f64,
}

fn edges(sys: &SystemParams, alloc: &Allocation) -> Vec<Edge> {
    let n = sys.n();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            if alloc.weights[i][j] > EDGE_EPS {
                out.push(Edge {
                    from: i,
                    to: j,
                    nominal: alloc.nominal(i, j, sys.initial_wealth[i]),
                });
            }
        }
    }
    out
}

pub fn network(io: &Io, mode: Mode, format: Format) -> Outcome {
    let sys = load(&io.config)?;
    let planner = single_mode(mode)?;
    let alloc = solve_mode(&sys, planner)?.allocation;
    let edges = edges(&sys, &alloc);
    let text = match format {
        Format::Dot => {
            let mut s = format!("digraph interbank_{} {{\n", if planner { "cent" } else { "dec" });
            for (i, x) in sys.initial_wealth.iter().enumerate() {
                s += &format!("  b{} [label=\"bank {}\", size={x}];\n", i + 1, i + 1);
            }
            for e in &edges {
                s += &format!("  b{} -> b{} [weight={}];\n", e.from + 1, e.to + 1, e.nominal);
            }
            s + "}\n"
        }
        Format::Csv => {
            let mut s = String::from("from,to,nominal\n");
            for e in &edges {
                s += &format!("{},{},{}\n", e.from + 1, e.to + 1, e.nominal);
            }
            s
        }
        Format::Json => {
            let mut rep = report("network", &sys);
            let list: Vec<Value> = edges
                .iter()
                .map(|e| json!({"from": e.from + 1, "to": e.to + 1, "nominal": e.nominal}))
                .collect();
            rep.insert("edges".into(), Value::Array(list));
            render_json(&Value::Object(rep))
        }
    };
    write(io.out.as_deref(), &text)
}

fn template(sys: &SystemParams) -> std::result::Result<BankParams, Failure> {
    let first = sys.banks[0];
    if sys.banks.iter().any(|b| *b != first) {
        return Err(Failure::Usage("sweep needs identical banks (use a single bank, optionally with \"n\")".into()));
    }
    Ok(first)
}

fn linear_sizes(s: &Sweep) -> std::result::Result<Vec<usize>, Failure> {
    if s.n_min < 2 || s.n_max < s.n_min {
        return Err(Failure::Usage(format!("need 2 <= n-min <= n-max, got {} and {}", s.n_min, s.n_max)));
    }
    let Some(steps) = s.steps else {
        return Ok((s.n_min..=s.n_max).collect());
    };
    if steps < 2 {
        return Ok(vec![s.n_min]);
    }
    let span = (s.n_max - s.n_min) as f64;
    let mut v: Vec<usize> = (0..steps)
        .map(|k| s.n_min + (span * k as f64 / (steps - 1) as f64).round() as usize)
        .collect();
    v.dedup();
    Ok(v)
}

pub fn sweep_wr(io: &Io, sweep: &Sweep) -> Outcome {
    let sys = load(&io.config)?;
    let bank = template(&sys)?;
    let sizes = linear_sizes(sweep)?;
    let limit = wr_limit_identical(&bank, sys.r).ok();
    let mut csv = String::from("n,wr,wr_limit,error\n");
    for n in sizes {
        let one = SystemParams::identical(bank, n, sys.r, sys.horizon);
        let wr = solve_decentralized(&one).and_then(|d| {
            let c = solve_centralized(&one)?;
            welfare_ratio(&one, &d, &c, 0.0, &RatioMode::DriftOnly)
        });
        let (value, err) = match wr {
            Ok(v) => (Some(v), String::new()),
            Err(e) => (None, e.to_string().replace(',', ";")),
        };
        csv += &format!("{n},{},{},{err}\n", csv_num(value), csv_num(limit));
    }
    write(io.out.as_deref(), &csv)
}

fn estimate(mean: f64, se: f64, expected: f64) -> Value {
    json!({"mc": mean, "se": se, "analytic": expected, "z": (mean - expected) / se})
}

pub fn simulate(io: &Io, mode: Mode, paths: usize, seed: u64, summary_out: Option<&Path>) -> Outcome {
    let sys = load(&io.config)?;
    let planner = single_mode(mode)?;
    let result = solve_mode(&sys, planner)?;
    let alloc = &result.allocation;
    let batch = simulate_paths(&sys, alloc, paths, seed, io.out.is_some())?;
    if let (Some(out), Some(p)) = (io.out.as_deref(), &batch.paths) {
        write(Some(out), &paths_csv(p))?;
    }

    // Expected log wealth is the log-utility drift whatever the bank's own utility.
    let mut log_sys = sys.clone();
    for b in &mut log_sys.banks {
        b.gamma = 1.0;
    }
    let tau = sys.horizon;
    let rates = empirical_shortage_rate(&batch);
    let banks: Vec<Value> = (0..sys.n())
        .map(|i| {
            let s = &batch.summary.banks[i];
            let b = &sys.banks[i];
            let expected_log = sys.initial_wealth[i].ln() + tau * bank_drift(&log_sys, alloc, i);
            json!({
                "bank": i + 1,
                "log_wealth": estimate(s.log_wealth.mean, s.log_wealth.std_error(), expected_log),
                "shortage_rate": estimate(rates[i].mean, rates[i].std_error, b.theta * b.shock.ccdf(alloc.cash[i]).unwrap_or(f64::NAN)),
                "shortages_per_path": s.shortages.mean,
                "shocks": s.shocks,
            })
        })
        .collect();
    let mut rep = report("simulate", &sys);
    rep.insert("mode".into(), json!(if planner { "cent" } else { "dec" }));
    rep.insert("seed".into(), json!(seed));
    rep.insert("paths".into(), json!(paths));
    rep.insert("banks".into(), Value::Array(banks));
    let acc = &batch.summary.sum_log_wealth;
    if planner {
        let v = value_centralized(&sys, &result, 0.0, &sys.initial_wealth)?;
        rep.insert("planner_value".into(), estimate(acc.mean, acc.std_error(), v));
    } else {
        let mc = estimate_value_mc(&batch, &sys)?;
        let values = mc
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let v = value_decentralized(&sys, &result, i, 0.0, sys.initial_wealth[i])?;
                Ok(estimate(e.mean, e.std_error, v))
            })
            .collect::<Result<Vec<_>>>()?;
        rep.insert("bank_values".into(), Value::Array(values));
    }
    rep.insert("total_shortages".into(), json!(batch.summary.total_shortages()));
    rep.insert("mean_system_drop".into(), json!(batch.summary.system_drop.mean));
    write(summary_out, &render_json(&Value::Object(rep)))
}

pub fn replicate(io: &Io, eta_c: &[f64]) -> Outcome {
    let sys = load(&io.config)?;
    let n = sys.n();
    let eta_c = match eta_c.len() {
        0 => sys.banks.iter().map(|b| b.eta).collect(),
        1 => vec![eta_c[0]; n],
        k if k == n => eta_c.to_vec(),
        k => return Err(Failure::Usage(format!("--eta-c has {k} values for {n} banks"))),
    };
    let rep_result = interbank_eq::replicate(&sys, &eta_c)?;
    let rows: Vec<Value> = (0..n)
        .map(|i| {
            json!({
                "bank": i + 1,
                "eta_c": rep_result.eta_c[i],
                "eta_d": rep_result.eta_d[i],
                "planner_cash": rep_result.planner_cash[i],
                "replicated_cash": rep_result.replicated_cash[i],
                "residual": rep_result.residuals[i],
            })
        })
        .collect();
    let mut rep = report("replicate", &sys);
    rep.insert("banks".into(), Value::Array(rows));
    rep.insert(
        "max_residual".into(),
        json!(rep_result.residuals.iter().cloned().fold(0.0, f64::max)),
    );
    write(io.out.as_deref(), &render_json(&Value::Object(rep)))
}

pub fn extensions(io: &Io, variant: Variant, alpha: f64) -> Outcome {
    let sys = load(&io.config)?;
    let mut rep = report("extensions", &sys);
    let (name, body) = match variant {
        Variant::Loss => ("loss", to_value(&solve_ext_liquidity_loss(&sys)?)),
        Variant::Bond => {
            rep.insert("alpha".into(), json!(alpha));
            ("bond", to_value(&solve_ext_partial_bond(&sys, alpha)?))
        }
        Variant::Eta => {
            let rows = sys
                .banks
                .iter()
                .map(|b| solve_ext_endogenous_eta(b, sys.r).map(|x| to_value(&x)))
                .collect::<Result<Vec<_>>>()?;
            ("eta", Value::Array(rows))
        }
    };
    rep.insert("variant".into(), json!(name));
    rep.insert("result".into(), body);
    write(io.out.as_deref(), &render_json(&Value::Object(rep)))
}

fn log_sizes(n_min: usize, n_max: usize, steps: usize) -> std::result::Result<Vec<usize>, Failure> {
    if n_min < 2 || n_max < n_min || steps == 0 {
        return Err(Failure::Usage(format!(
            "need 2 <= n-min <= n-max and steps >= 1, got {n_min}, {n_max}, {steps}"
        )));
    }
    if steps == 1 {
        return Ok(vec![n_min]);
    }
    let ratio = (n_max as f64 / n_min as f64).ln();
    let mut v: Vec<usize> = (0..steps)
        .map(|k| (n_min as f64 * (ratio * k as f64 / (steps - 1) as f64).exp()).round() as usize)
        .collect();
    v.dedup();
    Ok(v)
}

pub fn bounds(io: &Io, n_min: usize, n_max: usize, steps: usize, format: Format) -> Outcome {
    let sys = load(&io.config)?;
    let bank = sys.banks[0];
    let sizes = log_sizes(n_min, n_max, steps)?;
    let rows = asymptotic_rates_report(&bank, &sizes, sys.r)?;
    let ctx = BoundContext::from_banks(&[bank], sys.r)?;
    let mut sandwich = Vec::with_capacity(rows.len());
    for row in &rows {
        let (lo, hi, detail) = match bank.shock {
            ShockDistribution::Exponential { .. } => {
                let b = planner_cash_bounds_exponential(&bank, &ctx, row.n)?;
                let lo = b.simple_lb.into_iter().chain(b.refined_lb).reduce(f64::max);
                (lo, b.refined_ub, to_value(&b))
            }
            ShockDistribution::PowerLaw { .. } => {
                let b = planner_cash_bounds_power(&bank, &ctx, row.n)?;
                let lo = b.simple_lb.into_iter().chain(b.lb).reduce(f64::max);
                (lo, b.ub, to_value(&b))
            }
        };
        sandwich.push((lo, hi, detail));
    }
    let text = match format {
        Format::Csv => {
            let mut s = String::from("n,c_star,ccdf_c_star,w_star,sys_loss,lower,upper\n");
            for (row, (lo, hi, _)) in rows.iter().zip(&sandwich) {
                s += &format!(
                    "{},{},{},{},{},{},{}\n",
                    row.n,
                    row.c_star,
                    row.ccdf_c_star,
                    row.w_star,
                    row.sys_loss,
                    csv_num(*lo),
                    csv_num(*hi)
                );
            }
            s
        }
        Format::Json => {
            let mut rep = report("bounds", &sys);
            let list: Vec<Value> = rows
                .iter()
                .zip(sandwich)
                .map(|(row, (_, _, detail))| json!({"rates": to_value(row), "bounds": detail}))
                .collect();
            rep.insert("rows".into(), Value::Array(list));
            render_json(&Value::Object(rep))
        }
        Format::Dot => return Err(Failure::Usage("bounds supports --format csv or json".into())),
    };
    write(io.out.as_deref(), &text)
}
