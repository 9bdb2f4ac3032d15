//! Command-line front end: analyze expressions, run the checkers,
//! reproduce the built-in tables, and emit plot data.
//!
//! Output is deterministic: the seed fixes all sampling, and identical
//! configurations produce byte-identical machine-readable output. Exit
//! codes: 0 = verdicts as expected / no violations, 1 = refutation or
//! violation found, 2 = usage or parse error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::amenability::{check_amenability, AmenabilityReport, Verdict};
use crate::catalog::{reproduce_tables, ExpectedVerdict, FailureMode, VerifyReport, DEFAULT_SEED};
use crate::compatibility::{check_compatible, CompatReport, CompatVerdict};
use crate::conditioning::{cond_report, CondReport};
use crate::expr::parse;
use crate::interval::IntervalDomain;
use crate::real::Real;
use crate::roots::ScanPolicy;
use crate::stability::{
    check_profile, forward_profile, geometric_samples, StabilityKind, StabilityVerdict,
    DEFAULT_SAMPLES_PER_COMPONENT, DEFAULT_T_SET,
};

#[derive(Parser, Debug)]
#[command(
    name = "amenable-kit",
    version,
    about = "Condition numbers, amenability and compatibility checks, and \
             floating-point stability experiments for univariate expressions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Report κ, μ, H, G at one point or as a sweep over the domain.
    Analyze {
        /// Expression in x, e.g. "sin(log(x))".
        #[arg(long)]
        expr: String,
        /// Domain as an interval or union, e.g. "(0, inf)" or "(-pi, pi)".
        #[arg(long, default_value = "(-inf, inf)")]
        domain: String,
        /// Evaluation point; omit for a sweep over the domain.
        #[arg(long)]
        x: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Check the amenability criteria on every component of the domain.
    Amenable {
        #[arg(long)]
        expr: String,
        #[arg(long, default_value = "(-inf, inf)")]
        domain: String,
        #[command(flatten)]
        common: Common,
    },
    /// Check compatibility of an outer g with an inner h on h's domain.
    Compatible {
        /// Outer expression g.
        #[arg(long)]
        g: String,
        /// Inner expression h.
        #[arg(long)]
        h: String,
        #[arg(long, default_value = "(-inf, inf)")]
        domain: String,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate a backward/mixed/forward stability constant empirically.
    Stability {
        #[arg(long)]
        expr: String,
        #[arg(long, default_value = "(-inf, inf)")]
        domain: String,
        /// Which definition to test.
        #[arg(long, value_enum, default_value_t = KindArg::Forward)]
        kind: KindArg,
        #[command(flatten)]
        common: Common,
    },
    /// Re-verify every built-in catalog entry against its expected row.
    Tables {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Debug)]
pub struct Common {
    /// Precisions (mantissa bits) for the simulated floating-point runs.
    #[arg(long = "t-set", value_delimiter = ',')]
    pub t_set: Vec<u32>,
    /// Sample count per domain component.
    #[arg(long, default_value_t = DEFAULT_SAMPLES_PER_COMPONENT)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Human)]
    pub format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Human,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Backward,
    Mixed,
    Forward,
}

impl KindArg {
    fn to_kind(self) -> StabilityKind {
        match self {
            KindArg::Backward => StabilityKind::Backward,
            KindArg::Mixed => StabilityKind::Mixed,
            KindArg::Forward => StabilityKind::Forward,
        }
    }
    fn name(self) -> &'static str {
        match self {
            KindArg::Backward => "backward",
            KindArg::Mixed => "mixed",
            KindArg::Forward => "forward",
        }
    }
}

/// Parses the process arguments and runs the selected command, returning
/// the process exit code.
pub fn run() -> u8 {
    if let Ok(v) = std::env::var("AMENABLE_KIT_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            return 2;
        }
    };
    match dispatch(&cli.command) {
        Ok((text, code)) => {
            let out = match &cli.command {
                Command::Analyze { common, .. }
                | Command::Amenable { common, .. }
                | Command::Compatible { common, .. }
                | Command::Stability { common, .. }
                | Command::Tables { common } => common.out.as_ref(),
            };
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return 2;
                    }
                }
                None => println!("{text}"),
            }
            code
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn dispatch(cmd: &Command) -> Result<(String, u8), String> {
    match cmd {
        Command::Analyze { expr, domain, x, common } => cmd_analyze(expr, domain, *x, common),
        Command::Amenable { expr, domain, common } => cmd_amenable(expr, domain, common),
        Command::Compatible { g, h, domain, common } => cmd_compatible(g, h, domain, common),
        Command::Stability { expr, domain, kind, common } => {
            cmd_stability(expr, domain, *kind, common)
        }
        Command::Tables { common } => cmd_tables(common),
    }
}

fn parse_inputs(expr: &str, domain: &str) -> Result<(crate::expr::Expr, IntervalDomain), String> {
    let f = parse(expr).map_err(|e| format!("cannot parse expression {expr:?}: {e}"))?;
    let dom =
        IntervalDomain::parse(domain).map_err(|e| format!("cannot parse domain {domain:?}: {e}"))?;
    Ok((f, dom))
}

fn config_value(cmd: &str, fields: &[(&str, Value)], common: &Common) -> Value {
    let mut cfg = serde_json::Map::new();
    cfg.insert("command".into(), json!(cmd));
    for (k, v) in fields {
        cfg.insert((*k).into(), v.clone());
    }
    cfg.insert("t_set".into(), json!(effective_t_set(common)));
    cfg.insert("samples".into(), json!(common.samples));
    cfg.insert("seed".into(), json!(common.seed));
    cfg.insert(
        "format".into(),
        json!(match common.format {
            FormatArg::Human => "human",
            FormatArg::Json => "json",
            FormatArg::Csv => "csv",
        }),
    );
    cfg.insert("out".into(), json!(common.out.as_ref().map(|p| p.display().to_string())));
    Value::Object(cfg)
}

fn envelope(config: Value, report: Value) -> String {
    let doc = json!({ "schema": "amenable-kit/1", "config": config, "report": report });
    serde_json::to_string_pretty(&doc).expect("serializable")
}

fn effective_t_set(common: &Common) -> Vec<u32> {
    if common.t_set.is_empty() {
        DEFAULT_T_SET.to_vec()
    } else {
        common.t_set.clone()
    }
}

/// JSON number when finite, string otherwise (JSON has no ±∞/NaN).
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("degenerate")
    } else {
        json!(if v > 0.0 { "inf" } else { "-inf" })
    }
}

fn csv_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        (if v > 0.0 { "inf" } else { "-inf" }).into()
    } else {
        format!("{v}")
    }
}

// ---------------------------------------------------------------- analyze

fn cond_row(r: &CondReport) -> [f64; 8] {
    [
        r.x,
        r.f,
        r.fprime,
        r.fsecond,
        r.kappa.to_f64(),
        r.mu_f64(),
        r.h.to_f64(),
        r.g.to_f64(),
    ]
}

const CSV_HEADER: &str = "x,f,fprime,fsecond,kappa,mu,H,G";

fn cmd_analyze(
    expr: &str,
    domain: &str,
    at: Option<f64>,
    common: &Common,
) -> Result<(String, u8), String> {
    let (f, dom) = parse_inputs(expr, domain)?;
    let reports: Vec<CondReport> = match at {
        Some(x) => {
            if !dom.contains(x) {
                return Err(format!("x = {x} is outside the domain {domain}"));
            }
            vec![cond_report(&f, &Real::from_f64(x)).map_err(|e| format!("at x = {x}: {e}"))?]
        }
        None => {
            let mut xs: Vec<f64> = dom
                .split_at_zero()
                .components()
                .iter()
                .flat_map(|iv| geometric_samples(iv, common.samples, common.seed))
                .collect();
            xs.sort_by(f64::total_cmp);
            xs.iter().filter_map(|&x| cond_report(&f, &Real::from_f64(x)).ok()).collect()
        }
    };
    if reports.is_empty() {
        return Err("no evaluable sample points in the domain".into());
    }
    let config = config_value(
        "analyze",
        &[("expr", json!(expr)), ("domain", json!(domain)), ("x", json!(at))],
        common,
    );
    let text = match common.format {
        FormatArg::Csv => {
            let mut out = String::from(CSV_HEADER);
            for r in &reports {
                out.push('\n');
                out.push_str(&cond_row(r).map(csv_num).join(","));
            }
            out
        }
        FormatArg::Json => {
            let rows: Vec<Value> = reports
                .iter()
                .map(|r| {
                    let [x, fv, d1, d2, k, m, h, g] = cond_row(r);
                    json!({
                        "x": num(x), "f": num(fv), "fprime": num(d1), "fsecond": num(d2),
                        "kappa": num(k), "mu": num(m), "H": num(h), "G": num(g)
                    })
                })
                .collect();
            envelope(config, json!(rows))
        }
        FormatArg::Human => {
            let mut out = format!("analyze {expr} on {domain}\n");
            out.push_str(&format!("{:>14} {:>14} {:>14} {:>14} {:>14}\n", "x", "kappa", "mu", "H", "G"));
            for r in &reports {
                let [x, _, _, _, k, m, h, g] = cond_row(r);
                out.push_str(&format!(
                    "{:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}\n",
                    x, k, m, h, g
                ));
            }
            let max_h = reports
                .iter()
                .map(|r| r.h.to_f64().abs())
                .filter(|v| v.is_finite())
                .fold(0.0f64, f64::max);
            out.push_str(&format!("max |H| over {} points: {max_h:.6}", reports.len()));
            out
        }
    };
    Ok((text, 0))
}

// --------------------------------------------------------------- amenable

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Supported => "supported",
        Verdict::Refuted => "refuted",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn amenability_value(rep: &AmenabilityReport) -> Value {
    let comps: Vec<Value> = rep
        .components
        .iter()
        .map(|c| {
            let defects: Vec<Value> = c
                .defects
                .iter()
                .map(|d| {
                    json!({
                        "C": d.c, "x": num(d.x), "y": num(d.y),
                        "kind": format!("{:?}", d.kind)
                    })
                })
                .collect();
            json!({
                "component": c.component.to_string(),
                "reflected": c.reflected,
                "proposition": c.proposition.name(),
                "item1": { "verdict": format!("{:?}", c.item1.verdict), "note": c.item1.note,
                           "witnesses": c.item1.witnesses },
                "item2": { "verdict": format!("{:?}", c.item2.verdict), "note": c.item2.note,
                           "limsup": c.item2.limsup.map(num) },
                "defects": defects,
                "verdict": verdict_str(c.overall)
            })
        })
        .collect();
    json!({ "verdict": verdict_str(rep.overall), "components": comps })
}

fn cmd_amenable(expr: &str, domain: &str, common: &Common) -> Result<(String, u8), String> {
    let (f, dom) = parse_inputs(expr, domain)?;
    let rep = check_amenability(&f, &dom, &ScanPolicy::coarse());
    let code = u8::from(rep.overall == Verdict::Refuted);
    let config =
        config_value("amenable", &[("expr", json!(expr)), ("domain", json!(domain))], common);
    let text = match common.format {
        FormatArg::Json => envelope(config, amenability_value(&rep)),
        FormatArg::Csv => return Err("csv output is only available for analyze and tables".into()),
        FormatArg::Human => {
            let mut out = format!("amenable {expr} on {domain}: {}\n", verdict_str(rep.overall));
            for c in &rep.components {
                out.push_str(&format!(
                    "  {} [{}{}]: {} — item1 {:?} ({}); item2 {:?} ({})\n",
                    c.component,
                    c.proposition.name(),
                    if c.reflected { ", reflected" } else { "" },
                    verdict_str(c.overall),
                    c.item1.verdict,
                    c.item1.note,
                    c.item2.verdict,
                    c.item2.note,
                ));
                for d in &c.defects {
                    out.push_str(&format!(
                        "    defect at C = {}: x = {:e}, y = {:e} ({:?})\n",
                        d.c, d.x, d.y, d.kind
                    ));
                }
            }
            out.trim_end().to_string()
        }
    };
    Ok((text, code))
}

// ------------------------------------------------------------- compatible

fn compat_value(rep: &CompatReport) -> Value {
    json!({
        "verdict": format!("{:?}", rep.verdict).to_lowercase(),
        "sup_A": num(rep.sup_a),
        "sup_B": num(rep.sup_b),
        "cases": { "case1": rep.case_log.case1, "case2": rep.case_log.case2,
                   "case3": rep.case_log.case3, "case4": rep.case_log.case4 },
        "image_violations": rep.image_violations,
        "witness": rep.witness,
        "note": rep.note
    })
}

fn cmd_compatible(
    gs: &str,
    hs: &str,
    domain: &str,
    common: &Common,
) -> Result<(String, u8), String> {
    let (g, _) = parse_inputs(gs, "(-inf, inf)")?;
    let (h, dom) = parse_inputs(hs, domain)?;
    let rep = check_compatible(&g, &h, &dom, common.samples, common.seed, &ScanPolicy::coarse());
    let code = u8::from(rep.verdict == CompatVerdict::Refuted);
    let config = config_value(
        "compatible",
        &[("g", json!(gs)), ("h", json!(hs)), ("domain", json!(domain))],
        common,
    );
    let text = match common.format {
        FormatArg::Json => envelope(config, compat_value(&rep)),
        FormatArg::Csv => return Err("csv output is only available for analyze and tables".into()),
        FormatArg::Human => {
            let mut out = format!(
                "compatible g = {gs}, h = {hs} on {domain}: {:?}\n\
                 sup A = {}, sup B = {} (cases 1/2/3/4: {}/{}/{}/{}, image violations: {})\n\
                 {}",
                rep.verdict,
                csv_num(rep.sup_a),
                csv_num(rep.sup_b),
                rep.case_log.case1,
                rep.case_log.case2,
                rep.case_log.case3,
                rep.case_log.case4,
                rep.image_violations,
                rep.note,
            );
            if !rep.witness.is_empty() {
                out.push_str(&format!("\nwitness sequence: {:?}", rep.witness));
            }
            out
        }
    };
    Ok((text, code))
}

// -------------------------------------------------------------- stability

fn stability_value(rep: &StabilityVerdict) -> Value {
    json!({
        "kind": format!("{:?}", rep.kind).to_lowercase(),
        "estimated_C": rep.estimated_c.map(num),
        "checked_samples": rep.samples.len(),
        "skipped_infinite_mu": rep.skipped_infinite_mu,
        "not_checkable": rep.not_checkable,
        "violations": rep.violations
    })
}

fn cmd_stability(
    expr: &str,
    domain: &str,
    kind: KindArg,
    common: &Common,
) -> Result<(String, u8), String> {
    let (f, dom) = parse_inputs(expr, domain)?;
    let xs: Vec<f64> = dom
        .split_at_zero()
        .components()
        .iter()
        .flat_map(|iv| geometric_samples(iv, common.samples, common.seed))
        .collect();
    if xs.is_empty() {
        return Err("no sample points in the domain".into());
    }
    let ts = effective_t_set(common);
    let rep = match kind.to_kind() {
        StabilityKind::Forward => forward_profile(&f, &dom, &xs, &ts),
        k => check_profile(k, &f, &dom, &xs, &ts),
    };
    let code = u8::from(!rep.violations.is_empty());
    let config = config_value(
        "stability",
        &[("expr", json!(expr)), ("domain", json!(domain)), ("kind", json!(kind.name()))],
        common,
    );
    let text = match common.format {
        FormatArg::Json => envelope(config, stability_value(&rep)),
        FormatArg::Csv => return Err("csv output is only available for analyze and tables".into()),
        FormatArg::Human => {
            let mut out = format!(
                "{} stability of {expr} on {domain} over t = {ts:?}\n\
                 estimated C: {} ({} samples, {} skipped at infinite mu, {} not checkable)",
                kind.name(),
                rep.estimated_c.map_or("diverged".into(), |c| format!("{c:.6}")),
                rep.samples.len(),
                rep.skipped_infinite_mu,
                rep.not_checkable,
            );
            for v in rep.violations.iter().take(10) {
                out.push_str(&format!("\nviolation: {v}"));
            }
            out
        }
    };
    Ok((text, code))
}

// ----------------------------------------------------------------- tables

fn expected_str(e: &ExpectedVerdict) -> &'static str {
    match e {
        ExpectedVerdict::Amenable => "amenable",
        ExpectedVerdict::NonAmenable(FailureMode::Item1) => "non-amenable(item-1)",
        ExpectedVerdict::NonAmenable(FailureMode::Item2) => "non-amenable(item-2)",
    }
}

fn table_row_value(r: &VerifyReport) -> Value {
    json!({
        "id": r.id,
        "source": r.source,
        "expected": expected_str(&r.expected),
        "verdict": verdict_str(r.verdict),
        "kappa_points": r.kappa_points,
        "kappa_max_rel": num(r.kappa_max_rel),
        "h_sup": r.h_sup.map(num),
        "h_bound": r.h_bound.map(num),
        "witnesses": r.witnesses,
        "ok": r.ok(),
        "problems": r.problems
    })
}

fn cmd_tables(common: &Common) -> Result<(String, u8), String> {
    let rows = reproduce_tables();
    let code = u8::from(rows.iter().any(|r| !r.ok()));
    let config = config_value("tables", &[], common);
    let text = match common.format {
        FormatArg::Json => {
            let vals: Vec<Value> = rows.iter().map(table_row_value).collect();
            envelope(config, json!(vals))
        }
        FormatArg::Csv => {
            let mut out =
                String::from("id,source,expected,verdict,kappa_points,kappa_max_rel,h_sup,h_bound,ok");
            for r in &rows {
                out.push_str(&format!(
                    "\n{},{},{},{},{},{},{},{},{}",
                    r.id,
                    r.source,
                    expected_str(&r.expected),
                    verdict_str(r.verdict),
                    r.kappa_points,
                    csv_num(r.kappa_max_rel),
                    r.h_sup.map_or(String::new(), |v| csv_num(v)),
                    r.h_bound.map_or(String::new(), |v| csv_num(v)),
                    r.ok(),
                ));
            }
            out
        }
        FormatArg::Human => {
            let mut out = String::new();
            for r in &rows {
                out.push_str(&format!(
                    "{:<18} {:<22} {:<12} κ: {} pts, max rel {:.2e}{} — {}\n",
                    r.id,
                    r.source,
                    verdict_str(r.verdict),
                    r.kappa_points,
                    r.kappa_max_rel,
                    match (r.h_sup, r.h_bound) {
                        (Some(s), Some(b)) => format!("; sup|H| {s:.4} ≤ {b:.4}"),
                        (Some(s), None) => format!("; sup|H| {s:.4}"),
                        _ => String::new(),
                    },
                    if r.ok() { "ok" } else { "PROBLEMS" },
                ));
                for p in &r.problems {
                    out.push_str(&format!("    {p}\n"));
                }
            }
            out.push_str(&format!(
                "{} rows, {} ok",
                rows.len(),
                rows.iter().filter(|r| r.ok()).count()
            ));
            out
        }
    };
    Ok((text, code))
}
