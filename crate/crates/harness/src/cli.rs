use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use bmv_core::control::{approximate_value, check_dpp, Budget, PolicyFamily, SimplexOptions, ValueProblem};
use bmv_core::dynamics::{check_first_moment_bound, simulate, terminal_count, Construction, InitLaw, SimConfig};
use bmv_core::measures::io::parse_measure;
use bmv_core::measures::AtomicMeasure;
use bmv_core::metrics::{
    domination_constant, rho_f, sobolev_neg_norm, truncated_w1_auto, LambdaIndex, QuadratureScheme,
};

use crate::config::{self, parse_config, ResolvedConfig, Schema, Source};
use crate::error::{ErrorKind, HarnessError, Result};
use crate::manifest::RunManifest;
use crate::output::{num, Format, Outcome, Table};
use crate::registry::{build_cost, build_model, build_policy};
use crate::suites::{run_suite, BATTERIES, SUITES};

#[derive(Debug, Parser)]
#[command(name = "bmv", version, about = "Controlled branching McKean-Vlasov diffusions: metrics, simulation, control")]
pub struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 picks the default). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Directory for manifest.json, report.json and CSV tables.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Distance between two measure files.
    Metric(MetricArgs),
    /// Simulate the controlled branching system under a fixed policy.
    Simulate(SimulateArgs),
    /// Approximate the value function over a policy family.
    Value(ValueArgs),
    /// Compare the value with its dynamic-programming split.
    Dpp(DppArgs),
    /// Run a registered instance battery.
    Check {
        #[arg(long)]
        suite: String,
    },
    /// Run a registered acceptance suite.
    Suite { name: String },
}

#[derive(Debug, Args)]
pub struct MetricArgs {
    pub a: Option<String>,
    pub b: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub metric: Option<String>,
    /// Pick λ from the dimension rule (the default).
    #[arg(long, conflicts_with = "lambda")]
    pub lambda_auto: bool,
    #[arg(long)]
    pub lambda: Option<u32>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub quadrature: Option<String>,
    /// Cemetery position, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    pub base: Option<String>,
    /// Also report the domination constant.
    #[arg(long)]
    pub constant: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Initial measure file.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long = "T", allow_hyphen_values = true)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub construction: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long)]
    pub t0: Option<f64>,
    /// Record every stride-th grid time; 0 keeps the endpoints only.
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ValueArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub cost: Option<PathBuf>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DppArgs {
    #[command(flatten)]
    pub value: ValueArgs,
    /// Defaults to the midpoint of [t, T].
    #[arg(long)]
    pub split_time: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
}

fn push<T: ToString>(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<T>) {
    if let Some(v) = v {
        out.push((key, v.to_string()));
    }
}

/// Reads an optional config file and resolves it with flag overrides.
fn resolve(
    manifest: &mut RunManifest,
    role: &str,
    path: Option<&Path>,
    schema: &Schema,
    overrides: &[(&str, String)],
) -> Result<ResolvedConfig> {
    let text = match path {
        Some(p) => manifest.read_input(role, p)?,
        None => String::new(),
    };
    parse_config(&text, schema, overrides)
        .map_err(|e| HarnessError::new(e.kind, format!("{}{}", path.map(|p| format!("{}: ", p.display())).unwrap_or_default(), e.message)))
}

/// File paths named inside a config file are relative to that file.
fn input_path(c: &ResolvedConfig, key: &str, config_file: Option<&Path>) -> PathBuf {
    let raw = PathBuf::from(c.str(key));
    match (&c.entries[key].source, config_file.and_then(Path::parent)) {
        (Source::Line(_), Some(dir)) if raw.is_relative() => dir.join(raw),
        _ => raw,
    }
}

fn read_measure(manifest: &mut RunManifest, role: &str, path: &Path) -> Result<AtomicMeasure> {
    let text = manifest.read_input(role, path)?;
    parse_measure(&text).map_err(|e| HarnessError::new(ErrorKind::Parse, format!("{}: {e}", path.display())))
}

fn construction(c: &ResolvedConfig) -> Construction {
    match c.str("construction") {
        "poissonized" => Construction::Poissonized,
        _ => Construction::Rounded,
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Metric(a) => metric(a, cli.seed),
        Command::Simulate(a) => simulate_cmd(a, cli.seed),
        Command::Value(a) => value_cmd(a, cli.seed),
        Command::Dpp(a) => dpp_cmd(a, cli.seed),
        Command::Check { suite } => suite_cmd("check", suite, BATTERIES, cli.seed),
        Command::Suite { name } => suite_cmd("suite", name, SUITES, cli.seed),
    }
}

fn metric(a: &MetricArgs, seed: u64) -> Result<Outcome> {
    let mut manifest = RunManifest::new("metric", seed);
    let mut ov = Vec::new();
    push(&mut ov, "metric.a", &a.a);
    push(&mut ov, "metric.b", &a.b);
    push(&mut ov, "metric.kind", &a.metric);
    if a.lambda_auto {
        ov.push(("metric.lambda", "auto".into()));
    }
    push(&mut ov, "metric.lambda", &a.lambda);
    push(&mut ov, "metric.radius", &a.radius);
    push(&mut ov, "metric.nodes", &a.nodes);
    push(&mut ov, "metric.quadrature", &a.quadrature);
    push(&mut ov, "metric.base", &a.base);
    if a.constant {
        ov.push(("metric.constant", "true".into()));
    }
    let c = resolve(&mut manifest, "config", a.config.as_deref(), &config::METRIC, &ov)?;
    let m1 = read_measure(&mut manifest, "measure_a", &input_path(&c, "metric.a", a.config.as_deref()))?;
    let m2 = read_measure(&mut manifest, "measure_b", &input_path(&c, "metric.b", a.config.as_deref()))?;
    let d = m1.dim();
    let idx = match c.str("metric.lambda") {
        "auto" => LambdaIndex::for_dim(d),
        raw => {
            let lambda = raw
                .parse()
                .map_err(|_| HarnessError::config(format!("key 'metric.lambda' expects auto or an integer, got '{raw}'")))?;
            LambdaIndex::new(d, lambda)?
        }
    };
    let (radius, nodes) = (c.f64("metric.radius"), c.count("metric.nodes")?);
    let scheme = match c.str("metric.quadrature") {
        "closed_form" => QuadratureScheme::closed_form(),
        "grid" => QuadratureScheme::grid(radius, nodes),
        _ if d == 1 => QuadratureScheme::closed_form(),
        _ => QuadratureScheme::default_for(d),
    };
    let mut result = match c.str("metric.kind") {
        "w1" => {
            let base = if c.floats("metric.base").is_empty() {
                vec![0.0; d]
            } else {
                c.floats("metric.base").to_vec()
            };
            json!({"value": truncated_w1_auto(&m1, &m2, &base)?, "scheme": null, "tail_bound": 0.0})
        }
        kind => {
            let v = if kind == "sobolev" {
                sobolev_neg_norm(&m1, &m2, idx, scheme)?
            } else {
                rho_f(&m1, &m2, idx, scheme)?
            };
            json!({"value": v.value, "scheme": v.scheme, "tail_bound": v.tail_bound, "lambda": idx.lambda})
        }
    };
    if c.bool("metric.constant") {
        result["constant_C"] = json!(domination_constant(idx, radius, nodes)?);
    }
    manifest.config = c;
    Ok(Outcome {
        manifest,
        result,
        tables: Vec::new(),
        failed: false,
        timings: None,
    })
}

fn run_overrides(r: &RunArgs) -> Vec<(&'static str, String)> {
    let mut ov = Vec::new();
    push(&mut ov, "init", &r.init);
    push(&mut ov, "t_end", &r.t_end);
    push(&mut ov, "dt", &r.dt);
    push(&mut ov, "replicas", &r.replicas);
    push(&mut ov, "construction", &r.construction);
    ov
}

fn simulate_cmd(a: &SimulateArgs, seed: u64) -> Result<Outcome> {
    let mut manifest = RunManifest::new("simulate", seed);
    let model_cfg = resolve(&mut manifest, "model", Some(&a.run.model), &config::MODEL, &[])?;
    let policy_cfg = resolve(&mut manifest, "policy", a.policy.as_deref(), &config::POLICY, &[])?;
    let mut ov = run_overrides(&a.run);
    push(&mut ov, "t0", &a.t0);
    push(&mut ov, "stride", &a.stride);
    let run = resolve(&mut manifest, "config", a.run.config.as_deref(), &config::SIMULATE_RUN, &ov)?;
    let model = build_model(&model_cfg)?;
    let policy = build_policy(&policy_cfg, &model)?;
    let nu = read_measure(&mut manifest, "init", &input_path(&run, "init", a.run.config.as_deref()))?;
    let init = InitLaw::from_measure(nu, construction(&run));
    let cfg = SimConfig::new(run.f64("t0"), run.f64("t_end"), run.f64("dt"), run.count("replicas")?, seed)
        .with_stride(run.count("stride")?);
    let path = simulate(&model.spec, &policy, &init, &cfg)?;

    let d = path.dim;
    let mut moments: Vec<String> = vec!["time".into(), "mass".into()];
    moments.extend((1..=d).map(|i| format!("first_moment_{i}")));
    let mut mt = Table::new("moments", &[]);
    mt.header = moments;
    for (i, t) in path.grid_times().into_iter().enumerate() {
        let mut row = vec![num(t), num(path.mass[i])];
        row.extend(path.first_moment[i].iter().map(|v| num(*v)));
        mt.rows.push(row);
    }
    let mut pt = Table::new("positions", &[]);
    pt.header = ["time", "replica", "label"].iter().map(|s| s.to_string()).collect();
    pt.header.extend((1..=d).map(|i| format!("x{i}")));
    for t in path.recorded_times() {
        for (r, conf) in path.configurations(t)?.iter().enumerate() {
            for (label, x) in conf.particles() {
                let mut row = vec![num(t), r.to_string(), label.to_string()];
                row.extend(x.iter().map(|v| num(*v)));
                pt.rows.push(row);
            }
        }
    }
    let mut et = Table::new("events", &["step", "time", "replica", "parent", "offspring"]);
    for e in &path.events {
        et.rows.push(vec![
            e.step.to_string(),
            num(e.time),
            e.replica.to_string(),
            e.parent.to_string(),
            e.offspring.to_string(),
        ]);
    }
    let (count, count_se) = terminal_count(&path);
    let bound = check_first_moment_bound(&model.spec, &path);
    let result = json!({
        "t0": path.t0(),
        "t_end": path.t_end(),
        "dt": path.dt,
        "replicas": path.replicas,
        "steps": path.steps(),
        "terminal_mass": path.mass.last(),
        "terminal_count": {"mean": count, "stderr": count_se},
        "first_moment_bound": bound,
        "events": path.events.len(),
        "policy": policy,
    });
    manifest.config.absorb("model", model_cfg);
    manifest.config.absorb("policy", policy_cfg);
    manifest.config.absorb("run", run);
    Ok(Outcome {
        manifest,
        result,
        tables: vec![mt, pt, et],
        failed: false,
        timings: None,
    })
}

struct ValueSetup {
    manifest: RunManifest,
    problem: ValueProblem,
    nu: AtomicMeasure,
    run: ResolvedConfig,
    family: PolicyFamily,
    budget: Budget,
}

fn value_setup(a: &ValueArgs, extra: Vec<(&'static str, String)>, name: &str, seed: u64) -> Result<ValueSetup> {
    let mut manifest = RunManifest::new(name, seed);
    let model_cfg = resolve(&mut manifest, "model", Some(&a.run.model), &config::MODEL, &[])?;
    let cost_cfg = resolve(&mut manifest, "cost", a.cost.as_deref(), &config::COST, &[])?;
    let mut ov = run_overrides(&a.run);
    push(&mut ov, "t", &a.t);
    push(&mut ov, "family", &a.family);
    push(&mut ov, "restarts", &a.restarts);
    push(&mut ov, "iters", &a.iters);
    ov.extend(extra);
    let run = resolve(&mut manifest, "config", a.run.config.as_deref(), &config::VALUE_RUN, &ov)?;
    let model = build_model(&model_cfg)?;
    let cost = build_cost(&cost_cfg, &model)?;
    let nu = read_measure(&mut manifest, "init", &input_path(&run, "init", a.run.config.as_deref()))?;
    let iterations = run.count("iters")?;
    let problem = ValueProblem {
        model: model.spec.clone(),
        cost,
        t_end: run.f64("t_end"),
        dt: run.f64("dt"),
        seed,
        action_lo: model.action_lo.clone(),
        action_hi: model.action_hi.clone(),
        construction: construction(&run),
        simplex: SimplexOptions {
            max_iterations: iterations,
            x_tol: run.f64("x_tol"),
            f_tol: run.f64("f_tol"),
        },
    };
    let family: PolicyFamily = run.str("family").parse()?;
    let budget = Budget {
        restarts: run.count("restarts")?,
        iterations,
        replicas: run.count("replicas")?,
    };
    manifest.config.absorb("model", model_cfg);
    manifest.config.absorb("cost", cost_cfg);
    Ok(ValueSetup {
        manifest,
        problem,
        nu,
        run,
        family,
        budget,
    })
}

fn value_cmd(a: &ValueArgs, seed: u64) -> Result<Outcome> {
    let mut s = value_setup(a, Vec::new(), "value", seed)?;
    let v = approximate_value(&s.problem, &s.nu, s.run.f64("t"), s.family, s.budget)?;
    let mut trace = Table::new("trace", &["evaluation", "best_value"]);
    for (i, b) in v.trace.iter().enumerate() {
        trace.rows.push(vec![i.to_string(), num(*b)]);
    }
    s.manifest.config.absorb("run", s.run);
    Ok(Outcome {
        manifest: s.manifest,
        result: serde_json::to_value(&v)?,
        tables: vec![trace],
        failed: false,
        timings: None,
    })
}

fn dpp_cmd(a: &DppArgs, seed: u64) -> Result<Outcome> {
    let mut extra = Vec::new();
    push(&mut extra, "split_time", &a.split_time);
    push(&mut extra, "tolerance", &a.tolerance);
    let mut s = value_setup(&a.value, extra, "dpp", seed)?;
    let t = s.run.f64("t");
    let split = s.run.opt_f64("split_time").unwrap_or(0.5 * (t + s.problem.t_end));
    let r = check_dpp(&s.problem, &s.nu, t, split, s.family, s.budget, s.run.f64("tolerance"))?;
    s.manifest.config.absorb("run", s.run);
    Ok(Outcome {
        manifest: s.manifest,
        result: serde_json::to_value(&r)?,
        tables: Vec::new(),
        failed: false,
        timings: None,
    })
}

const SUITE_SCHEMA: Schema = Schema {
    name: "suite",
    keys: &[config::KeySpec {
        name: "name",
        kind: config::Kind::Str,
        default: None,
    }],
};

fn suite_cmd(sub: &str, name: &str, allowed: &[&str], seed: u64) -> Result<Outcome> {
    if !allowed.contains(&name) {
        return Err(HarnessError::new(
            ErrorKind::Suite,
            format!(
                "unregistered {} '{name}' (known: {})",
                if sub == "check" { "check battery" } else { "suite" },
                allowed.join(", ")
            ),
        ));
    }
    let mut manifest = RunManifest::new(sub, seed);
    manifest.config = parse_config("", &SUITE_SCHEMA, &[("name", name.to_string())])?;
    let (report, timings) = run_suite(name, seed)?;
    let mut table = Table::new("checks", &["check", "passed"]);
    for c in &report.checks {
        table.rows.push(vec![c.name.clone(), c.passed.to_string()]);
    }
    Ok(Outcome {
        manifest,
        failed: !report.passed,
        result: serde_json::to_value(&report)?,
        tables: vec![table],
        timings: Some(timings),
    })
}
