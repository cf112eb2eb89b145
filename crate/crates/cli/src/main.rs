//! `wassrisk` command-line interface.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 when input is rejected.
//! All input is parsed and validated before any numerical work starts.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use wassrisk::measures::{default_nodes, DEFAULT_NODES_1D, DEFAULT_TAIL_MASS};
use wassrisk::{
    dc_discrete, robust_es, robust_es_call_closed_form, robust_expected_value, Baseline, DiscreteMeasure, DualSolver,
    EsTolerances, MeasureSpec, PremiumMeasure, ProductLognormal, PwlConvex, QuadratureGrid,
    RobustEsProblem, Table1Config,
};

#[derive(Parser, Debug)]
#[command(
    name = "wassrisk",
    version,
    about = "Robust expected values and Expected Shortfall over quadratic-cost transport balls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Quadrature nodes per dimension for lognormal baselines.
    #[arg(long, global = true)]
    nodes: Option<usize>,

    /// Probability mass cut from each tail of a lognormal baseline.
    #[arg(long = "tail-mass", global = true)]
    tail_mass: Option<f64>,

    /// Outer solver tolerance (the inner λ search runs ten times tighter).
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Parameter sweep, `theta=a:b:n` or `beta=a:b:n` (n evenly spaced values, endpoints included).
    #[arg(long, global = true)]
    sweep: Option<String>,

    /// Worker threads for grid integration and row fan-out.
    #[arg(long, global = true, env = "WASSRISK_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// λc-transform of a payoff; prints the transformed payoff JSON.
    Transform {
        /// Payoff JSON file.
        payoff: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
    },
    /// Optimal quadratic transport cost between two discrete measures, with the plan.
    Distance { mu: PathBuf, nu: PathBuf },
    /// Worst-case expected value over the ball of radius θ.
    RobustEv(ProblemArgs),
    /// Expected Shortfall under the baseline.
    Es(ProblemArgs),
    /// Worst-case Expected Shortfall over the ball of radius θ.
    RobustEs(ProblemArgs),
    /// Analytic robust ES of a call on a one-dimensional lognormal.
    CallClosedForm {
        #[arg(long)]
        strike: f64,
        /// Mean of the underlying normal.
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
        /// Standard deviation of the underlying normal.
        #[arg(long, allow_hyphen_values = true)]
        sigma: f64,
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long, default_value_t = 0.95, allow_hyphen_values = true)]
        beta: f64,
    },
    /// Robust ES of the three-asset portfolio over weight vectors and radii.
    Table1 {
        #[arg(long, value_enum)]
        premium_measure: Option<PremiumArg>,
    },
}

#[derive(Args, Debug, Default)]
struct ProblemArgs {
    /// Payoff JSON file (overrides the config's `payoff`).
    #[arg(long)]
    payoff: Option<PathBuf>,
    /// Baseline measure JSON file (overrides the config's `baseline`).
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PremiumArg {
    RiskNeutral,
    Physical,
}

impl From<PremiumArg> for PremiumMeasure {
    fn from(p: PremiumArg) -> Self {
        match p {
            PremiumArg::RiskNeutral => PremiumMeasure::RiskNeutral,
            PremiumArg::Physical => PremiumMeasure::Physical,
        }
    }
}

#[derive(Debug)]
enum CliError {
    Invalid(String),
    Compute(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Compute(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::Compute(m) => write!(f, "computation failed: {m}"),
        }
    }
}

impl From<wassrisk::Error> for CliError {
    fn from(e: wassrisk::Error) -> Self {
        if e.is_validation() {
            CliError::Invalid(e.to_string())
        } else {
            CliError::Compute(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Invalid(msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wassrisk: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return invalid("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Compute(e.to_string()))?;
    }
    let output = match &cli.command {
        Command::Transform { payoff, lambda } => cmd_transform(cli, payoff, *lambda)?,
        Command::Distance { mu, nu } => cmd_distance(cli, mu, nu)?,
        Command::RobustEv(a) => cmd_problem(cli, a, Kind::RobustEv)?,
        Command::Es(a) => cmd_problem(cli, a, Kind::Es)?,
        Command::RobustEs(a) => cmd_problem(cli, a, Kind::RobustEs)?,
        Command::CallClosedForm {
            strike,
            mu,
            sigma,
            theta,
            beta,
        } => cmd_call_closed_form(cli, *strike, *mu, *sigma, *theta, *beta)?,
        Command::Table1 { premium_measure } => cmd_table1(cli, *premium_measure)?,
    };
    emit(cli.out.as_deref(), &output)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Compute(format!("writing {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Input handling

fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("parsing {}: {e}", path.display())))
}

fn parse_as<T: serde::de::DeserializeOwned>(v: Value, what: &str) -> CliResult<T> {
    serde_json::from_value(v).map_err(|e| CliError::Invalid(format!("{what}: {e}")))
}

fn resolve_path(base: Option<&Path>, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

/// A payoff is a `PwlConvex` object, a shorthand `{"call": k}` / `{"put": k}` /
/// `{"straddle": k}`, or a string naming a file that holds either.
fn payoff_from_value(v: Value, base: Option<&Path>) -> CliResult<PwlConvex> {
    match v {
        Value::String(s) => {
            let path = resolve_path(base, &s);
            let inner = read_json(&path)?;
            if inner.is_string() {
                return invalid(format!("{}: payoff file must hold an object", path.display()));
            }
            payoff_from_value(inner, path.parent())
        }
        Value::Object(ref m) if m.len() == 1 && !m.contains_key("pieces") => {
            let (key, val) = m.iter().next().expect("one entry");
            let k = val
                .as_f64()
                .ok_or_else(|| CliError::Invalid(format!("payoff shorthand `{key}` needs a number")))?;
            let f = match key.as_str() {
                "call" => PwlConvex::call(k),
                "put" => PwlConvex::put(k),
                "straddle" => PwlConvex::straddle(k),
                other => return invalid(format!("unknown payoff shorthand `{other}`")),
            };
            Ok(f?)
        }
        other => parse_as(other, "payoff"),
    }
}

fn measure_from_value(v: Value, base: Option<&Path>) -> CliResult<MeasureSpec> {
    match v {
        Value::String(s) => {
            let path = resolve_path(base, &s);
            parse_as(read_json(&path)?, &path.display().to_string())
        }
        other => parse_as(other, "baseline"),
    }
}

fn check_theta(theta: f64) -> CliResult<()> {
    if theta.is_finite() && theta >= 0.0 {
        Ok(())
    } else {
        invalid(format!("theta must be finite and >= 0, got {theta}"))
    }
}

fn check_beta(beta: f64) -> CliResult<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        invalid(format!("beta must lie in (0, 1), got {beta}"))
    }
}

fn check_grid(nodes: usize, tail_mass: f64) -> CliResult<()> {
    if nodes < 2 {
        return invalid(format!("--nodes must be at least 2, got {nodes}"));
    }
    if !(tail_mass > 0.0 && tail_mass < 0.5) {
        return invalid(format!("--tail-mass must lie in (0, 0.5), got {tail_mass}"));
    }
    Ok(())
}

fn check_tol(tol: Option<f64>) -> CliResult<()> {
    match tol {
        Some(t) if !(t > 0.0 && t.is_finite()) => invalid(format!("--tol must be positive, got {t}")),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SweepParam {
    Theta,
    Beta,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Theta => "theta",
            SweepParam::Beta => "beta",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Sweep {
    param: SweepParam,
    values: Vec<f64>,
}

fn parse_sweep(spec: &str) -> CliResult<Sweep> {
    let bad = || CliError::Invalid(format!("--sweep expects `theta=a:b:n` or `beta=a:b:n`, got `{spec}`"));
    let (name, range) = spec.split_once('=').ok_or_else(bad)?;
    let param = match name.trim() {
        "theta" => SweepParam::Theta,
        "beta" => SweepParam::Beta,
        _ => return Err(bad()),
    };
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    let values = if n == 1 {
        vec![a]
    } else {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    };
    Ok(Sweep { param, values })
}

// ---------------------------------------------------------------------------
// Output helpers

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Compute(e.to_string()))
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(_) | Value::Bool(_) => v.to_string(),
        other => format!("\"{}\"", other.to_string().replace('"', "\"\"")),
    }
}

/// Flat objects to CSV, columns in first-row key order.
fn objects_to_csv(rows: &[Map<String, Value>]) -> String {
    let Some(first) = rows.first() else {
        return String::new();
    };
    let keys: Vec<&String> = first.keys().collect();
    let mut out = keys.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = keys.iter().map(|k| row.get(*k).map(csv_cell).unwrap_or_default()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn object_of<T: Serialize>(v: &T) -> CliResult<Map<String, Value>> {
    match serde_json::to_value(v).map_err(|e| CliError::Compute(e.to_string()))? {
        Value::Object(m) => Ok(m),
        _ => Err(CliError::Compute("expected an object".into())),
    }
}

fn single_result<T: Serialize>(format: Format, v: &T) -> CliResult<String> {
    match format {
        Format::Json => to_json(v),
        Format::Csv => Ok(objects_to_csv(&[object_of(v)?])),
    }
}

// ---------------------------------------------------------------------------
// Commands

fn reject_sweep(cli: &Cli, cmd: &str) -> CliResult<()> {
    if cli.sweep.is_some() {
        return invalid(format!("--sweep is not supported by `{cmd}`"));
    }
    Ok(())
}

fn cmd_transform(cli: &Cli, payoff: &Path, lambda: f64) -> CliResult<String> {
    reject_sweep(cli, "transform")?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("the λc-transform requires lambda > 0, got {lambda}"));
    }
    let f = payoff_from_value(read_json(payoff)?, payoff.parent())?;
    let g = f.lambda_c_transform(lambda)?;
    match cli.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&g),
        Format::Csv => {
            let mut out = (0..g.dim()).map(|k| format!("m{k}")).collect::<Vec<_>>();
            out.push("c".into());
            let mut text = out.join(",") + "\n";
            for p in g.pieces() {
                let mut cells: Vec<String> = p.slope.iter().map(|x| x.to_string()).collect();
                cells.push(p.intercept.to_string());
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            Ok(text)
        }
    }
}

fn cmd_distance(cli: &Cli, mu: &Path, nu: &Path) -> CliResult<String> {
    reject_sweep(cli, "distance")?;
    let load = |p: &Path| -> CliResult<DiscreteMeasure> {
        let spec: MeasureSpec = parse_as(read_json(p)?, &p.display().to_string())?;
        Ok(spec.discrete()?)
    };
    let (a, b) = (load(mu)?, load(nu)?);
    let sol = dc_discrete(&a, &b)?;
    let entries = sol.coupling.entries();
    match cli.format.unwrap_or(Format::Csv) {
        Format::Json => {
            let plan: Vec<Value> = entries.iter().map(|&(i, j, m)| json!({"i": i, "j": j, "mass": m})).collect();
            to_json(&json!({"value": sol.value, "plan": plan}))
        }
        Format::Csv => {
            let mut out = format!("# d_c = {}\ni,j,mass\n", sol.value);
            for (i, j, m) in entries {
                out.push_str(&format!("{i},{j},{m}\n"));
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    RobustEv,
    Es,
    RobustEs,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::RobustEv => "robust-ev",
            Kind::Es => "es",
            Kind::RobustEs => "robust-es",
        }
    }

    fn value_column(self) -> &'static str {
        match self {
            Kind::RobustEv => "robust_ev",
            Kind::Es => "es",
            Kind::RobustEs => "robust_es",
        }
    }
}

/// Config file for `robust-ev`, `es` and `robust-es`. Command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ProblemConfig {
    payoff: Option<Value>,
    baseline: Option<Value>,
    theta: Option<f64>,
    beta: Option<f64>,
    nodes: Option<usize>,
    tail_mass: Option<f64>,
    tol: Option<f64>,
}

struct Problem {
    payoff: PwlConvex,
    baseline: MeasureSpec,
    theta: f64,
    beta: f64,
    nodes: usize,
    tail_mass: f64,
    tol: Option<f64>,
}

fn load_problem(cli: &Cli, args: &ProblemArgs, kind: Kind) -> CliResult<Problem> {
    let (cfg, base) = match &cli.config {
        Some(p) => (parse_as::<ProblemConfig>(read_json(p)?, &p.display().to_string())?, p.parent()),
        None => (ProblemConfig::default(), None),
    };
    let payoff = match (&args.payoff, cfg.payoff) {
        (Some(p), _) => payoff_from_value(read_json(p)?, p.parent())?,
        (None, Some(v)) => payoff_from_value(v, base)?,
        (None, None) => return invalid("no payoff given (use --payoff or a config `payoff` entry)"),
    };
    let baseline = match (&args.baseline, cfg.baseline) {
        (Some(p), _) => parse_as(read_json(p)?, &p.display().to_string())?,
        (None, Some(v)) => measure_from_value(v, base)?,
        (None, None) => return invalid("no baseline given (use --baseline or a config `baseline` entry)"),
    };
    let theta = match (args.theta.or(cfg.theta), kind) {
        (Some(t), _) => t,
        (None, Kind::Es) => 0.0,
        (None, _) => return invalid(format!("`{}` needs theta (--theta or config)", kind.name())),
    };
    let beta = args.beta.or(cfg.beta).unwrap_or(wassrisk::portfolio::DEFAULT_BETA);
    let dim = match &baseline {
        MeasureSpec::Lognormal { mu, .. } => mu.len(),
        MeasureSpec::Discrete { atoms, .. } => atoms.first().map_or(0, Vec::len),
    };
    let nodes = cli.nodes.or(cfg.nodes).unwrap_or_else(|| default_nodes(dim));
    let tail_mass = cli.tail_mass.or(cfg.tail_mass).unwrap_or(DEFAULT_TAIL_MASS);
    let tol = cli.tol.or(cfg.tol);

    check_theta(theta)?;
    if kind != Kind::RobustEv {
        check_beta(beta)?;
    }
    check_grid(nodes, tail_mass)?;
    check_tol(tol)?;
    if payoff.dim() != dim {
        return invalid(format!("payoff has dimension {} but the baseline has {dim}", payoff.dim()));
    }
    // Building the measure validates its parameters without touching the grid.
    match &baseline {
        MeasureSpec::Lognormal { .. } => {
            baseline.lognormal()?;
        }
        MeasureSpec::Discrete { .. } => {
            baseline.discrete()?;
        }
    }
    Ok(Problem {
        payoff,
        baseline,
        theta,
        beta,
        nodes,
        tail_mass,
        tol,
    })
}

fn solve_one(kind: Kind, p: &Problem, baseline: &Baseline, theta: f64, beta: f64) -> CliResult<Value> {
    let v = match kind {
        Kind::RobustEv => {
            let solver = p.tol.map(DualSolver::with_tol).unwrap_or_default();
            serde_json::to_value(robust_expected_value(&p.payoff, baseline, theta, &solver)?)
        }
        Kind::Es | Kind::RobustEs => {
            let tol = p.tol.map(EsTolerances::with_tol).unwrap_or_default();
            let problem = RobustEsProblem::new(&p.payoff, baseline, theta, beta).with_tolerances(tol);
            serde_json::to_value(robust_es(&problem)?)
        }
    };
    v.map_err(|e| CliError::Compute(e.to_string()))
}

fn cmd_problem(cli: &Cli, args: &ProblemArgs, kind: Kind) -> CliResult<String> {
    let p = load_problem(cli, args, kind)?;
    let sweep = cli.sweep.as_deref().map(parse_sweep).transpose()?;
    if let Some(s) = &sweep {
        match (s.param, kind) {
            (SweepParam::Theta, Kind::Es) => return invalid("`es` has no theta; sweep beta instead"),
            (SweepParam::Beta, Kind::RobustEv) => return invalid("`robust-ev` has no beta; sweep theta instead"),
            (SweepParam::Theta, _) => s.values.iter().try_for_each(|t| check_theta(*t))?,
            (SweepParam::Beta, _) => s.values.iter().try_for_each(|b| check_beta(*b))?,
        }
    }
    let baseline = p.baseline.baseline(p.nodes, p.tail_mass)?;

    let Some(sweep) = sweep else {
        let theta = if kind == Kind::Es { 0.0 } else { p.theta };
        let report = solve_one(kind, &p, &baseline, theta, p.beta)?;
        return single_result(cli.format.unwrap_or(Format::Json), &report);
    };

    let reports: Vec<CliResult<Value>> = sweep
        .values
        .par_iter()
        .map(|&x| {
            let (theta, beta) = match sweep.param {
                SweepParam::Theta => (x, p.beta),
                SweepParam::Beta => (if kind == Kind::Es { 0.0 } else { p.theta }, x),
            };
            solve_one(kind, &p, &baseline, theta, beta)
        })
        .collect();
    let reports = reports.into_iter().collect::<CliResult<Vec<_>>>()?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let rows: Vec<Map<String, Value>> = sweep
                .values
                .iter()
                .zip(&reports)
                .map(|(x, r)| {
                    let mut m = Map::new();
                    m.insert(sweep.param.name().into(), json!(x));
                    m.insert(kind.value_column().into(), r["value"].clone());
                    m
                })
                .collect();
            Ok(objects_to_csv(&rows))
        }
        Format::Json => {
            let rows: Vec<Value> = sweep
                .values
                .iter()
                .zip(reports)
                .map(|(x, r)| json!({ sweep.param.name(): x, "report": r }))
                .collect();
            to_json(&rows)
        }
    }
}

fn cmd_call_closed_form(cli: &Cli, strike: f64, mu: f64, sigma: f64, theta: f64, beta: f64) -> CliResult<String> {
    reject_sweep(cli, "call-closed-form")?;
    check_theta(theta)?;
    check_beta(beta)?;
    if !strike.is_finite() {
        return invalid(format!("strike must be finite, got {strike}"));
    }
    let nodes = cli.nodes.unwrap_or(DEFAULT_NODES_1D);
    let tail_mass = cli.tail_mass.unwrap_or(DEFAULT_TAIL_MASS);
    check_grid(nodes, tail_mass)?;
    let lognormal = ProductLognormal::new(vec![mu], vec![sigma])?;
    let grid = QuadratureGrid::build(&lognormal, nodes, tail_mass)?;
    let cf = robust_es_call_closed_form(strike, &lognormal, &grid, theta, beta)?;
    single_result(cli.format.unwrap_or(Format::Json), &cf)
}

fn cmd_table1(cli: &Cli, premium: Option<PremiumArg>) -> CliResult<String> {
    let mut cfg: Table1Config = match &cli.config {
        Some(p) => parse_as(read_json(p)?, &p.display().to_string())?,
        None => Table1Config::default(),
    };
    if let Some(n) = cli.nodes {
        cfg.nodes = n;
    }
    if let Some(t) = cli.tail_mass {
        cfg.tail_mass = t;
    }
    check_tol(cli.tol)?;
    if let Some(t) = cli.tol {
        cfg.tolerances = EsTolerances::with_tol(t);
    }
    if let Some(p) = premium {
        cfg.premium_measure = p.into();
    }
    if let Some(spec) = cli.sweep.as_deref() {
        let s = parse_sweep(spec)?;
        match s.param {
            SweepParam::Theta => cfg.thetas = s.values,
            SweepParam::Beta => return invalid("`table1` sweeps theta only"),
        }
    }
    check_grid(cfg.nodes, cfg.tail_mass)?;
    cfg.validate()?;

    let rows = wassrisk::run_table1(&cfg)?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&rows),
        Format::Csv => {
            let mut out = String::from("w1,w2,w3,theta,robust_es_pct\n");
            for r in &rows {
                out.push_str(&format!("{},{},{},{},{}\n", r.w1, r.w2, r.w3, r.theta, r.robust_es_pct));
            }
            Ok(out)
        }
    }
}
