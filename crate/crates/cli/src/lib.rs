//! Batch front end for `riskroute-core`.
//!
//! Exit codes: 0 success, 1 assertion or computation failure, 2 usage
//! error, 3 input-file error. Numbers are printed with at most 12
//! significant digits.

use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use riskroute_core::consistency::{
    check_additive_consistency, check_axioms, default_translation_grid, efin_residual, golden_allais, golden_fig1,
    golden_fig4, sort_reports, verify_rank_dependent, verify_translation_invariance, GoldenReport, TestEnsemble,
    ViolationReport,
};
use riskroute_core::equilibrium::{
    best_response_dynamics, exhaustive_deviation_check, frank_wolfe_solve, CongestionGame, Player,
};
use riskroute_core::routing::{
    arc_weights, optimal_path_bruteforce, path_time_law, shortest_path, shortest_path_with_weights,
    subpath_optimality_failures,
};
use riskroute_core::{DistortionFn, Distribution, Error, Network, Path, RiskMeasureSpec};
use serde_json::{json, Value};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "riskroute", version, about = "Risk measures, consistency checks and routing on stochastic networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a risk measure on one distribution.
    Eval {
        /// Distribution JSON, inline or as a file path.
        #[arg(long)]
        dist: String,
        #[arg(long)]
        risk: String,
    },
    /// Shortest path under an additive measure.
    Path(PathArgs),
    /// Optimal path by enumerating every simple path; any measure.
    BruteforcePath {
        #[command(flatten)]
        route: PathArgs,
        /// Also run the arc-by-arc reduction and flag disagreements.
        #[arg(long)]
        compare: bool,
    },
    /// Nonatomic equilibrium by Frank-Wolfe.
    Equilibrium {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        risk: String,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
    },
    /// Atomic congestion game by best-response dynamics.
    Atomic {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        players: usize,
        #[arg(long)]
        risk: String,
        /// Origin for every player; defaults to the first demand's origin.
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long, default_value_t = 1000)]
        max_rounds: usize,
    },
    /// Property-check suite; prints violation reports as JSON lines.
    Check {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Measure under test; each suite has its own default.
        #[arg(long)]
        risk: Option<String>,
    },
    /// Reproduce a reference counterexample.
    Golden {
        #[arg(value_enum)]
        case: GoldenCase,
    },
}

#[derive(Debug, Args)]
struct PathArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    #[arg(long)]
    risk: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Suite {
    Axioms,
    Additivity,
    Efin,
    Vnm,
    Rankdep,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GoldenCase {
    Fig1,
    Fig4,
    Allais,
}

/// Failure classified by exit code.
#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Input(anyhow::Error),
    Compute(anyhow::Error),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Input(_) => EXIT_INPUT,
            Self::Compute(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> String {
        let e = match self {
            Self::Usage(e) | Self::Input(e) | Self::Compute(e) => e,
        };
        format!("{e:#}")
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ParseSpec { .. } | Error::NonAdditiveSpec(_) => Self::Usage(e.into()),
            Error::InvalidNetwork(_) | Error::InvalidDistribution(_) => Self::Input(e.into()),
            other => Self::Compute(other.into()),
        }
    }
}

type Outcome = std::result::Result<i32, Failure>;

/// Parses `args` (program name first) and runs one subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            f.code()
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    match cmd {
        Command::Eval { dist, risk } => eval(&dist, &risk, out),
        Command::Path(a) => path(&a, out),
        Command::BruteforcePath { route, compare } => bruteforce(&route, compare, out),
        Command::Equilibrium { net, risk, tol, max_iter } => equilibrium(&net, &risk, tol, max_iter, out, err),
        Command::Atomic { net, players, risk, from, to, max_rounds } => {
            atomic(&net, players, &risk, from, to, max_rounds, out)
        }
        Command::Check { suite, seed, count, risk } => check(suite, seed, count, risk.as_deref(), out, err),
        Command::Golden { case } => golden(case, out, err),
    }
}

/// Rounds to 12 significant digits; the shortest round-trip form of the
/// result is what gets printed.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub fn format_number(x: f64) -> String {
    format!("{}", round12(x))
}

/// Applies [`round12`] to every non-integer number in a JSON value.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            n.as_f64().and_then(|x| serde_json::Number::from_f64(round12(x))).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn emit(out: &mut dyn Write, v: Value) -> std::result::Result<(), Failure> {
    writeln!(out, "{}", round_json(v)).map_err(|e| Failure::Input(anyhow!(e).context("writing output")))
}

fn line(out: &mut dyn Write, text: &str) -> std::result::Result<(), Failure> {
    writeln!(out, "{text}").map_err(|e| Failure::Input(anyhow!(e).context("writing output")))
}

fn parse_risk(s: &str) -> std::result::Result<RiskMeasureSpec, Failure> {
    s.parse::<RiskMeasureSpec>().map_err(|e| Failure::Usage(e.into()))
}

fn read_file(path: &FsPath) -> std::result::Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| format!("cannot read `{}`", path.display()))
        .map_err(Failure::Input)
}

fn load_network(path: &FsPath) -> std::result::Result<Network, Failure> {
    let text = read_file(path)?;
    serde_json::from_str(&text)
        .with_context(|| format!("`{}` is not a valid network file", path.display()))
        .map_err(Failure::Input)
}

fn load_dist(arg: &str) -> std::result::Result<Distribution, Failure> {
    if arg.trim_start().starts_with('{') {
        return serde_json::from_str(arg).context("inline distribution JSON").map_err(Failure::Usage);
    }
    let path = FsPath::new(arg);
    let text = read_file(path)?;
    serde_json::from_str(&text)
        .with_context(|| format!("`{}` is not a valid distribution file", path.display()))
        .map_err(Failure::Input)
}

fn eval(dist: &str, risk: &str, out: &mut dyn Write) -> Outcome {
    let spec = parse_risk(risk)?;
    let d = load_dist(dist)?;
    let v = spec.evaluate(&d)?;
    line(out, &format_number(v))?;
    Ok(0)
}

fn path_json(g: &Network, p: &Path) -> Value {
    json!({"nodes": p.node_ids(g), "arcs": p.arc_ids(g)})
}

fn path(a: &PathArgs, out: &mut dyn Write) -> Outcome {
    let spec = parse_risk(&a.risk)?;
    let g = load_network(&a.net)?;
    let (p, w) = shortest_path(&g, &a.from, &a.to, &spec)?;
    emit(out, json!({"path": path_json(&g, &p), "weight": w}))?;
    Ok(0)
}

fn bruteforce(a: &PathArgs, compare: bool, out: &mut dyn Write) -> Outcome {
    let spec = parse_risk(&a.risk)?;
    let g = load_network(&a.net)?;
    let (p, v) = optimal_path_bruteforce(&g, &a.from, &a.to, &spec)?;
    if !compare {
        emit(out, json!({"path": path_json(&g, &p), "value": v}))?;
        return Ok(0);
    }
    // Arc-by-arc reduction: sum of per-arc risks, then the route's true value.
    let weights = arc_weights(&g, &spec)?;
    let (q, arc_sum) = shortest_path_with_weights(&g, &weights, &a.from, &a.to)?;
    let q_value = spec.evaluate(&path_time_law(&g, &q)?)?;
    let prefix_failures = subpath_optimality_failures(&g, &a.from, &a.to, &spec)?;
    let paradox = p != q || !prefix_failures.is_empty();
    emit(
        out,
        json!({
            "bruteforce": {"path": path_json(&g, &p), "value": v},
            "arcwise": {"path": path_json(&g, &q), "arc_sum": arc_sum, "value": q_value},
            "prefix_failures": prefix_failures.iter().map(|f| json!({
                "node": f.node,
                "route_prefix": path_json(&g, &f.route_prefix),
                "route_prefix_value": f.route_prefix_value,
                "best_prefix": path_json(&g, &f.best_prefix),
                "best_prefix_value": f.best_prefix_value,
            })).collect::<Vec<_>>(),
            "paradox": paradox,
        }),
    )?;
    Ok(0)
}

fn equilibrium(
    net: &FsPath,
    risk: &str,
    tol: f64,
    max_iter: usize,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Outcome {
    let spec = parse_risk(risk)?;
    let g = load_network(net)?;
    match frank_wolfe_solve(&g, &spec, tol, max_iter) {
        Ok(outcome) => {
            emit(out, outcome.to_json(&g))?;
            Ok(0)
        }
        Err(Error::FlowNonConvergence(best)) => {
            emit(out, best.to_json(&g))?;
            let _ = writeln!(
                err,
                "error: gap {} above tolerance {tol:e} after {} iterations",
                format_number(best.relative_gap),
                best.iterations
            );
            Ok(EXIT_FAILURE)
        }
        Err(e) => Err(e.into()),
    }
}

fn atomic(
    net: &FsPath,
    players: usize,
    risk: &str,
    from: Option<String>,
    to: Option<String>,
    max_rounds: usize,
    out: &mut dyn Write,
) -> Outcome {
    let spec = parse_risk(risk)?;
    let g = load_network(net)?;
    let first = g.demands().first();
    let origin = from.or_else(|| first.map(|d| d.origin.clone()));
    let dest = to.or_else(|| first.map(|d| d.dest.clone()));
    let (Some(origin), Some(dest)) = (origin, dest) else {
        return Err(Failure::Usage(anyhow!("give --from and --to, or a network with a demand")));
    };
    let roster = vec![Player { origin, dest }; players];
    let game = CongestionGame::new(g, &spec, roster)?;
    let start = game.solo_profile()?;
    let brd = best_response_dynamics(&game, start, max_rounds)?;
    let g = game.network();
    let stable = exhaustive_deviation_check(&game, &brd.profile)?.is_empty();
    let loads: serde_json::Map<String, Value> =
        g.arcs().iter().zip(brd.profile.loads(g)).map(|(a, n)| (a.id.clone(), json!(n))).collect();
    emit(
        out,
        json!({
            "profile": brd.profile.paths().iter().map(|p| path_json(g, p)).collect::<Vec<_>>(),
            "loads": loads,
            "moves": brd.moves.len(),
            "potentials": brd.potentials,
            "nash": stable,
        }),
    )?;
    Ok(if stable { 0 } else { EXIT_FAILURE })
}

fn wrong_kind(suite: &str, want: &str, spec: &RiskMeasureSpec) -> Failure {
    Failure::Usage(anyhow!("suite `{suite}` needs a {want} spec, got `{spec}`"))
}

fn efin_reports(h: &DistortionFn, seed: u64, count: usize) -> Vec<ViolationReport> {
    let grid = (0..=100).map(|i| f64::from(i) / 100.0);
    let mut points: Vec<(f64, f64)> = grid.clone().flat_map(|p| grid.clone().map(move |q| (p, q))).collect();
    let mut rng = TestEnsemble::new(seed, count).rng();
    points.extend((0..count).map(|_| (rng.random::<f64>(), rng.random::<f64>())));
    let mut reports: Vec<ViolationReport> = points
        .into_iter()
        .filter_map(|(p, q)| {
            let r = efin_residual(h, p, q);
            (r.abs() > 1e-12).then(|| {
                ViolationReport::equality("efin", json!({"h": h.to_string(), "p": p, "q": q}), r, 0.0)
            })
        })
        .collect();
    sort_reports(&mut reports);
    reports
}

fn check(suite: Suite, seed: u64, count: usize, risk: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let ensemble = TestEnsemble::new(seed, count);
    let default = match suite {
        Suite::Axioms | Suite::Additivity => "entropic:0.5",
        Suite::Efin => "distortion:identity",
        Suite::Vnm => "cert:exp:0.7",
        Suite::Rankdep => "rankdep:exp:1:identity",
    };
    let spec = parse_risk(risk.unwrap_or(default))?;
    let (name, reports, expect_empty) = match (suite, &spec) {
        (Suite::Axioms, _) => ("axioms", check_axioms(&spec, &ensemble)?, true),
        (Suite::Additivity, _) => ("additivity", check_additive_consistency(&spec, &ensemble)?, spec.is_additive()),
        (Suite::Efin, RiskMeasureSpec::Distortion(h)) => ("efin", efin_reports(h, seed, count), h.is_identity()),
        (Suite::Efin, _) => return Err(wrong_kind("efin", "distortion:", &spec)),
        (Suite::Vnm, RiskMeasureSpec::CertEquiv(c)) => {
            let expect = c.exponential_rate().is_some();
            ("vnm", verify_translation_invariance(c, &default_translation_grid())?, expect)
        }
        (Suite::Vnm, _) => return Err(wrong_kind("vnm", "cert:", &spec)),
        (Suite::Rankdep, RiskMeasureSpec::RankDep { utility, distortion }) => {
            let r = verify_rank_dependent(utility, distortion, &ensemble)?;
            let mut all = r.translation;
            all.extend(r.additivity);
            sort_reports(&mut all);
            ("rankdep", all, utility.exponential_rate().is_some() && distortion.is_identity())
        }
        (Suite::Rankdep, _) => return Err(wrong_kind("rankdep", "rankdep:", &spec)),
    };
    for r in &reports {
        emit(out, serde_json::to_value(r).map_err(|e| Failure::Compute(e.into()))?)?;
    }
    let met = reports.is_empty() == expect_empty;
    let _ = writeln!(
        err,
        "suite {name} with {spec}: {} reports, expected {}: {}",
        reports.len(),
        if expect_empty { "none" } else { "some" },
        if met { "OK" } else { "UNEXPECTED" }
    );
    Ok(if met { 0 } else { EXIT_FAILURE })
}

fn golden(case: GoldenCase, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let (report, verdict): (GoldenReport, &str) = match case {
        GoldenCase::Fig1 => (golden_fig1()?, "REVERSAL CONFIRMED"),
        GoldenCase::Fig4 => (golden_fig4()?, "ORDER FLIP CONFIRMED"),
        GoldenCase::Allais => (golden_allais()?, "INDEPENDENCE CONFIRMED"),
    };
    for (k, v) in &report.values {
        line(out, &format!("{k} {}", format_number(*v)))?;
    }
    if report.passed() {
        line(out, verdict)?;
        Ok(0)
    } else {
        let _ = writeln!(err, "error: {} failed checks: {}", report.name, report.failures().join(", "));
        Ok(EXIT_FAILURE)
    }
}
