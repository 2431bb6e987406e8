use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use allocopt::exact::{self, SuccessEstimate, EstimateMethod};
use allocopt::memory::{self, MemoryProfile};
use allocopt::multi_object::{self, TwoObjectSpec};
use allocopt::numeric::round_sig;
use allocopt::relaxation::{self, SearchRange};
use allocopt::{oracle, parallel, Allocation, SystemParams};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

const DEFAULT_SEED: u64 = 0;
const DEFAULT_TRIALS: u64 = 1_000_000;
const SIG_DIGITS: usize = 12;

#[derive(Parser)]
#[command(name = "allocopt", version, about = "Storage allocation solvers for unreliable, memory-limited nodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal allocation for one instance.
    Solve(SolveArgs),
    /// Recovery probability of a given allocation.
    Eval(EvalArgs),
    /// Exact vs relaxed agreement over a (p, T) grid.
    Scan(ScanArgs),
    /// Exact and relaxed objectives for every support size, as CSV.
    Curve(CurveArgs),
    /// Two objects sharing the node memories.
    Two(TwoArgs),
    /// Dispatched allocation against the brute-force grid oracle.
    OracleCompare(OracleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Mc,
    Closed,
}

#[derive(Args)]
struct Output {
    /// Write the artifact here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Memory {
    /// Constant per-node memory M.
    #[arg(long, conflicts_with = "profile")]
    memory: Option<f64>,
    /// JSON file holding the per-node memories.
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    access_prob: f64,
    #[arg(long)]
    budget: f64,
    #[command(flatten)]
    mem: Memory,
    /// Without memory limits: `closed` for the relaxed problem (default),
    /// `exact` for the exact symmetric optimum.
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct EvalArgs {
    /// Inline JSON array, or a JSON file (an array or an artifact carrying
    /// an allocation).
    #[arg(long)]
    alloc: String,
    /// Taken from the artifact when omitted.
    #[arg(long)]
    access_prob: Option<f64>,
    #[arg(long, value_enum, default_value = "exact")]
    method: Method,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long, default_value_t = 1e-3)]
    p_step: f64,
    #[arg(long, default_value_t = 0.1)]
    t_step: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    access_prob: f64,
    #[arg(long)]
    budget: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct TwoArgs {
    #[arg(long)]
    t1: f64,
    #[arg(long)]
    t2: f64,
    /// Demand probability of object 1; object 2 gets the rest.
    #[arg(long)]
    p1: f64,
    #[arg(long)]
    access_prob: f64,
    /// Node count, required with `--memory`.
    #[arg(long)]
    nodes: Option<usize>,
    #[command(flatten)]
    mem: Memory,
    /// Also run the exhaustive pair search at this granularity.
    #[arg(long)]
    granularity: Option<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct OracleArgs {
    /// Taken from the profile length when omitted.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    access_prob: f64,
    #[arg(long)]
    budget: f64,
    #[command(flatten)]
    mem: Memory,
    #[arg(long, default_value_t = 10)]
    granularity: usize,
    #[command(flatten)]
    output: Output,
}

fn main() -> ExitCode {
    parallel::init_from_env();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_infeasible(&e) {
                eprintln!("note: an allocation exists only when 1 <= T <= sum of the node memories");
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn is_infeasible(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<allocopt::Error>()
            .is_some_and(|e| e.is_infeasible())
    })
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Solve(a) => solve(a),
        Command::Eval(a) => eval(a),
        Command::Scan(a) => {
            let report = relaxation::disparity_scan(a.nodes, a.p_step, a.t_step)?;
            emit_json(&report, &a.output)
        }
        Command::Curve(a) => {
            let params = SystemParams::new(a.nodes, a.access_prob, a.budget)?;
            let csv = relaxation::curve_to_csv(&relaxation::objective_curve(&params)?);
            emit(&csv, &a.output)
        }
        Command::Two(a) => two(a),
        Command::OracleCompare(a) => oracle_compare(a),
    }
}

fn solve(a: SolveArgs) -> Result<()> {
    let params = SystemParams::new(a.nodes, a.access_prob, a.budget)?;
    let mut v = if let Some(m) = a.mem.memory {
        serde_json::to_value(memory::solve_constant_profile(&params, m)?)?
    } else if let Some(path) = &a.mem.profile {
        let profile = read_profile(path)?;
        let mut v = serde_json::to_value(memory::solve_arbitrary_profile(&params, &profile)?)?;
        v["profile"] = serde_json::to_value(&profile)?;
        v
    } else {
        serde_json::to_value(match a.method.unwrap_or(Method::Closed) {
            Method::Closed => relaxation::solve_p2(&params)?,
            Method::Exact => relaxation::solve_p1(&params, SearchRange::CandidateSet)?,
            Method::Mc => bail!("solve supports --method exact or closed"),
        })?
    };
    // Lets `eval` and `oracle-compare` read the artifact back.
    v["params"] = serde_json::to_value(params)?;
    emit_value(v, &a.output)
}

fn eval(a: EvalArgs) -> Result<()> {
    let (alloc, artifact_p) = parse_alloc_arg(&a.alloc)?;
    let p = a
        .access_prob
        .or(artifact_p)
        .ok_or_else(|| anyhow!("--access-prob is required when the allocation carries none"))?;
    let est = match a.method {
        Method::Exact => SuccessEstimate::exact(
            exact::evaluate(&alloc, p)?,
            EstimateMethod::ExactEnumeration,
        ),
        Method::Closed => SuccessEstimate::exact(
            exact::closed_form_success(&alloc, p)?,
            EstimateMethod::ClosedForm,
        ),
        Method::Mc => exact::monte_carlo_success(&alloc, p, a.trials, a.seed)?,
    };
    let mut v = serde_json::to_value(est)?;
    v["allocation"] = serde_json::to_value(&alloc)?;
    v["access_prob"] = json!(p);
    emit_value(v, &a.output)
}

fn two(a: TwoArgs) -> Result<()> {
    let profile = resolve_profile(&a.mem, a.nodes)?;
    let spec = TwoObjectSpec::new(a.t1, a.t2, a.p1, a.access_prob)?;
    let v = match a.granularity {
        Some(g) => serde_json::to_value(multi_object::exhaustive_two_object(&spec, &profile, g)?)?,
        None => {
            let alloc = multi_object::allocate_two_objects(&spec, &profile)?;
            let score = spec.score(&alloc.allocation_1, &alloc.allocation_2)?;
            json!({ "spec": spec, "profile": profile, "greedy": alloc, "greedy_score": score })
        }
    };
    emit_value(v, &a.output)
}

fn oracle_compare(a: OracleArgs) -> Result<()> {
    let profile = resolve_profile(&a.mem, a.nodes)?;
    let params = SystemParams::new(profile.len(), a.access_prob, a.budget)?;
    emit_json(&oracle::conjecture_report(&params, &profile, a.granularity)?, &a.output)
}

fn resolve_profile(mem: &Memory, nodes: Option<usize>) -> Result<MemoryProfile> {
    match (mem.memory, &mem.profile) {
        (Some(m), _) => {
            let n = nodes.ok_or_else(|| anyhow!("--nodes is required with --memory"))?;
            Ok(MemoryProfile::constant(n, m)?)
        }
        (None, Some(path)) => {
            let profile = read_profile(path)?;
            if let Some(n) = nodes {
                if n != profile.len() {
                    bail!("--nodes {n} but the profile lists {} nodes", profile.len());
                }
            }
            Ok(profile)
        }
        (None, None) => bail!("one of --memory or --profile is required"),
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed JSON in {}", path.display()))
}

/// A bare array, or an artifact with a `profile` field.
fn read_profile(path: &Path) -> Result<MemoryProfile> {
    let v = read_json(path)?;
    let caps = match v.get("profile") {
        Some(inner) => inner.clone(),
        None => v,
    };
    serde_json::from_value(caps).with_context(|| format!("invalid profile in {}", path.display()))
}

/// Inline array, or a file holding an array or an artifact. Returns the
/// allocation and the access probability recorded alongside it, if any.
fn parse_alloc_arg(arg: &str) -> Result<(Allocation, Option<f64>)> {
    let trimmed = arg.trim_start();
    let v: Value = if trimmed.starts_with('[') || trimmed.starts_with('{') {
        serde_json::from_str(arg).context("malformed --alloc JSON")?
    } else {
        read_json(Path::new(arg))?
    };
    let p = v
        .get("access_prob")
        .or_else(|| v.pointer("/params/access_prob"))
        .and_then(Value::as_f64);
    let alloc = ["", "/allocation", "/best_alloc", "/conjecture/allocation", "/oracle/best_alloc"]
        .iter()
        .filter_map(|ptr| v.pointer(ptr))
        .find(|x| x.is_array())
        .ok_or_else(|| anyhow!("no allocation array found in --alloc"))?;
    Ok((serde_json::from_value(alloc.clone())?, p))
}

/// Floats rounded to 12 significant digits; integers are left alone.
fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            serde_json::Number::from_f64(round_sig(x, SIG_DIGITS))
                .map(Value::Number)
                .unwrap_or(Value::Null)
        }
        Value::Array(xs) => Value::Array(xs.into_iter().map(round_value).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, x)| (k, round_value(x))).collect()),
        other => other,
    }
}

fn emit_json<T: Serialize>(x: &T, out: &Output) -> Result<()> {
    emit_value(serde_json::to_value(x)?, out)
}

fn emit_value(v: Value, out: &Output) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&round_value(v))?;
    text.push('\n');
    emit(&text, out)
}

fn emit(text: &str, out: &Output) -> Result<()> {
    match &out.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}
