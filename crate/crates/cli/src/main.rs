//! `mvlp`: validate, solve, sweep and verify market-equilibrium scenarios.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mvlp_core::metrics::write_csv;
use mvlp_core::solve::{solve_external, SolverStats};
use mvlp_core::sweep::{write_outputs, PointStatus};
use mvlp_core::{
    build_lp, load_plan, load_scenario, run_sweep, solve, write_mps, LinearProgram, MetricsReport, Outcome,
    Scenario, Solution, Status, Tolerances, Verdict, VerificationReport,
};

/// Default output directory when `--out` is not given.
const OUT_DIR_ENV: &str = "MVLP_OUT_DIR";
const VERIFY_TOLERANCE: f64 = 1e-6;

const EXIT_PARSE: u8 = 1;
const EXIT_VERIFY: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "mvlp", version, about = "Long-term electricity market equilibrium with shadow prices and market values")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a scenario without solving it.
    Validate { scenario: PathBuf },
    /// Solve a scenario and write solution, metrics and verification artifacts.
    Solve(SolveArgs),
    /// Run a sweep plan and write its CSV and manifest.
    Sweep {
        plan: PathBuf,
        #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
        out: PathBuf,
        /// Worker threads; the output does not depend on this.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Solve a scenario and print the verification report only.
    Verify {
        scenario: PathBuf,
        #[arg(long)]
        kvl: bool,
        #[arg(long, default_value_t = VERIFY_TOLERANCE)]
        tolerance: f64,
    },
    /// Write the scenario's LP in MPS format.
    EmitLp {
        scenario: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        kvl: bool,
    },
}

#[derive(Args)]
struct SolveArgs {
    scenario: PathBuf,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    out: PathBuf,
    /// Also write the LP as `<name>.mps`.
    #[arg(long)]
    emit_lp: bool,
    /// Read primal and dual values from this file instead of running the built-in solver.
    #[arg(long, value_name = "PATH")]
    external_solution: Option<PathBuf>,
    /// Enforce Kirchhoff's voltage law on network cycles.
    #[arg(long)]
    kvl: bool,
    /// Report metrics on prices clipped at zero.
    #[arg(long)]
    suppress_negative_prices: bool,
}

/// Failures that map to exit code 1.
#[derive(Debug)]
struct Usage(anyhow::Error);

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { scenario } => validate(&scenario),
        Command::Solve(args) => cmd_solve(&args),
        Command::Sweep { plan, out, jobs } => cmd_sweep(&plan, &out, jobs),
        Command::Verify { scenario, kvl, tolerance } => cmd_verify(&scenario, kvl, tolerance),
        Command::EmitLp { scenario, output, kvl } => emit_lp(&scenario, output.as_deref(), kvl),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_PARSE)
        }
    }
}

trait OrUsage<T> {
    fn usage(self) -> Result<T, Usage>;
}

impl<T, E: Into<anyhow::Error>> OrUsage<T> for std::result::Result<T, E> {
    fn usage(self) -> Result<T, Usage> {
        self.map_err(|e| Usage(e.into()))
    }
}

fn load(path: &Path, kvl: bool) -> Result<Scenario, Usage> {
    let mut s = load_scenario(path).usage()?;
    s.options.enforce_kvl |= kvl;
    Ok(s)
}

fn lp_for(s: &Scenario) -> Result<LinearProgram, Usage> {
    build_lp(&s.system, &s.policy, s.options.formulation()).usage()
}

fn validate(path: &Path) -> Result<u8, Usage> {
    let s = load(path, false)?;
    println!(
        "{}: ok ({} nodes, {} snapshots, {} technologies, {} storages, {} lines)",
        s.name,
        s.system.nodes.len(),
        s.system.snapshots,
        s.system.generators.len(),
        s.system.storages.len(),
        s.system.lines.len()
    );
    Ok(0)
}

fn emit_lp(path: &Path, output: Option<&Path>, kvl: bool) -> Result<u8, Usage> {
    let s = load(path, kvl)?;
    let lp = lp_for(&s)?;
    match output {
        Some(p) => {
            let f = fs::File::create(p).with_context(|| format!("creating {}", p.display())).usage()?;
            write_mps(&lp, io::BufWriter::new(f)).usage()?;
        }
        None => write_mps(&lp, io::stdout().lock()).usage()?,
    }
    Ok(0)
}

#[derive(Serialize)]
struct Entry {
    tag: String,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reduced_cost: Option<f64>,
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    scenario: &'a str,
    status: Status,
    objective: Option<f64>,
    stats: &'a SolverStats,
    columns: Vec<Entry>,
    rows: Vec<Entry>,
}

fn solution_json(name: &str, lp: &LinearProgram, sol: &Solution) -> serde_json::Value {
    let optimal = sol.status == Status::Optimal;
    let columns = if optimal {
        lp.columns()
            .iter()
            .enumerate()
            .map(|(j, c)| Entry {
                tag: c.tag.to_string(),
                value: sol.primal[j],
                reduced_cost: sol.reduced_costs.get(j).copied(),
            })
            .collect()
    } else {
        Vec::new()
    };
    let rows = if optimal {
        lp.rows()
            .iter()
            .enumerate()
            .map(|(i, r)| Entry {
                tag: r.tag.to_string(),
                value: sol.dual[i],
                reduced_cost: None,
            })
            .collect()
    } else {
        Vec::new()
    };
    serde_json::to_value(SolutionFile {
        scenario: name,
        status: sol.status,
        objective: optimal.then_some(sol.objective),
        stats: &sol.stats,
        columns,
        rows,
    })
    .expect("solution serializes")
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Usage> {
    let text = serde_json::to_string_pretty(value).usage()?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())).usage()
}

struct Solved {
    lp: LinearProgram,
    sol: Solution,
}

fn run(s: &Scenario, external: Option<&Path>) -> Result<Solved, Usage> {
    let lp = lp_for(s)?;
    let sol = match external {
        Some(p) => solve_external(&lp, p).usage()?,
        None => solve(&lp, &Tolerances::default()).usage()?,
    };
    Ok(Solved { lp, sol })
}

fn support_set(s: &Scenario) -> Option<Vec<String>> {
    s.policy.support.as_ref().map(|p| p.technologies().to_vec())
}

fn report_status(s: &Scenario, sol: &Solution) -> Option<u8> {
    if sol.status == Status::Optimal {
        return None;
    }
    println!("{}: {:?}", s.name, sol.status);
    Some(EXIT_INFEASIBLE)
}

fn print_verification(r: &VerificationReport) {
    for c in &r.checks {
        let who = if c.entities.is_empty() { String::new() } else { format!(" [{}]", c.entities.join(", ")) };
        let detail = if c.detail.is_empty() { String::new() } else { format!(" ({})", c.detail) };
        println!("  {:<24} {:<12} residual {:.3e} tol {:.0e}{who}{detail}", c.name, c.verdict.to_string(), c.residual, c.tolerance);
    }
    println!("verification: {}", r.verdict);
}

fn verdict_code(v: Verdict) -> u8 {
    if v == Verdict::Fail {
        EXIT_VERIFY
    } else {
        0
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<u8, Usage> {
    let mut s = load(&args.scenario, args.kvl)?;
    s.options.suppress_negative_prices |= args.suppress_negative_prices;
    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())).usage()?;
    let stem = out.join(&s.name);
    let path = |ext: &str| PathBuf::from(format!("{}.{ext}", stem.display()));

    let Solved { lp, sol } = run(&s, args.external_solution.as_deref())?;
    if args.emit_lp {
        let f = fs::File::create(path("mps")).usage()?;
        write_mps(&lp, io::BufWriter::new(f)).usage()?;
    }
    write_json(&path("solution.json"), &solution_json(&s.name, &lp, &sol))?;
    if let Some(code) = report_status(&s, &sol) {
        return Ok(code);
    }

    let outcome = Outcome::extract(&s.system, &s.policy, &lp, &sol).usage()?;
    let set = support_set(&s);
    let metrics = MetricsReport::compute(&outcome, s.options.suppress_negative_prices, set.as_deref());
    write_json(&path("metrics.json"), &metrics)?;
    let mut buf = Vec::new();
    write_csv(&[(s.name.as_str(), &metrics)], &mut buf).usage()?;
    fs::write(path("metrics.csv"), buf).usage()?;

    let verification =
        mvlp_core::verify_scenario(&s.system, &s.policy, s.options.formulation(), &lp, &sol, VERIFY_TOLERANCE)
            .usage()?;
    write_json(&path("verification.json"), &verification)?;

    println!("{}: optimal, system cost {:.6e} €", s.name, sol.objective);
    println!("  {:<16} {:>12} {:>12} {:>10} {:>10} {:>8}", "technology", "capacity MW", "energy MWh", "MV", "LCOE", "RMV");
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
    for t in &metrics.technologies {
        println!(
            "  {:<16} {:>12.3} {:>12.3} {:>10} {:>10} {:>8}",
            t.id,
            t.capacity,
            t.energy,
            fmt(t.market_value),
            fmt(t.lcoe),
            fmt(t.rmv)
        );
    }
    println!("  load-weighted price {:.3} €/MWh", metrics.market.load_weighted_price);
    print_verification(&verification);
    println!("artifacts in {}", out.display());
    Ok(verdict_code(verification.verdict))
}

fn cmd_verify(path: &Path, kvl: bool, tolerance: f64) -> Result<u8, Usage> {
    let s = load(path, kvl)?;
    let Solved { lp, sol } = run(&s, None)?;
    if let Some(code) = report_status(&s, &sol) {
        return Ok(code);
    }
    let r = mvlp_core::verify_scenario(&s.system, &s.policy, s.options.formulation(), &lp, &sol, tolerance)
        .usage()?;
    println!("{}:", s.name);
    print_verification(&r);
    Ok(verdict_code(r.verdict))
}

fn cmd_sweep(plan_path: &Path, out: &Path, jobs: usize) -> Result<u8, Usage> {
    let (plan, base) = load_plan(plan_path).usage()?;
    let result = run_sweep(&plan, &base, jobs).usage()?;
    let (csv, manifest) = write_outputs(&result, out).usage()?;
    let mut stdout = io::stdout().lock();
    for p in &result.points {
        let verdict = p.verdict.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        let status = match p.status {
            PointStatus::Optimal => "optimal",
            PointStatus::Infeasible => "infeasible",
            PointStatus::Unbounded => "unbounded",
            PointStatus::Error => "error",
        };
        let err = p.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default();
        writeln!(stdout, "  {:>12} {status:<10} {verdict}{err}", p.value).usage()?;
    }
    writeln!(stdout, "{}: {} points, config {}", plan.name, result.points.len(), &result.config_hash[..12]).usage()?;
    writeln!(stdout, "wrote {} and {}", csv.display(), manifest.display()).usage()?;
    Ok(verdict_code(result.verdict()))
}
