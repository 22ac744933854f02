//! `locklimit`: validate, check nestedness, verify objectives and explore
//! dynamic lock-sharing systems from the command line.

mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use locklimit::automata::{action_count, ParityNta};
use locklimit::crosscheck::{three_way, Agreement, CrosscheckError, Limits};
use locklimit::game::{default_budget, verify_with, GameError, Verdict, VerifyOptions, Witness};
use locklimit::nested::check_nested;
use locklimit::objectives::{conjunction, parse_objective, parse_template, template};
use locklimit::pushdown::{verify_pushdown, PushdownError};
use locklimit::random::{random_batch, RandomParams};
use locklimit::semantics::{simulate, Scheduler};
use locklimit::{parse_system, validate, System};
use rand::SeedableRng;
use serde::Serialize;
use serde_json::json;

use report::{CliReport, Status};

#[derive(Parser, Debug)]
#[command(name = "locklimit", version, about = "Model checker for dynamic lock-sharing systems")]
struct Cli {
    /// Print the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Include wall-clock times in the statistics.
    #[arg(long, global = true)]
    timings: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a system file and run the structural checks.
    Validate { file: PathBuf },
    /// Check that every process locks in stack order.
    Nested { file: PathBuf },
    /// Decide whether some process-fair run has a limit satisfying the objective.
    Verify(VerifyArgs),
    /// Execute a run with a scheduler and report the final configuration.
    Simulate(SimulateArgs),
    /// Compare the limit automaton, the direct checks and run enumeration on finite trees.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
struct ObjectiveArgs {
    /// Objective automaton file.
    #[arg(long)]
    objective: Vec<PathBuf>,
    /// Objective template `TAG[:ARG[:ARG]]`; repeat for a conjunction.
    #[arg(long)]
    template: Vec<String>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    file: PathBuf,
    #[command(flatten)]
    objective: ObjectiveArgs,
    /// Use the pushdown procedure.
    #[arg(long)]
    pushdown: bool,
    /// Write the witness as JSON to this file.
    #[arg(long)]
    witness: Option<PathBuf>,
    /// Write the witness as a Graphviz graph to this file.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Largest number of game positions or automaton states.
    #[arg(long, env = "LOCKLIMIT_BUDGET")]
    budget: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchedulerKind {
    Random,
    RoundRobin,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    file: PathBuf,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SchedulerKind::Random)]
    scheduler: SchedulerKind,
    /// Write the final configuration as a Graphviz graph to this file.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// System file; omit with `--random`.
    file: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    max_nodes: usize,
    /// Compare on all δ-trees only when there are at most this many.
    #[arg(long, default_value_t = 2_000)]
    delta_cap: usize,
    #[command(flatten)]
    objective: ObjectiveArgs,
    /// Check this many random nested systems instead of a file.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for a batch.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, env = "LOCKLIMIT_BUDGET")]
    budget: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match &cli.command {
        Command::Validate { file } => cmd_validate(file),
        Command::Nested { file } => cmd_nested(file),
        Command::Verify(a) => cmd_verify(a, cli.timings),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Oracle(a) => cmd_oracle(a, cli.timings),
    };
    if cli.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_text());
    }
    ExitCode::from(report.exit_code as u8)
}

fn display(path: &std::path::Path) -> String {
    path.display().to_string()
}

/// Reads, parses and validates a system, or returns the failing report.
fn load(report: CliReport, path: &std::path::Path) -> Result<(System, CliReport), Box<CliReport>> {
    let text = match fs::read_to_string(path).with_context(|| format!("cannot read {}", display(path))) {
        Ok(t) => t,
        Err(e) => return Err(Box::new(report.fail(Status::InvalidInput, format!("{e:#}")))),
    };
    let system = match parse_system(&text) {
        Ok(s) => s,
        Err(errors) => {
            let mut r = report.fail(Status::InvalidInput, "syntax errors");
            r.result = json!({ "syntax_errors": errors.0 });
            return Err(Box::new(r));
        }
    };
    let violations = validate(&system);
    if !violations.is_empty() {
        let mut r = report.fail(Status::InvalidInput, "validation failed");
        r.result = json!({ "violations": violations.iter().map(ToString::to_string).collect::<Vec<_>>() });
        return Err(Box::new(r));
    }
    Ok((system, report))
}

fn cmd_validate(file: &std::path::Path) -> CliReport {
    let report = CliReport::new("validate", Some(&display(file)));
    match load(report, file) {
        Ok((system, mut r)) => {
            r.result = json!({
                "system": system.name,
                "processes": system.processes.len(),
                "actions": system.actions.len(),
                "pushdown": system.is_pushdown(),
                "violations": Vec::<String>::new(),
            });
            r
        }
        Err(r) => *r,
    }
}

fn nested_report(system: &System, mut r: CliReport) -> CliReport {
    let verdict = check_nested(system);
    let processes: Vec<_> = verdict
        .processes
        .iter()
        .map(|p| {
            json!({
                "process": p.name,
                "nested": p.nested,
                "witness": p.witness.as_ref().map(|w| w.iter().map(|a| system.action(*a).name.clone()).collect::<Vec<_>>()),
            })
        })
        .collect();
    r.result = json!({ "nested": verdict.is_nested(), "processes": processes });
    if let Some(p) = verdict.first_violation() {
        r = r.fail(Status::NotNested, format!("process {} does not lock in stack order", p.name));
    }
    r
}

fn cmd_nested(file: &std::path::Path) -> CliReport {
    match load(CliReport::new("nested", Some(&display(file))), file) {
        Ok((system, r)) => nested_report(&system, r),
        Err(r) => *r,
    }
}

fn build_objective(system: &System, args: &ObjectiveArgs) -> anyhow::Result<Option<ParityNta>> {
    let mut parts = Vec::new();
    for path in &args.objective {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", display(path)))?;
        parts.push(parse_objective(&text, system).with_context(|| format!("in {}", display(path)))?);
    }
    for spec in &args.template {
        let t = parse_template(spec, system, |p| fs::read_to_string(p).map_err(|e| e.to_string()))?;
        parts.push(template(system, &t)?);
    }
    if parts.is_empty() {
        return Ok(None);
    }
    Ok(Some(conjunction(&parts, action_count(system))?))
}

#[derive(Serialize)]
struct WitnessFile<'a> {
    nodes: Vec<WitnessEntry<'a>>,
    finite: bool,
    schedule: Vec<String>,
    schedule_complete: bool,
}

#[derive(Serialize)]
struct WitnessEntry<'a> {
    letter: String,
    priority: u8,
    state: &'a str,
    children: &'a [usize],
}

fn witness_file<'a>(system: &System, w: &'a Witness, verdict: &Verdict) -> WitnessFile<'a> {
    WitnessFile {
        nodes: w
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| WitnessEntry {
                letter: w.letter_name(system, i),
                priority: n.priority,
                state: &n.state,
                children: &n.children,
            })
            .collect(),
        finite: w.is_finite(),
        schedule: trace_lines(system, verdict),
        schedule_complete: verdict.schedule_complete,
    }
}

fn trace_lines(system: &System, verdict: &Verdict) -> Vec<String> {
    verdict.schedule.as_ref().map_or_else(Vec::new, |run| run.to_trace(system).lines().map(str::to_string).collect())
}

fn cmd_verify(args: &VerifyArgs, timings: bool) -> CliReport {
    let (system, mut r) = match load(CliReport::new("verify", Some(&display(&args.file))), &args.file) {
        Ok(x) => x,
        Err(r) => return *r,
    };
    if !check_nested(&system).is_nested() {
        return nested_report(&system, r);
    }
    let objective = match build_objective(&system, &args.objective) {
        Ok(Some(o)) => o,
        Ok(None) => return r.fail(Status::InvalidInput, "give --objective or --template"),
        Err(e) => return r.fail(Status::InvalidInput, format!("{e:#}")),
    };
    let opts = VerifyOptions { budget: args.budget.unwrap_or_else(default_budget), ..VerifyOptions::default() };
    let outcome = if args.pushdown {
        verify_pushdown(&system, &objective, &opts).map_err(|e| match e {
            PushdownError::NotNested(_) => (Status::NotNested, e.to_string()),
            PushdownError::BudgetExceeded(_) => (Status::Budget, e.to_string()),
            e => (Status::InvalidInput, e.to_string()),
        })
    } else {
        verify_with(&system, &objective, &opts).map_err(|e| match e {
            GameError::NotNested(_) => (Status::NotNested, e.to_string()),
            GameError::BudgetExceeded(_) => (Status::Budget, e.to_string()),
            GameError::Pushdown => (Status::InvalidInput, format!("{e}; use --pushdown")),
            e => (Status::InvalidInput, e.to_string()),
        })
    };
    let verdict = match outcome {
        Ok(v) => v,
        Err((status, message)) => return r.fail(status, message),
    };
    let fair_replay = match (&verdict.schedule, verdict.schedule_complete) {
        (Some(run), true) if verdict.witness.as_ref().is_some_and(Witness::is_finite) => {
            run.replay(&system).ok().map(|t| locklimit::semantics::is_fair(&system, &t))
        }
        _ => None,
    };
    r.result = json!({
        "verdict": if verdict.satisfiable { "satisfiable" } else { "unsatisfiable" },
        "satisfiable": verdict.satisfiable,
        "exact": verdict.exact,
        "procedure": if args.pushdown { "pushdown" } else { "game" },
        "witness_nodes": verdict.witness.as_ref().map(|w| w.nodes.len()),
        "witness_finite": verdict.witness.as_ref().map(Witness::is_finite),
        "schedule": trace_lines(&system, &verdict),
        "schedule_complete": verdict.schedule_complete,
        "schedule_reaches_fair_config": fair_replay,
    });
    let mut stats = json!({
        "automaton_states": verdict.stats.automaton_states,
        "positions": verdict.stats.positions,
        "priorities": verdict.stats.priorities,
    });
    if timings {
        stats["millis"] = json!(verdict.stats.millis);
    }
    r.stats = Some(stats);
    if !verdict.exact {
        r.warnings.push("verdict depends on the bounded ranks of the chain tracker".into());
    }
    if let Some(w) = &verdict.witness {
        if let Some(path) = &args.witness {
            let text = serde_json::to_string_pretty(&witness_file(&system, w, &verdict)).expect("witness serializes");
            if let Err(e) = fs::write(path, text) {
                return r.fail(Status::InvalidInput, format!("cannot write {}: {e}", display(path)));
            }
        }
        if let Some(path) = &args.dot {
            if let Err(e) = fs::write(path, w.to_dot(&system)) {
                return r.fail(Status::InvalidInput, format!("cannot write {}: {e}", display(path)));
            }
        }
    } else if verdict.satisfiable && (args.witness.is_some() || args.dot.is_some()) {
        r.warnings.push("the pushdown procedure produces no witness".into());
    }
    r
}

fn cmd_simulate(args: &SimulateArgs) -> CliReport {
    let (system, mut r) = match load(CliReport::new("simulate", Some(&display(&args.file))), &args.file) {
        Ok(x) => x,
        Err(r) => return *r,
    };
    let scheduler = match args.scheduler {
        SchedulerKind::Random => Scheduler::Random(args.seed),
        SchedulerKind::RoundRobin => Scheduler::RoundRobin,
    };
    let sim = simulate(&system, scheduler, args.steps);
    r.result = json!({
        "steps": sim.run.events.len(),
        "fair": sim.fair,
        "bound_hit": sim.bound_hit,
        "nodes": sim.tree.len(),
        "leaves": sim.tree.leaves().count(),
        "trace": sim.run.to_trace(&system).lines().collect::<Vec<_>>(),
    });
    if let Some(path) = &args.dot {
        if let Err(e) = fs::write(path, sim.tree.to_dot(&system)) {
            return r.fail(Status::InvalidInput, format!("cannot write {}: {e}", display(path)));
        }
    }
    r
}

fn agreement_json(a: &Agreement) -> serde_json::Value {
    json!({
        "trees": a.trees,
        "fair_limits": a.fair_limits,
        "agreeing": a.agreeing(),
        "delta_capped": a.delta_capped,
        "cells": a.cells,
        "objective_accepted": a.objective_accepted,
        "disagreements": a.disagreements,
    })
}

fn cmd_oracle(args: &OracleArgs, timings: bool) -> CliReport {
    let start = std::time::Instant::now();
    let limits = Limits {
        max_nodes: args.max_nodes,
        delta_cap: args.delta_cap,
        enumeration_budget: args.budget.unwrap_or(Limits::default().enumeration_budget),
    };
    let (systems, objective, mut r) = match (&args.file, args.random) {
        (Some(file), None) => {
            let (system, r) = match load(CliReport::new("oracle", Some(&display(file))), file) {
                Ok(x) => x,
                Err(r) => return *r,
            };
            if !check_nested(&system).is_nested() {
                return nested_report(&system, r);
            }
            let objective = match build_objective(&system, &args.objective) {
                Ok(o) => o,
                Err(e) => return r.fail(Status::InvalidInput, format!("{e:#}")),
            };
            (vec![system], objective, r)
        }
        (None, Some(n)) => {
            let r = CliReport::new("oracle", None);
            if !args.objective.objective.is_empty() || !args.objective.template.is_empty() {
                return r.fail(Status::InvalidInput, "objectives need a system file");
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
            (random_batch(&mut rng, &RandomParams::default(), n), None, r)
        }
        _ => return CliReport::new("oracle", None).fail(Status::InvalidInput, "give a system file or --random N"),
    };
    let results = run_batch(&systems, &limits, objective.as_ref(), args.jobs.max(1));
    let mut per_system = Vec::new();
    let (mut trees, mut agreeing) = (0, 0);
    for (system, res) in systems.iter().zip(results) {
        match res {
            Ok(a) => {
                trees += a.trees;
                agreeing += a.agreeing();
                if a.delta_capped {
                    r.warnings.push(format!("{}: more than {} δ-trees, only fair limits compared", system.name, limits.delta_cap));
                }
                let mut v = agreement_json(&a);
                if args.random.is_some() && !a.all_agree() {
                    v["source"] = json!(locklimit::render_system(system));
                }
                per_system.push(v);
            }
            Err(CrosscheckError::Budget(e)) => return r.fail(Status::Budget, e.to_string()),
            Err(e @ CrosscheckError::Limit(_)) => return r.fail(Status::InvalidInput, e.to_string()),
        }
    }
    let percent = if trees == 0 { 100.0 } else { 100.0 * agreeing as f64 / trees as f64 };
    r.result = json!({
        "max_nodes": limits.max_nodes,
        "systems": systems.len(),
        "trees": trees,
        "agreeing": agreeing,
        "agreement_percent": percent,
        "per_system": per_system,
    });
    if timings {
        r.stats = Some(json!({ "millis": start.elapsed().as_millis() }));
    }
    r.with_status(Status::Computed)
}

fn run_batch(
    systems: &[System],
    limits: &Limits,
    objective: Option<&ParityNta>,
    jobs: usize,
) -> Vec<Result<Agreement, CrosscheckError>> {
    if jobs == 1 || systems.len() < 2 {
        return systems.iter().map(|s| three_way(s, limits, objective)).collect();
    }
    let chunk = systems.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = systems
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|s| three_way(s, limits, objective)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}
