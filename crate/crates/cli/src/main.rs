//! Command-line front end: lint | adapt | stats | plan | run | train | eval
//! | render. Exit codes: 0 success, 1 domain errors (lint findings, runtime
//! failures), 2 usage or parse errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hddlrl::encoding::{build_layout, EncodingLayout, LayoutMode};
use hddlrl::env::{EnvConfig, Environment};
use hddlrl::eval::{evaluate_policy, measure_difficulty, render_trace};
use hddlrl::fixtures;
use hddlrl::lint::{adapt, lint, parse_effect_hints, Severity};
use hddlrl::model::{DomainModel, ProblemModel};
use hddlrl::nn::MlpPolicy;
use hddlrl::parser::{parse_domain_str, parse_problem_str};
use hddlrl::planner::{decentralized_plan, plan_step, PolicyMap};
use hddlrl::policy::{Policy, UniformPolicy};
use hddlrl::printer::print_domain;
use hddlrl::train::{train, PpoConfig};

#[derive(Parser)]
#[command(name = "hddlrl", version, about = "Hierarchical multi-agent planning and RL toolkit")]
struct Cli {
    /// Base random seed (episode i uses seed + i where applicable).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output format where the subcommand supports several.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Flat `key = value` configuration file (environment and training).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Check a domain (and optionally a problem) against the agent-centric
    /// protocol rules.
    Lint {
        domain: String,
        problem: Option<String>,
    },
    /// Mechanically adapt a stock domain: agent type, `none` action, task
    /// effects from a hints file.
    Adapt {
        domain: String,
        #[arg(long)]
        agent_type: String,
        /// Hints file: one `task = (literal) ...` per line.
        #[arg(long)]
        effects_file: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Grounding statistics for a domain/problem pair.
    Stats {
        domain: String,
        problem: String,
        /// Skip static-precondition pruning.
        #[arg(long)]
        no_prune: bool,
        /// Dump the observation/action layout index assignments instead.
        #[arg(long)]
        layout: bool,
    },
    /// Plan one episode and emit a step-by-step trace.
    Plan {
        domain: String,
        problem: String,
        /// Plan each agent from its own belief state instead of centrally.
        #[arg(long)]
        decentralized: bool,
        /// Argmax selection instead of sampling.
        #[arg(long)]
        deterministic: bool,
        /// Maximum episode steps (defaults to the environment cap).
        #[arg(long)]
        steps: Option<usize>,
        /// Write the JSONL trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Render the trace as indented ASCII hierarchy trees.
        #[arg(long, value_parser = ["ascii"])]
        render: Option<String>,
    },
    /// Random-exploration (or checkpoint) difficulty measurement.
    Run {
        domain: String,
        problem: String,
        /// `random` or a checkpoint path.
        #[arg(long, default_value = "random")]
        policy: String,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Report format (overrides --format).
        #[arg(long, value_enum)]
        report: Option<Format>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PPO training; writes a checkpoint and a CSV learning log.
    Train {
        domain: String,
        problem: String,
        #[arg(short, long)]
        out: PathBuf,
        /// CSV log path.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
    },
    /// Deterministic evaluation of a trained checkpoint.
    Eval {
        domain: String,
        problem: String,
        /// `random` or a checkpoint path.
        #[arg(long, default_value = "random")]
        policy: String,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, value_enum)]
        report: Option<Format>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a JSONL trace as ASCII hierarchy trees.
    Render { trace: PathBuf },
}

/// Exit-code-bearing error: usage/parse problems exit 2, domain problems 1.
enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) => m,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn domain_err<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Domain(e.to_string())
}

/// Provenance header embedded in every report.
#[derive(serde::Serialize)]
struct RunManifest {
    subcommand: String,
    inputs: Vec<String>,
    seed: u64,
    config_overrides: BTreeMap<String, String>,
    tool_version: String,
    layout_hash: String,
}

fn manifest(
    subcommand: &str,
    inputs: &[&str],
    seed: u64,
    overrides: &BTreeMap<String, String>,
    layout: Option<&EncodingLayout>,
) -> RunManifest {
    RunManifest {
        subcommand: subcommand.to_string(),
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
        seed,
        config_overrides: overrides.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        layout_hash: layout.map(|l| l.hash()).unwrap_or_default(),
    }
}

/// Reads an input path; `fixture:<name>` resolves to a bundled fixture.
fn read_input(path: &str) -> CliResult<String> {
    if let Some(name) = path.strip_prefix("fixture:") {
        return fixtures::by_name(name)
            .map(str::to_string)
            .ok_or_else(|| usage(format!("unknown fixture `{name}`")));
    }
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))
}

fn load_models(domain: &str, problem: &str) -> CliResult<(DomainModel, ProblemModel)> {
    let d = parse_domain_str(&read_input(domain)?).map_err(usage)?;
    let p = parse_problem_str(&read_input(problem)?, &d).map_err(usage)?;
    Ok((d, p))
}

/// Parses a flat `key = value` config file; `#` comments allowed.
fn parse_config(path: Option<&Path>) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let Some(path) = path else {
        return Ok(out);
    };
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key = value", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn parse_typed<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| usage(format!("config key `{key}`: {e}")))
}

/// Splits config keys into environment and training settings; unknown keys
/// are usage errors.
fn apply_config(
    overrides: &BTreeMap<String, String>,
) -> CliResult<(EnvConfig, PpoConfig, usize)> {
    let mut env = EnvConfig::default();
    let mut ppo = PpoConfig::default();
    let mut iterations = 10usize;
    for (k, v) in overrides {
        match k.as_str() {
            "max_steps" => env.max_steps = parse_typed(k, v)?,
            "step_penalty" => env.step_penalty = parse_typed(k, v)?,
            "per_goal_bonus" => env.per_goal_bonus = parse_typed(k, v)?,
            "success_bonus" => env.success_bonus = parse_typed(k, v)?,
            "strict" => env.strict = parse_typed(k, v)?,
            "fixpoint_env_actions" => env.fixpoint_env_actions = parse_typed(k, v)?,
            "learning_rate" => ppo.learning_rate = parse_typed(k, v)?,
            "gamma" => ppo.gamma = parse_typed(k, v)?,
            "gae_lambda" => ppo.gae_lambda = parse_typed(k, v)?,
            "clip_epsilon" => ppo.clip_epsilon = parse_typed(k, v)?,
            "epochs" => ppo.epochs = parse_typed(k, v)?,
            "minibatch" => ppo.minibatch = parse_typed(k, v)?,
            "horizon" => ppo.horizon = parse_typed(k, v)?,
            "entropy_coef" => ppo.entropy_coef = parse_typed(k, v)?,
            "value_coef" => ppo.value_coef = parse_typed(k, v)?,
            "iterations" => iterations = parse_typed(k, v)?,
            _ => return Err(usage(format!("unknown config key `{k}`"))),
        }
    }
    Ok((env, ppo, iterations))
}

fn write_output(out: Option<&Path>, content: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| domain_err(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn build_policies<'a>(
    env: &Environment,
    policy: &'a dyn Policy,
) -> PolicyMap<'a> {
    env.agents
        .iter()
        .map(|a| (a.name.clone(), policy))
        .collect()
}

/// Loads `random` or a checkpoint path into a boxed policy.
fn load_policy(spec: &str, layout: &EncodingLayout) -> CliResult<Box<dyn Policy>> {
    if spec == "random" {
        return Ok(Box::new(UniformPolicy));
    }
    MlpPolicy::load(Path::new(spec), layout)
        .map(|p| Box::new(p) as Box<dyn Policy>)
        .map_err(|e| domain_err(format!("cannot load checkpoint {spec}: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<u8> {
    let overrides = parse_config(cli.config.as_deref())?;
    let (env_cfg, ppo_cfg, iterations_cfg) = apply_config(&overrides)?;
    let fmt = cli.format;
    let seed = cli.seed;
    match cli.command {
        Command::Lint { domain, problem } => cmd_lint(&domain, problem.as_deref(), fmt),
        Command::Adapt { domain, agent_type, effects_file, out } => {
            cmd_adapt(&domain, &agent_type, effects_file.as_deref(), &out)
        }
        Command::Stats { domain, problem, no_prune, layout } => {
            cmd_stats(&domain, &problem, no_prune, layout, fmt, seed, &overrides)
        }
        Command::Plan { domain, problem, decentralized, deterministic, steps, trace, render } => {
            cmd_plan(
                &domain, &problem, decentralized, deterministic, steps,
                trace.as_deref(), render.as_deref(), env_cfg, seed,
            )
        }
        Command::Run { domain, problem, policy, episodes, report, out } => cmd_run(
            &domain, &problem, &policy, episodes, report.or(fmt), out.as_deref(),
            env_cfg, ppo_cfg.gamma, seed, &overrides,
        ),
        Command::Train { domain, problem, out, log, iterations } => {
            let iters = if overrides.contains_key("iterations") { iterations_cfg } else { iterations };
            cmd_train(&domain, &problem, &out, log.as_deref(), iters, env_cfg, ppo_cfg, seed, &overrides)
        }
        Command::Eval { domain, problem, policy, episodes, report, out } => cmd_eval(
            &domain, &problem, &policy, episodes, report.or(fmt), out.as_deref(),
            env_cfg, ppo_cfg.gamma, seed, &overrides,
        ),
        Command::Render { trace } => cmd_render(&trace),
    }
}

fn cmd_lint(domain: &str, problem: Option<&str>, fmt: Option<Format>) -> CliResult<u8> {
    let d = parse_domain_str(&read_input(domain)?).map_err(usage)?;
    let p = match problem {
        Some(path) => Some(parse_problem_str(&read_input(path)?, &d).map_err(usage)?),
        None => None,
    };
    let findings = lint(&d, p.as_ref());
    match fmt.unwrap_or(Format::Text) {
        Format::Json => {
            let rows: Vec<serde_json::Value> = findings
                .iter()
                .map(|f| {
                    serde_json::json!({
                        "rule": f.rule.as_str(),
                        "severity": format!("{:?}", f.severity),
                        "line": f.span.line,
                        "col": f.span.col,
                        "message": f.message,
                        "has_fix": f.fix.is_some(),
                    })
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&rows).map_err(domain_err)?);
        }
        _ => {
            for f in &findings {
                println!(
                    "{:?} {} {}:{} {}",
                    f.severity,
                    f.rule.as_str(),
                    f.span.line,
                    f.span.col,
                    f.message
                );
            }
        }
    }
    let has_errors = findings.iter().any(|f| f.severity == Severity::Error);
    Ok(if has_errors { 1 } else { 0 })
}

fn cmd_adapt(
    domain: &str,
    agent_type: &str,
    effects_file: Option<&Path>,
    out: &Path,
) -> CliResult<u8> {
    let d = parse_domain_str(&read_input(domain)?).map_err(usage)?;
    let hints = match effects_file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            parse_effect_hints(&text).map_err(domain_err)?
        }
        None => BTreeMap::new(),
    };
    let adapted = adapt(&d, agent_type, &hints).map_err(domain_err)?;
    fs::write(out, print_domain(&adapted))
        .map_err(|e| domain_err(format!("cannot write {}: {e}", out.display())))?;
    Ok(0)
}

fn cmd_stats(
    domain: &str,
    problem: &str,
    no_prune: bool,
    layout: bool,
    fmt: Option<Format>,
    seed: u64,
    overrides: &BTreeMap<String, String>,
) -> CliResult<u8> {
    let (d, p) = load_models(domain, problem)?;
    let grounding = hddlrl::ground::Grounding::new(&d, &p);
    let lay = build_layout(&grounding, LayoutMode::DynamicOnly);
    if layout {
        println!("{}", lay.dump_json());
        return Ok(0);
    }
    let stats = grounding.stats(!no_prune);
    let man = manifest("stats", &[domain, problem], seed, overrides, Some(&lay));
    match fmt.unwrap_or(Format::Json) {
        Format::Csv => {
            let mut s = String::new();
            let _ = writeln!(s, "# manifest: {}", serde_json::to_string(&man).map_err(domain_err)?);
            let _ = writeln!(
                s,
                "objects,lifted_operators,lifted_actions,grounded_predicates,grounded_dynamic_predicates,grounded_operators,grounded_actions"
            );
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                stats.objects,
                stats.lifted_operators,
                stats.lifted_actions,
                stats.grounded_predicates,
                stats.grounded_dynamic_predicates,
                stats.grounded_operators,
                stats.grounded_actions
            );
            print!("{s}");
        }
        _ => {
            let doc = serde_json::json!({ "manifest": man, "report": stats });
            println!("{}", serde_json::to_string_pretty(&doc).map_err(domain_err)?);
        }
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_plan(
    domain: &str,
    problem: &str,
    decentralized: bool,
    deterministic: bool,
    steps: Option<usize>,
    trace: Option<&Path>,
    render: Option<&str>,
    env_cfg: EnvConfig,
    seed: u64,
) -> CliResult<u8> {
    let (d, p) = load_models(domain, problem)?;
    let mut env = Environment::new(&d, &p, env_cfg).map_err(domain_err)?;
    let layout = build_layout(&env.grounding, LayoutMode::DynamicOnly);
    let uniform = UniformPolicy;
    let policies = build_policies(&env, &uniform);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    env.reset();
    let limit = steps.unwrap_or(env.config.max_steps);
    for _ in 0..limit {
        if env.all_goals_complete() {
            break;
        }
        let joint = if decentralized {
            let mut joint = BTreeMap::new();
            let names: Vec<String> = env.agents.iter().map(|a| a.name.clone()).collect();
            for name in names {
                let leaf = decentralized_plan(&mut env, &name, &policies, &layout, deterministic, &mut rng)
                    .map_err(domain_err)?;
                joint.insert(name, leaf);
            }
            joint
        } else {
            plan_step(&mut env, &policies, &layout, deterministic, &mut rng).map_err(domain_err)?
        };
        let result = env.step(&joint).map_err(domain_err)?;
        if result.done {
            break;
        }
    }
    let jsonl = env.trace_jsonl();
    if let Some(path) = trace {
        fs::write(path, &jsonl)
            .map_err(|e| domain_err(format!("cannot write {}: {e}", path.display())))?;
    }
    if render == Some("ascii") {
        print!("{}", render_trace(&jsonl).map_err(domain_err)?);
    } else if trace.is_none() {
        print!("{jsonl}");
    }
    eprintln!(
        "{} after {} steps",
        if env.all_goals_complete() { "solved" } else { "unsolved" },
        env.trace.len()
    );
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    domain: &str,
    problem: &str,
    policy_spec: &str,
    episodes: usize,
    fmt: Option<Format>,
    out: Option<&Path>,
    env_cfg: EnvConfig,
    gamma: f64,
    seed: u64,
    overrides: &BTreeMap<String, String>,
) -> CliResult<u8> {
    let (d, p) = load_models(domain, problem)?;
    let mut env = Environment::new(&d, &p, env_cfg).map_err(domain_err)?;
    let layout = build_layout(&env.grounding, LayoutMode::DynamicOnly);
    let policy = load_policy(policy_spec, &layout)?;
    let policies = build_policies(&env, policy.as_ref());
    let report = measure_difficulty(&mut env, &policies, &layout, policy_spec, episodes, gamma, seed)
        .map_err(domain_err)?;
    let man = manifest("run", &[domain, problem], seed, overrides, Some(&layout));
    let content = match fmt.unwrap_or(Format::Json) {
        Format::Csv => {
            let mut s = String::new();
            let _ = writeln!(s, "# manifest: {}", serde_json::to_string(&man).map_err(domain_err)?);
            let _ = writeln!(s, "domain,problem,agents,episodes,success_rate,mean_steps,mean_plan_time,seed,policy");
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                report.domain,
                report.problem,
                report.agents,
                report.episodes,
                report.success_rate,
                report.mean_steps.map(|v| v.to_string()).unwrap_or_else(|| "NA".into()),
                report.mean_plan_time,
                report.seed,
                report.policy
            );
            s
        }
        _ => {
            let doc = serde_json::json!({ "manifest": man, "report": report });
            format!("{}\n", serde_json::to_string_pretty(&doc).map_err(domain_err)?)
        }
    };
    write_output(out, &content)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    domain: &str,
    problem: &str,
    out: &Path,
    log: Option<&Path>,
    iterations: usize,
    env_cfg: EnvConfig,
    mut ppo_cfg: PpoConfig,
    seed: u64,
    overrides: &BTreeMap<String, String>,
) -> CliResult<u8> {
    let (d, p) = load_models(domain, problem)?;
    let mut env = Environment::new(&d, &p, env_cfg).map_err(domain_err)?;
    let layout = build_layout(&env.grounding, LayoutMode::DynamicOnly);
    ppo_cfg.seed = seed;
    let (policy, rows) = train(&mut env, &layout, &ppo_cfg, iterations).map_err(domain_err)?;
    policy
        .save(out)
        .map_err(|e| domain_err(format!("cannot write checkpoint {}: {e}", out.display())))?;
    let man = manifest("train", &[domain, problem], seed, overrides, Some(&layout));
    let mut csv = String::new();
    let _ = writeln!(csv, "# manifest: {}", serde_json::to_string(&man).map_err(domain_err)?);
    let _ = writeln!(csv, "episode,loss,discounted_return,success_rate,plan_time,plan_steps");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.episode,
            r.loss,
            r.discounted_return,
            r.success_rate,
            r.plan_time,
            if r.plan_steps.is_nan() { "NA".to_string() } else { r.plan_steps.to_string() }
        );
    }
    match log {
        Some(path) => fs::write(path, &csv)
            .map_err(|e| domain_err(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    domain: &str,
    problem: &str,
    policy_spec: &str,
    episodes: usize,
    fmt: Option<Format>,
    out: Option<&Path>,
    env_cfg: EnvConfig,
    gamma: f64,
    seed: u64,
    overrides: &BTreeMap<String, String>,
) -> CliResult<u8> {
    let (d, p) = load_models(domain, problem)?;
    let mut env = Environment::new(&d, &p, env_cfg).map_err(domain_err)?;
    let layout = build_layout(&env.grounding, LayoutMode::DynamicOnly);
    let policy = load_policy(policy_spec, &layout)?;
    let policies = build_policies(&env, policy.as_ref());
    let (rows, summary) =
        evaluate_policy(&mut env, &policies, &layout, episodes, gamma, seed).map_err(domain_err)?;
    let man = manifest("eval", &[domain, problem], seed, overrides, Some(&layout));
    let content = match fmt.unwrap_or(Format::Json) {
        Format::Csv => {
            let mut s = String::new();
            let _ = writeln!(s, "# manifest: {}", serde_json::to_string(&man).map_err(domain_err)?);
            let _ = writeln!(s, "episode,discounted_reward,success,plan_time,plan_steps");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    r.episode, r.discounted_reward, r.success, r.plan_time, r.plan_steps
                );
            }
            let _ = writeln!(s, "# summary: {}", serde_json::to_string(&summary).map_err(domain_err)?);
            s
        }
        _ => {
            let doc = serde_json::json!({ "manifest": man, "rows": rows, "summary": summary });
            format!("{}\n", serde_json::to_string_pretty(&doc).map_err(domain_err)?)
        }
    };
    write_output(out, &content)?;
    Ok(0)
}

fn cmd_render(trace: &Path) -> CliResult<u8> {
    let text = fs::read_to_string(trace)
        .map_err(|e| usage(format!("cannot read {}: {e}", trace.display())))?;
    print!("{}", render_trace(&text).map_err(domain_err)?);
    Ok(0)
}
