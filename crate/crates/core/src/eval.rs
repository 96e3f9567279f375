//! Difficulty and deployment metrics plus ASCII trace rendering: seeded
//! episode batches with per-episode planning timers, mean/std summaries,
//! and step-by-step hierarchy trees.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoding::EncodingLayout;
use crate::env::{Environment, TraceRecord};
use crate::error::EvalError;
use crate::planner::{plan_step, PolicyMap};

/// Aggregate over a batch of seeded episodes with one policy.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DifficultyReport {
    pub domain: String,
    pub problem: String,
    pub agents: usize,
    /// Mean wall-clock planning time per episode, in seconds.
    pub mean_plan_time: f64,
    /// Mean episode length over successful episodes; `None` when no episode
    /// succeeded.
    pub mean_steps: Option<f64>,
    pub success_rate: f64,
    pub episodes: usize,
    pub seed: u64,
    pub policy: String,
}

/// One evaluated episode.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EvalRow {
    pub episode: usize,
    pub discounted_reward: f64,
    pub success: bool,
    /// Wall-clock seconds spent inside planning calls.
    pub plan_time: f64,
    /// Environment steps taken.
    pub plan_steps: usize,
}

/// Mean ± sample standard deviation per [`EvalRow`] column; `None` with
/// fewer than one (mean) or two (std) episodes.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub mean_discounted_reward: Option<f64>,
    pub std_discounted_reward: Option<f64>,
    pub success_rate: Option<f64>,
    pub mean_plan_time: Option<f64>,
    pub std_plan_time: Option<f64>,
    pub mean_steps: Option<f64>,
    pub std_steps: Option<f64>,
}

/// Runs one seeded episode to completion; timing covers planning calls only.
pub fn run_episode(
    env: &mut Environment,
    policies: &PolicyMap,
    layout: &EncodingLayout,
    deterministic: bool,
    gamma: f64,
    seed: u64,
) -> Result<EvalRow, EvalError> {
    env.reset();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row = EvalRow {
        episode: 0,
        discounted_reward: 0.0,
        success: env.all_goals_complete(),
        plan_time: 0.0,
        plan_steps: 0,
    };
    while !row.success {
        let t0 = Instant::now();
        let leaves = plan_step(env, policies, layout, deterministic, &mut rng)?;
        row.plan_time += t0.elapsed().as_secs_f64();
        let result = env.step(&leaves)?;
        row.discounted_reward += gamma.powi(row.plan_steps as i32) * result.reward;
        row.plan_steps += 1;
        if result.done {
            row.success = env.all_goals_complete();
            break;
        }
    }
    Ok(row)
}

/// Measures problem difficulty under a (typically random) policy:
/// `episodes` probabilistic-planning rollouts, episode `i` seeded with
/// `seed + i`.
pub fn measure_difficulty(
    env: &mut Environment,
    policies: &PolicyMap,
    layout: &EncodingLayout,
    policy_name: &str,
    episodes: usize,
    gamma: f64,
    seed: u64,
) -> Result<DifficultyReport, EvalError> {
    let mut successes = 0usize;
    let mut steps_sum = 0usize;
    let mut time_sum = 0.0;
    for i in 0..episodes {
        let row = run_episode(env, policies, layout, false, gamma, seed + i as u64)?;
        time_sum += row.plan_time;
        if row.success {
            successes += 1;
            steps_sum += row.plan_steps;
        }
    }
    Ok(DifficultyReport {
        domain: env.grounding.domain.name.clone(),
        problem: env.grounding.problem.name.clone(),
        agents: env.agents.len(),
        mean_plan_time: time_sum / episodes.max(1) as f64,
        mean_steps: (successes > 0).then(|| steps_sum as f64 / successes as f64),
        success_rate: successes as f64 / episodes.max(1) as f64,
        episodes,
        seed,
        policy: policy_name.to_string(),
    })
}

/// Evaluates a trained policy in deterministic planning mode; episode `i`
/// uses seed `seed + i` (only environment/planner tie-breaks are seeded —
/// deterministic mode makes rows reproducible regardless).
pub fn evaluate_policy(
    env: &mut Environment,
    policies: &PolicyMap,
    layout: &EncodingLayout,
    episodes: usize,
    gamma: f64,
    seed: u64,
) -> Result<(Vec<EvalRow>, EvalSummary), EvalError> {
    let mut rows = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let mut row = run_episode(env, policies, layout, true, gamma, seed + i as u64)?;
        row.episode = i;
        rows.push(row);
    }
    let summary = summarize(&rows);
    Ok((rows, summary))
}

/// Recomputes the summary from rows (the CSV round-trip contract).
pub fn summarize(rows: &[EvalRow]) -> EvalSummary {
    let n = rows.len();
    let stat = |f: &dyn Fn(&EvalRow) -> f64| -> (Option<f64>, Option<f64>) {
        if n == 0 {
            return (None, None);
        }
        let mean = rows.iter().map(|r| f(r)).sum::<f64>() / n as f64;
        let std = (n >= 2).then(|| {
            (rows.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        });
        (Some(mean), std)
    };
    let (mean_r, std_r) = stat(&|r| r.discounted_reward);
    let (mean_t, std_t) = stat(&|r| r.plan_time);
    let (mean_s, std_s) = stat(&|r| r.plan_steps as f64);
    EvalSummary {
        episodes: n,
        mean_discounted_reward: mean_r,
        std_discounted_reward: std_r,
        success_rate: (n > 0)
            .then(|| rows.iter().filter(|r| r.success).count() as f64 / n as f64),
        mean_plan_time: mean_t,
        std_plan_time: std_t,
        mean_steps: mean_s,
        std_steps: std_s,
    }
}

/// Parses a JSONL episode trace and renders it as per-step ASCII hierarchy
/// trees (indentation = hierarchy depth), with the executed joint action
/// and fired environment actions.
pub fn render_trace(jsonl: &str) -> Result<String, EvalError> {
    let mut out = String::new();
    for (lineno, line) in jsonl.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(line).map_err(|e| {
            EvalError::MalformedTrace(format!("line {}: {e}", lineno + 1))
        })?;
        render_record(&mut out, &rec);
    }
    Ok(out)
}

fn render_record(out: &mut String, rec: &TraceRecord) {
    let _ = writeln!(
        out,
        "step {} (reward {}, done {})",
        rec.step, rec.reward, rec.done
    );
    let empty: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let hierarchies = if rec.hierarchies.is_empty() { &empty } else { &rec.hierarchies };
    for (agent, items) in hierarchies {
        let _ = writeln!(out, "  {agent}:");
        if items.is_empty() {
            let _ = writeln!(out, "    (idle)");
        }
        for (depth, key) in items.iter().enumerate() {
            let _ = writeln!(out, "    {}{key}", "  ".repeat(depth));
        }
    }
    let joint: Vec<String> = rec
        .joint
        .iter()
        .map(|(a, k)| format!("{a}: {k}"))
        .collect();
    let _ = writeln!(out, "  executed: [{}]", joint.join(", "));
    for (agent, key) in &rec.rejected {
        let _ = writeln!(out, "  rejected: {agent}: {key}");
    }
    if !rec.env_actions.is_empty() {
        let _ = writeln!(out, "  environment: [{}]", rec.env_actions.join(", "));
    }
}
