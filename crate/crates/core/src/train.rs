//! PPO-clip trainer for the MLP policy: rollout collection through the
//! policy-guided planner, GAE advantages, clipped surrogate + value +
//! entropy objective with hand-derived gradients, Adam-style updates.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoding::EncodingLayout;
use crate::env::Environment;
use crate::error::{EvalError, PolicyError};
use crate::nn::MlpPolicy;
use crate::planner::{plan_step_recorded, DecisionRecord, PlanRecord, PolicyMap};
use crate::policy::Policy;

const LOG_FLOOR: f64 = 1e-12;

/// PPO hyperparameters.
#[derive(Debug, Clone)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub horizon: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            learning_rate: 3e-4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            epochs: 4,
            minibatch: 64,
            horizon: 2048,
            entropy_coef: 0.01,
            value_coef: 0.5,
            seed: 0,
        }
    }
}

/// One environment step from one agent's perspective: the pre-planning
/// observation (for the value head), the hierarchy-append decisions made
/// during planning, their summed log-probability under the behavior policy,
/// and the shared reward.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub observation: Vec<f64>,
    pub decisions: Vec<DecisionRecord>,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub agent: String,
    pub steps: Vec<TrajectoryStep>,
}

/// Aggregates over the episodes touched while filling a rollout batch.
#[derive(Debug, Clone, Default)]
pub struct RolloutStats {
    pub steps: usize,
    pub episodes: usize,
    pub successes: usize,
    /// Sum over completed episodes of the discounted return.
    pub discounted_return_sum: f64,
    /// Sum of episode lengths over successful episodes.
    pub success_steps_sum: usize,
    /// Wall-clock seconds spent inside planning calls.
    pub plan_time: f64,
}

/// Runs the plan/act loop for `horizon` environment steps (resetting between
/// episodes), recording one trajectory per agent. All agents share the
/// per-step team reward. Returns immediately with empty trajectories when
/// the goals are already satisfied at reset.
pub fn collect_rollouts(
    env: &mut Environment,
    policies: &PolicyMap,
    layout: &EncodingLayout,
    horizon: usize,
    gamma: f64,
    seed: u64,
) -> Result<(BTreeMap<String, Trajectory>, RolloutStats), EvalError> {
    env.reset();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agent_names: Vec<String> = env.agents.iter().map(|a| a.name.clone()).collect();
    let mut trajs: BTreeMap<String, Trajectory> = agent_names
        .iter()
        .map(|n| (n.clone(), Trajectory { agent: n.clone(), steps: Vec::new() }))
        .collect();
    let mut stats = RolloutStats::default();
    if env.all_goals_complete() {
        return Ok((trajs, stats));
    }

    let mut ep_discounted = 0.0;
    let mut ep_steps = 0usize;
    while stats.steps < horizon {
        // Pre-planning observation and value estimate per agent.
        let mut pre: BTreeMap<String, (Vec<f64>, f64)> = BTreeMap::new();
        for name in &agent_names {
            let obs = env.observe(layout, name);
            let value = match policies.get(name) {
                Some(p) => p.evaluate(&obs, layout)?.1,
                None => 0.0,
            };
            pre.insert(name.clone(), (obs, value));
        }

        let mut record = PlanRecord::default();
        let t0 = Instant::now();
        let leaves =
            plan_step_recorded(env, policies, layout, false, &mut rng, &mut record)?;
        stats.plan_time += t0.elapsed().as_secs_f64();
        let result = env.step(&leaves)?;

        for name in &agent_names {
            let decisions = record.decisions.remove(name).unwrap_or_default();
            let mut log_prob = 0.0;
            if let Some(policy) = policies.get(name) {
                for d in &decisions {
                    let (out, _) = policy.evaluate(&d.observation, layout)?;
                    log_prob += decision_log_prob(&out.op_probs, &out.obj_probs, d);
                }
            }
            let (obs, value) = pre.remove(name).expect("pre-step entry");
            trajs.get_mut(name).expect("trajectory").steps.push(TrajectoryStep {
                observation: obs,
                decisions,
                log_prob,
                reward: result.reward,
                value,
                done: result.done,
            });
        }

        ep_discounted += gamma.powi(ep_steps as i32) * result.reward;
        ep_steps += 1;
        stats.steps += 1;

        if result.done {
            stats.episodes += 1;
            stats.discounted_return_sum += ep_discounted;
            if env.all_goals_complete() {
                stats.successes += 1;
                stats.success_steps_sum += ep_steps;
            }
            ep_discounted = 0.0;
            ep_steps = 0;
            env.reset();
            if env.all_goals_complete() {
                break;
            }
        }
    }
    Ok((trajs, stats))
}

/// Log-probability of the chosen candidate: log P(name) + Σ log P(objects)
/// − log normalizer over the candidate set.
pub fn decision_log_prob(op_probs: &[f64], obj_probs: &[f64], d: &DecisionRecord) -> f64 {
    let lns = candidate_log_scores(op_probs, obj_probs, d);
    lns[d.chosen] - log_sum_exp(&lns)
}

fn candidate_log_scores(op_probs: &[f64], obj_probs: &[f64], d: &DecisionRecord) -> Vec<f64> {
    d.candidates
        .iter()
        .map(|(n, objs)| {
            op_probs[*n].max(LOG_FLOOR).ln()
                + objs
                    .iter()
                    .map(|&o| obj_probs[o].max(LOG_FLOOR).ln())
                    .sum::<f64>()
        })
        .collect()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// A flattened training sample: one agent-step with its GAE advantage and
/// value target.
#[derive(Debug, Clone)]
pub struct Sample {
    pub observation: Vec<f64>,
    pub decisions: Vec<DecisionRecord>,
    pub log_prob_old: f64,
    pub advantage: f64,
    pub value_target: f64,
}

/// Mean loss components over a batch.
#[derive(Debug, Clone, Default)]
pub struct Losses {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

/// Per-epoch mean losses from one [`ppo_update`].
#[derive(Debug, Clone, Default)]
pub struct LossStats {
    pub per_epoch: Vec<Losses>,
}

/// GAE(γ, λ) advantages and value targets; truncated trajectory ends
/// bootstrap with zero.
pub fn gae_samples(trajectories: &BTreeMap<String, Trajectory>, cfg: &PpoConfig) -> Vec<Sample> {
    let mut samples = Vec::new();
    for traj in trajectories.values() {
        let n = traj.steps.len();
        let mut adv = vec![0.0; n];
        let mut carry = 0.0;
        for t in (0..n).rev() {
            let s = &traj.steps[t];
            let next_v = if s.done || t + 1 >= n { 0.0 } else { traj.steps[t + 1].value };
            let delta = s.reward + cfg.gamma * next_v - s.value;
            carry = delta
                + if s.done { 0.0 } else { cfg.gamma * cfg.gae_lambda * carry };
            adv[t] = carry;
        }
        for (t, s) in traj.steps.iter().enumerate() {
            samples.push(Sample {
                observation: s.observation.clone(),
                decisions: s.decisions.clone(),
                log_prob_old: s.log_prob,
                advantage: adv[t],
                value_target: adv[t] + s.value,
            });
        }
    }
    samples
}

fn normalize_advantages(samples: &mut [Sample]) {
    let n = samples.len() as f64;
    if n < 2.0 {
        return;
    }
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 1e-8 {
        for s in samples.iter_mut() {
            s.advantage = (s.advantage - mean) / std;
        }
    }
}

/// Mean PPO-clip loss and its gradient over `samples`.
///
/// Loss per sample: −min(r·A, clip(r, 1±ε)·A) + value_coef·(v − v̂)² −
/// entropy_coef·(H_op + H_obj summed over the sample's decisions), with
/// r = exp(Σ log π_new − Σ log π_old).
pub fn loss_and_gradient(
    policy: &MlpPolicy,
    samples: &[Sample],
    cfg: &PpoConfig,
) -> Result<(Losses, Vec<f64>), PolicyError> {
    let mut grads = vec![0.0; policy.params.len()];
    let mut losses = Losses::default();
    let scale = 1.0 / samples.len().max(1) as f64;

    for s in samples {
        // Value head on the step observation.
        let fwd_v = policy.forward(&s.observation);
        let v_err = fwd_v.value - s.value_target;
        losses.value += v_err * v_err * scale;
        let g_value = cfg.value_coef * 2.0 * v_err * scale;
        policy.backward(
            &fwd_v,
            &vec![0.0; policy.n_ops],
            &vec![0.0; policy.n_objs],
            g_value,
            &mut grads,
        );

        // Composite new log-probability over the sample's decisions.
        let fwds: Vec<_> = s.decisions.iter().map(|d| policy.forward(&d.observation)).collect();
        let log_new: f64 = s
            .decisions
            .iter()
            .zip(&fwds)
            .map(|(d, f)| decision_log_prob(&f.op_probs, &f.obj_probs, d))
            .sum();
        let ratio = (log_new - s.log_prob_old).exp();
        let unclipped = ratio * s.advantage;
        let clipped =
            ratio.clamp(1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon) * s.advantage;
        losses.policy += -unclipped.min(clipped) * scale;
        // d(−min)/d logπ: active only when the unclipped branch is the min.
        let g_logpi = if unclipped <= clipped { -s.advantage * ratio * scale } else { 0.0 };

        for (d, f) in s.decisions.iter().zip(&fwds) {
            let lns = candidate_log_scores(&f.op_probs, &f.obj_probs, d);
            let lse = log_sum_exp(&lns);
            let q: Vec<f64> = lns.iter().map(|l| (l - lse).exp()).collect();
            // Coefficients on log p for each head entry.
            let mut g_op = vec![0.0; policy.n_ops];
            let mut g_obj = vec![0.0; policy.n_objs];
            for (k, (n, objs)) in d.candidates.iter().enumerate() {
                let w = if k == d.chosen { 1.0 - q[k] } else { -q[k] };
                g_op[*n] += w;
                for &o in objs {
                    g_obj[o] += w;
                }
            }
            // Through log-softmax: dL/dz_m = coef·(g_m − p_m·Σ g).
            let to_logits = |g: &[f64], p: &[f64], coef: f64| -> Vec<f64> {
                let sum: f64 = g.iter().sum();
                g.iter().zip(p).map(|(gi, pi)| coef * (gi - pi * sum)).collect()
            };
            let mut gz_op = to_logits(&g_op, &f.op_probs, g_logpi);
            let mut gz_obj = to_logits(&g_obj, &f.obj_probs, g_logpi);

            // Entropy bonus (−coef·H in the loss).
            let ent = |p: &[f64]| -> f64 {
                -p.iter().map(|&x| if x > 0.0 { x * x.ln() } else { 0.0 }).sum::<f64>()
            };
            let h_op = ent(&f.op_probs);
            let h_obj = ent(&f.obj_probs);
            losses.entropy += (h_op + h_obj) * scale;
            for (m, &p) in f.op_probs.iter().enumerate() {
                if p > 0.0 {
                    gz_op[m] += cfg.entropy_coef * p * (p.ln() + h_op) * scale;
                }
            }
            for (m, &p) in f.obj_probs.iter().enumerate() {
                if p > 0.0 {
                    gz_obj[m] += cfg.entropy_coef * p * (p.ln() + h_obj) * scale;
                }
            }
            policy.backward(f, &gz_op, &gz_obj, 0.0, &mut grads);
        }
    }

    losses.total =
        losses.policy + cfg.value_coef * losses.value - cfg.entropy_coef * losses.entropy;
    if !losses.total.is_finite() || grads.iter().any(|g| !g.is_finite()) {
        return Err(PolicyError::NonFiniteLoss);
    }
    Ok((losses, grads))
}

/// Adam-style adaptive optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// One PPO update over a trajectory batch: GAE advantages (normalized),
/// `epochs` passes of shuffled minibatches, Adam steps. Returns per-epoch
/// mean losses.
pub fn ppo_update(
    policy: &mut MlpPolicy,
    trajectories: &BTreeMap<String, Trajectory>,
    cfg: &PpoConfig,
) -> Result<LossStats, PolicyError> {
    let mut samples = gae_samples(trajectories, cfg);
    if samples.is_empty() {
        return Ok(LossStats::default());
    }
    normalize_advantages(&mut samples);
    let mut adam = Adam::new(policy.params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut stats = LossStats::default();
    let mb = cfg.minibatch.max(1);

    for _ in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch = Losses::default();
        let mut batches = 0usize;
        for chunk in order.chunks(mb) {
            let batch: Vec<Sample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let (losses, grads) = loss_and_gradient(policy, &batch, cfg)?;
            adam.step(&mut policy.params, &grads, cfg.learning_rate);
            epoch.total += losses.total;
            epoch.policy += losses.policy;
            epoch.value += losses.value;
            epoch.entropy += losses.entropy;
            batches += 1;
        }
        let n = batches.max(1) as f64;
        stats.per_epoch.push(Losses {
            total: epoch.total / n,
            policy: epoch.policy / n,
            value: epoch.value / n,
            entropy: epoch.entropy / n,
        });
    }
    Ok(stats)
}

/// One row of the training log (CSV-friendly). `plan_steps` is NaN when no
/// episode in the interval succeeded.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TrainLogRow {
    pub episode: usize,
    pub loss: f64,
    pub discounted_return: f64,
    pub success_rate: f64,
    pub plan_time: f64,
    pub plan_steps: f64,
}

/// Full training driver: `iterations` rounds of rollout collection (all
/// agents share the learned policy) and PPO updates. Returns the trained
/// policy and one log row per iteration.
pub fn train(
    env: &mut Environment,
    layout: &EncodingLayout,
    cfg: &PpoConfig,
    iterations: usize,
) -> Result<(MlpPolicy, Vec<TrainLogRow>), EvalError> {
    let mut policy = MlpPolicy::init(layout, cfg.seed);
    let mut log = Vec::new();
    let mut episodes_seen = 0usize;
    for iter in 0..iterations {
        let snapshot = policy.clone();
        let policies: PolicyMap = env
            .agents
            .iter()
            .map(|a| (a.name.clone(), &snapshot as &dyn Policy))
            .collect();
        let (trajs, stats) = collect_rollouts(
            env,
            &policies,
            layout,
            cfg.horizon,
            cfg.gamma,
            cfg.seed.wrapping_add(iter as u64),
        )?;
        let loss_stats = ppo_update(&mut policy, &trajs, cfg)?;
        episodes_seen += stats.episodes;
        let eps = stats.episodes.max(1) as f64;
        log.push(TrainLogRow {
            episode: episodes_seen,
            loss: loss_stats.per_epoch.last().map(|l| l.total).unwrap_or(0.0),
            discounted_return: stats.discounted_return_sum / eps,
            success_rate: stats.successes as f64 / eps,
            plan_time: stats.plan_time / stats.steps.max(1) as f64,
            plan_steps: if stats.successes > 0 {
                stats.success_steps_sum as f64 / stats.successes as f64
            } else {
                f64::NAN
            },
        });
    }
    Ok((policy, log))
}
