//! Deterministic multi-agent step environment over a grounded domain.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::agent::{sweep_hierarchy, AgentRuntime};
use crate::error::EnvError;
use crate::ground::{Grounding, OperatorInstance, OperatorKind};
use crate::lint::{lint, Severity};
use crate::model::{DomainModel, ProblemModel, AGENT_TYPE};

/// Mutable world snapshot. Static atoms live on the grounding and never
/// change after reset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorldState {
    pub dynamic: BTreeSet<String>,
    pub steps: usize,
}

/// Episode configuration. All reward weights are configurable knobs, not
/// part of the domain model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvConfig {
    pub max_steps: usize,
    pub step_penalty: f64,
    pub per_goal_bonus: f64,
    pub success_bonus: f64,
    /// Strict mode turns precondition failures into errors; lenient mode
    /// (default) replaces the failing action with `none` and reports it.
    pub strict: bool,
    /// Repeat environment-action passes until none fires (bounded by the
    /// grounded env-action count) instead of a single pass.
    pub fixpoint_env_actions: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            max_steps: 100,
            step_penalty: -1.0,
            per_goal_bonus: 50.0,
            success_bonus: 100.0,
            strict: false,
            fixpoint_env_actions: false,
        }
    }
}

/// Per-step debug information.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepInfo {
    /// Indices into the goal list that newly completed this step.
    pub newly_completed_goals: Vec<usize>,
    /// Environment actions fired in phase 4, in firing order.
    pub env_actions: Vec<String>,
    /// Lenient-mode rejections: agent -> the action key that was replaced
    /// by `none`.
    pub rejected: BTreeMap<String, String>,
    /// Atoms added / removed by the step (agent + environment actions).
    pub added: BTreeSet<String>,
    pub removed: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepResult {
    pub state: WorldState,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One JSON-lines trace record per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    /// Submitted joint action, agent -> canonical action key.
    pub joint: BTreeMap<String, String>,
    pub rejected: BTreeMap<String, String>,
    pub env_actions: Vec<String>,
    pub added: BTreeSet<String>,
    pub removed: BTreeSet<String>,
    /// Hierarchy item keys per agent as they produced this step's actions
    /// (before the post-step update), root first.
    #[serde(default)]
    pub hierarchies: BTreeMap<String, Vec<String>>,
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Environment {
    pub grounding: Grounding,
    pub config: EnvConfig,
    pub state: WorldState,
    /// Lexicographic by name.
    pub agents: Vec<AgentRuntime>,
    /// Indices into the problem goal list already completed.
    pub completed_goals: BTreeSet<usize>,
    pub trace: Vec<TraceRecord>,
}

impl Environment {
    /// Builds an environment, refusing domains/problems with lint errors.
    pub fn new(
        domain: &DomainModel,
        problem: &ProblemModel,
        config: EnvConfig,
    ) -> Result<Self, EnvError> {
        let errors = lint(domain, Some(problem))
            .into_iter()
            .filter(|f| f.severity == Severity::Error)
            .count();
        if errors > 0 {
            return Err(EnvError::LintErrorsPresent(errors));
        }
        let grounding = Grounding::new(domain, problem);
        let names: Vec<String> =
            grounding.agents().into_iter().map(str::to_string).collect();
        let agents = names
            .iter()
            .map(|n| AgentRuntime::new(n, names.iter().cloned()))
            .collect();
        let mut env = Environment {
            state: WorldState { dynamic: grounding.dynamic_init.clone(), steps: 0 },
            grounding,
            config,
            agents,
            completed_goals: BTreeSet::new(),
            trace: Vec::new(),
        };
        env.reset();
        Ok(env)
    }

    /// Errors when `names` mentions a non-agent; used to validate policy
    /// maps before binding them to this environment.
    pub fn validate_policy_names<'a>(
        &self,
        names: impl IntoIterator<Item = &'a str>,
    ) -> Result<(), EnvError> {
        let agents: BTreeSet<&str> =
            self.agents.iter().map(|a| a.name.as_str()).collect();
        for n in names {
            if !agents.contains(n) {
                return Err(EnvError::PolicyAgentMismatch(n.to_string()));
            }
        }
        Ok(())
    }

    /// Restores the initial state, empties all hierarchies, and restores the
    /// goal ledger. Goals already satisfied by the initial state count as
    /// completed (without reward).
    pub fn reset(&mut self) -> &WorldState {
        self.state = WorldState { dynamic: self.grounding.dynamic_init.clone(), steps: 0 };
        for a in &mut self.agents {
            a.hierarchy.items.clear();
            a.previous_action = None;
            for b in a.beliefs.values_mut() {
                b.hierarchy.items.clear();
                b.previous_action = None;
            }
        }
        self.completed_goals = self.check_goal_tasks();
        self.trace.clear();
        &self.state
    }

    pub fn agent_names(&self) -> Vec<&str> {
        self.agents.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn agent(&self, name: &str) -> Option<&AgentRuntime> {
        self.agents.iter().find(|a| a.name == name)
    }

    pub fn agent_mut(&mut self, name: &str) -> Option<&mut AgentRuntime> {
        self.agents.iter_mut().find(|a| a.name == name)
    }

    /// All grounded task instances a goal may denote: stated arguments fill
    /// the non-agent parameters (or all of them, when given at full arity);
    /// free agent-typed parameters range over the environment's agents.
    pub fn goal_instances(&self, goal_index: usize) -> Vec<OperatorInstance> {
        let goal = &self.grounding.problem.goal_tasks[goal_index];
        let schema = self
            .grounding
            .domain
            .task(&goal.name)
            .expect("goal task schema");
        if goal.args.len() == schema.params.len() {
            return vec![OperatorInstance::new(
                OperatorKind::Task,
                &goal.name,
                goal.args.clone(),
            )];
        }
        let agents: Vec<&str> = self.agents.iter().map(|a| a.name.as_str()).collect();
        let mut partial: Vec<Vec<String>> = vec![Vec::new()];
        let mut given = goal.args.iter();
        for p in &schema.params {
            if self.grounding.domain.types.is_subtype(&p.ty, AGENT_TYPE) {
                partial = partial
                    .into_iter()
                    .flat_map(|args| {
                        agents.iter().map(move |ag| {
                            let mut a = args.clone();
                            a.push(ag.to_string());
                            a
                        })
                    })
                    .collect();
            } else {
                let v = given.next().expect("goal arity checked by parser").clone();
                for args in &mut partial {
                    args.push(v.clone());
                }
            }
        }
        partial
            .into_iter()
            .map(|args| OperatorInstance::new(OperatorKind::Task, &goal.name, args))
            .collect()
    }

    /// Indices of goal tasks whose effects hold under some agent binding.
    pub fn check_goal_tasks(&self) -> BTreeSet<usize> {
        (0..self.grounding.problem.goal_tasks.len())
            .filter(|&i| {
                self.goal_instances(i)
                    .iter()
                    .any(|op| self.grounding.task_effects_hold(&self.state.dynamic, op))
            })
            .collect()
    }

    /// A goal is ready when every ordering predecessor has completed.
    pub fn goal_ready(&self, goal_index: usize) -> bool {
        self.grounding
            .problem
            .goal_ordering
            .iter()
            .all(|&(before, after)| after != goal_index || self.completed_goals.contains(&before))
    }

    pub fn all_goals_complete(&self) -> bool {
        self.completed_goals.len() == self.grounding.problem.goal_tasks.len()
    }

    /// Grounded argument values in the action's agent-typed parameter slots.
    fn agent_args<'a>(&self, op: &'a OperatorInstance) -> Vec<&'a str> {
        self.grounding.action_agent_args(op)
    }

    fn action_parts(
        &self,
        op: &OperatorInstance,
    ) -> (BTreeSet<String>, BTreeSet<String>, BTreeSet<String>, BTreeSet<String>) {
        self.grounding.action_parts(op)
    }

    fn none_for(&self, agent: &str) -> OperatorInstance {
        OperatorInstance::new(OperatorKind::Action, "none", vec![agent.to_string()])
    }

    /// Pairwise conflict check over executed actions: an agent bound by two
    /// different actions, or any delete/precondition, add/negative-
    /// precondition, add/delete interference between two actions.
    fn check_conflicts(&self, executed: &BTreeMap<String, OperatorInstance>) -> Result<(), EnvError> {
        let distinct: BTreeMap<&str, &OperatorInstance> = executed
            .values()
            .filter(|op| op.name != "none")
            .map(|op| (op.key.as_str(), op))
            .collect();
        let ops: Vec<&OperatorInstance> = distinct.into_values().collect();
        // One action per agent, counting collaborative bindings.
        let mut binder: BTreeMap<&str, &OperatorInstance> = BTreeMap::new();
        for op in &ops {
            for ag in self.agent_args(op) {
                if let Some(prev) = binder.insert(ag, op) {
                    return Err(EnvError::ConflictingJointAction {
                        first: prev.key.clone(),
                        second: op.key.clone(),
                    });
                }
            }
        }
        for i in 0..ops.len() {
            for j in i + 1..ops.len() {
                let (pre_a, npre_a, add_a, del_a) = self.action_parts(ops[i]);
                let (pre_b, npre_b, add_b, del_b) = self.action_parts(ops[j]);
                let clash = !del_a.is_disjoint(&pre_b)
                    || !del_b.is_disjoint(&pre_a)
                    || !add_a.is_disjoint(&npre_b)
                    || !add_b.is_disjoint(&npre_a)
                    || !add_a.is_disjoint(&del_b)
                    || !add_b.is_disjoint(&del_a);
                if clash {
                    return Err(EnvError::ConflictingJointAction {
                        first: ops[i].key.clone(),
                        second: ops[j].key.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Advances the world one step under `joint` (agent name -> grounded
    /// action). Agents missing from the map implicitly submit `none`.
    pub fn step(
        &mut self,
        joint: &BTreeMap<String, OperatorInstance>,
    ) -> Result<StepResult, EnvError> {
        let agent_names: BTreeSet<String> =
            self.agents.iter().map(|a| a.name.clone()).collect();
        for (name, op) in joint {
            if !agent_names.contains(name) {
                return Err(EnvError::UnknownAgent(name.clone()));
            }
            if op.kind != OperatorKind::Action
                || self.grounding.operator(&op.key).is_none()
                || !self.agent_args(op).contains(&name.as_str())
            {
                return Err(EnvError::ActionAgentMismatch {
                    agent: name.clone(),
                    action: op.key.clone(),
                });
            }
        }

        // Phase 1: precondition validation.
        let mut info = StepInfo::default();
        let mut executed: BTreeMap<String, OperatorInstance> = BTreeMap::new();
        for name in &agent_names {
            let op = joint.get(name).cloned().unwrap_or_else(|| self.none_for(name));
            if self.grounding.precondition_holds(&self.state.dynamic, &op) {
                executed.insert(name.clone(), op);
            } else if self.config.strict {
                return Err(EnvError::PreconditionViolated {
                    agent: name.clone(),
                    action: op.key,
                });
            } else {
                info.rejected.insert(name.clone(), op.key);
                executed.insert(name.clone(), self.none_for(name));
            }
        }

        // Phase 2: pairwise conflict check.
        self.check_conflicts(&executed)?;

        // Phase 3: union of deletes, then union of adds, deduplicating
        // identical collaborative instances.
        let before = self.state.dynamic.clone();
        let distinct: BTreeMap<&str, &OperatorInstance> =
            executed.values().map(|op| (op.key.as_str(), op)).collect();
        let mut dels = BTreeSet::new();
        let mut adds = BTreeSet::new();
        for op in distinct.values() {
            let (_, _, a, d) = self.action_parts(op);
            adds.extend(a);
            dels.extend(d);
        }
        for d in &dels {
            self.state.dynamic.remove(d);
        }
        self.state.dynamic.extend(adds);

        // Phase 4: environment actions in canonical order.
        let env_ops: Vec<OperatorInstance> = self
            .grounding
            .environment_actions()
            .into_iter()
            .cloned()
            .collect();
        let max_passes = if self.config.fixpoint_env_actions {
            env_ops.len().max(1)
        } else {
            1
        };
        for _ in 0..max_passes {
            let mut fired = false;
            for op in &env_ops {
                if self.grounding.precondition_holds(&self.state.dynamic, op) {
                    self.grounding.apply_action(&mut self.state.dynamic, op);
                    info.env_actions.push(op.key.clone());
                    fired = true;
                }
            }
            if !fired {
                break;
            }
        }
        info.added = self.state.dynamic.difference(&before).cloned().collect();
        info.removed = before.difference(&self.state.dynamic).cloned().collect();

        // Phase 5: reward.
        let now_complete = self.check_goal_tasks();
        info.newly_completed_goals = now_complete
            .difference(&self.completed_goals)
            .cloned()
            .collect();
        self.completed_goals.extend(now_complete);
        let mut reward = self.config.step_penalty
            + self.config.per_goal_bonus * info.newly_completed_goals.len() as f64;
        let success = self.all_goals_complete();
        if success {
            reward += self.config.success_bonus;
        }

        // Phase 6: counters, done flag, hierarchy updates.
        self.state.steps += 1;
        let done = success || self.state.steps >= self.config.max_steps;

        let executed_keys: BTreeMap<String, String> = executed
            .iter()
            .map(|(a, op)| (a.clone(), op.key.clone()))
            .collect();
        // Hierarchies as they produced this step's actions (pre-sweep).
        let hier_snapshot: BTreeMap<String, Vec<String>> = self
            .agents
            .iter()
            .map(|a| {
                (
                    a.name.clone(),
                    a.hierarchy.items.iter().map(|i| i.op.key.clone()).collect(),
                )
            })
            .collect();
        let grounding = &self.grounding;
        for a in &mut self.agents {
            sweep_hierarchy(
                grounding,
                &self.state.dynamic,
                &mut a.hierarchy,
                executed_keys.get(&a.name).map(String::as_str),
            );
            a.previous_action = executed.get(&a.name).cloned();
        }
        // Full observability: belief copies mirror the true runtimes.
        let snapshots: BTreeMap<String, (crate::agent::Hierarchy, Option<OperatorInstance>)> =
            self.agents
                .iter()
                .map(|a| (a.name.clone(), (a.hierarchy.clone(), a.previous_action.clone())))
                .collect();
        for a in &mut self.agents {
            for (other, belief) in &mut a.beliefs {
                let (h, prev) = snapshots[other].clone();
                belief.hierarchy = h;
                belief.previous_action = prev;
            }
        }

        self.trace.push(TraceRecord {
            step: self.state.steps,
            joint: executed_keys,
            rejected: info.rejected.clone(),
            env_actions: info.env_actions.clone(),
            added: info.added.clone(),
            removed: info.removed.clone(),
            hierarchies: hier_snapshot,
            reward,
            done,
        });

        Ok(StepResult { state: self.state.clone(), reward, done, info })
    }

    /// Serializes the episode trace as JSON lines, one record per step.
    pub fn trace_jsonl(&self) -> String {
        self.trace
            .iter()
            .map(|r| serde_json::to_string(r).expect("trace serializes"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}
