//! Deterministic observation/action encoding: multi-hot blocks over lifted
//! operator names and objects, plus conversion of policy output vectors
//! into probabilities over grounded operator candidates.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::agent::Hierarchy;
use crate::env::Environment;
use crate::ground::{Grounding, OperatorInstance};

/// Which atoms the state block indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LayoutMode {
    /// Only atoms of dynamic predicates (default).
    DynamicOnly,
    /// Every grounded atom, static included.
    FullGrounded,
}

/// Index assignment for observations and policy outputs. A pure function of
/// (domain, problem, mode); never of state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodingLayout {
    pub mode: LayoutMode,
    /// State-block atom keys -> bit index (canonical order).
    pub atom_index: BTreeMap<String, usize>,
    /// Lifted operator names (tasks, methods, actions) -> index.
    pub op_name_index: BTreeMap<String, usize>,
    /// Lifted action names -> index (subset of operator names).
    pub action_name_index: BTreeMap<String, usize>,
    /// Object names -> index.
    pub object_index: BTreeMap<String, usize>,
    /// Other agents in lexicographic order define the trailing blocks; the
    /// observed agent is excluded at encode time.
    pub agent_names: Vec<String>,
    pub state_width: usize,
    /// Width of the goal block and of the own-hierarchy block.
    pub operator_block_width: usize,
    /// Width of one previous-action block.
    pub action_block_width: usize,
    pub observation_width: usize,
    /// |lifted operators| + |objects|.
    pub policy_output_width: usize,
}

/// Per-agent policy head output, aligned to an [`EncodingLayout`]:
/// a distribution over lifted operator names and one over objects.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyOutput {
    pub op_probs: Vec<f64>,
    pub obj_probs: Vec<f64>,
}

impl PolicyOutput {
    /// Uniform distributions for a layout.
    pub fn uniform(layout: &EncodingLayout) -> Self {
        let n = layout.op_name_index.len().max(1);
        let m = layout.object_index.len().max(1);
        PolicyOutput {
            op_probs: vec![1.0 / n as f64; layout.op_name_index.len()],
            obj_probs: vec![1.0 / m as f64; layout.object_index.len()],
        }
    }
}

pub fn build_layout(grounding: &Grounding, mode: LayoutMode) -> EncodingLayout {
    let atoms = match mode {
        LayoutMode::DynamicOnly => &grounding.dynamic_atoms,
        LayoutMode::FullGrounded => &grounding.atoms,
    };
    let atom_index: BTreeMap<String, usize> = atoms
        .iter()
        .enumerate()
        .map(|(i, a)| (a.key.clone(), i))
        .collect();
    let mut op_names: BTreeSet<String> = BTreeSet::new();
    op_names.extend(grounding.domain.tasks.iter().map(|t| t.name.clone()));
    op_names.extend(grounding.domain.methods.iter().map(|m| m.name.clone()));
    op_names.extend(grounding.domain.actions.iter().map(|a| a.name.clone()));
    let op_name_index: BTreeMap<String, usize> = op_names
        .into_iter()
        .enumerate()
        .map(|(i, n)| (n, i))
        .collect();
    let action_name_index: BTreeMap<String, usize> = grounding
        .domain
        .actions
        .iter()
        .map(|a| a.name.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, n)| (n, i))
        .collect();
    let object_index: BTreeMap<String, usize> = grounding
        .objects
        .keys()
        .cloned()
        .enumerate()
        .map(|(i, n)| (n, i))
        .collect();
    let agent_names: Vec<String> =
        grounding.agents().into_iter().map(str::to_string).collect();

    let state_width = atom_index.len();
    let operator_block_width = op_name_index.len() + object_index.len();
    let action_block_width = action_name_index.len() + object_index.len();
    let others = agent_names.len().saturating_sub(1);
    let observation_width =
        state_width + 2 * operator_block_width + others * action_block_width;
    let policy_output_width = operator_block_width;

    EncodingLayout {
        mode,
        atom_index,
        op_name_index,
        action_name_index,
        object_index,
        agent_names,
        state_width,
        operator_block_width,
        action_block_width,
        observation_width,
        policy_output_width,
    }
}

impl EncodingLayout {
    /// Full index-assignment dump as JSON, stable across builds.
    pub fn dump_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }

    /// SHA-256 hex digest of the dump; a cheap layout-compatibility check.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.dump_json().as_bytes());
        format!("{:x}", h.finalize())
    }

    fn set_op_bits(&self, out: &mut [f64], base: usize, op: &OperatorInstance) {
        if let Some(&i) = self.op_name_index.get(&op.name) {
            out[base + i] = 1.0;
        }
        for arg in &op.args {
            if let Some(&j) = self.object_index.get(arg) {
                out[base + self.op_name_index.len() + j] = 1.0;
            }
        }
    }
}

/// Encodes one agent's observation:
/// `[dynamic-atom bits | goal block | own-hierarchy block | one block per
/// other agent's previous action]`. Goal and hierarchy blocks are OR-ed
/// multi-hot over operator names and argument objects; previous-action
/// blocks are one-hot action name plus multi-hot objects, all-zero when the
/// other agent has not acted.
pub fn encode_observation(
    layout: &EncodingLayout,
    state: &BTreeSet<String>,
    goals: &[OperatorInstance],
    hierarchy: &Hierarchy,
    others_prev: &[Option<&OperatorInstance>],
) -> Vec<f64> {
    let mut out = vec![0.0; layout.observation_width];
    for (key, &i) in &layout.atom_index {
        if state.contains(key) {
            out[i] = 1.0;
        }
    }
    let goal_base = layout.state_width;
    for g in goals {
        layout.set_op_bits(&mut out, goal_base, g);
    }
    let hier_base = goal_base + layout.operator_block_width;
    for item in &hierarchy.items {
        layout.set_op_bits(&mut out, hier_base, &item.op);
    }
    let mut base = hier_base + layout.operator_block_width;
    for prev in others_prev {
        if let Some(op) = prev {
            if let Some(&i) = layout.action_name_index.get(&op.name) {
                out[base + i] = 1.0;
            }
            for arg in &op.args {
                if let Some(&j) = layout.object_index.get(arg) {
                    out[base + layout.action_name_index.len() + j] = 1.0;
                }
            }
        }
        base += layout.action_block_width;
    }
    out
}

/// Probability of each candidate under the policy heads: raw score =
/// P(lifted name) x product of P(argument object), normalized over the
/// candidate set; uniform fallback when every raw score is zero.
pub fn grounded_operator_probability(
    layout: &EncodingLayout,
    output: &PolicyOutput,
    candidates: &[OperatorInstance],
) -> Vec<f64> {
    let mut raw: Vec<f64> = candidates
        .iter()
        .map(|op| {
            let mut s = layout
                .op_name_index
                .get(&op.name)
                .map(|&i| output.op_probs[i])
                .unwrap_or(0.0);
            for arg in &op.args {
                s *= layout
                    .object_index
                    .get(arg)
                    .map(|&j| output.obj_probs[j])
                    .unwrap_or(0.0);
            }
            s
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        let u = 1.0 / candidates.len() as f64;
        raw.iter_mut().for_each(|v| *v = u);
    } else {
        raw.iter_mut().for_each(|v| *v /= total);
    }
    raw
}

impl Environment {
    /// Remaining (uncompleted) goal tasks as stated in the problem, used
    /// for the observation goal block.
    pub fn remaining_goal_tasks(&self) -> Vec<OperatorInstance> {
        (0..self.grounding.problem.goal_tasks.len())
            .filter(|i| !self.completed_goals.contains(i))
            .map(|i| {
                let g = &self.grounding.problem.goal_tasks[i];
                OperatorInstance::new(
                    crate::ground::OperatorKind::Task,
                    &g.name,
                    g.args.clone(),
                )
            })
            .collect()
    }

    /// Observation for `agent` against the current environment state.
    pub fn observe(&self, layout: &EncodingLayout, agent: &str) -> Vec<f64> {
        let goals = self.remaining_goal_tasks();
        let runtime = self.agent(agent).expect("known agent");
        let others: Vec<Option<&OperatorInstance>> = self
            .agents
            .iter()
            .filter(|a| a.name != agent)
            .map(|a| a.previous_action.as_ref())
            .collect();
        encode_observation(layout, &self.state.dynamic, &goals, &runtime.hierarchy, &others)
    }
}
