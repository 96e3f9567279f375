//! Per-agent runtime state: action hierarchies, belief copies of other
//! agents, and the post-step update sweep.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::ground::{binding_of, bind_terms, Grounding, OperatorInstance, OperatorKind};

/// One hierarchy element plus, for methods, the labels of completed subtasks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierarchyItem {
    pub op: OperatorInstance,
    pub completed: BTreeSet<String>,
}

/// An agent's action hierarchy: root goal task down to (possibly) a leaf
/// action. Kinds alternate task/method except the leaf.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Hierarchy {
    pub items: Vec<HierarchyItem>,
}

impl Hierarchy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn tail(&self) -> Option<&HierarchyItem> {
        self.items.last()
    }

    pub fn push(&mut self, op: OperatorInstance) {
        self.items.push(HierarchyItem { op, completed: BTreeSet::new() });
    }

    pub fn pop(&mut self) -> Option<OperatorInstance> {
        self.items.pop().map(|i| i.op)
    }

    /// The leaf action, when the hierarchy ends in one.
    pub fn leaf_action(&self) -> Option<&OperatorInstance> {
        self.tail()
            .map(|i| &i.op)
            .filter(|op| op.kind == OperatorKind::Action)
    }

    /// The root goal task instance, when present.
    pub fn root_task(&self) -> Option<&OperatorInstance> {
        self.items
            .first()
            .map(|i| &i.op)
            .filter(|op| op.kind == OperatorKind::Task)
    }
}

/// Belief copy of another agent (no nested beliefs).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BeliefAgent {
    pub hierarchy: Hierarchy,
    pub previous_action: Option<OperatorInstance>,
}

/// The agent tuple: name, hierarchy, beliefs about the other agents, and the
/// most recently executed primitive action. The policy handle is kept by the
/// environment, keyed by name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentRuntime {
    pub name: String,
    pub hierarchy: Hierarchy,
    pub beliefs: BTreeMap<String, BeliefAgent>,
    pub previous_action: Option<OperatorInstance>,
}

impl AgentRuntime {
    pub fn new(name: &str, others: impl IntoIterator<Item = String>) -> Self {
        AgentRuntime {
            name: name.to_string(),
            hierarchy: Hierarchy::new(),
            beliefs: others
                .into_iter()
                .filter(|o| o != name)
                .map(|o| (o, BeliefAgent::default()))
                .collect(),
            previous_action: None,
        }
    }

    /// Leaf action executed on the most recent step, `None` before the first.
    pub fn previous_primitive_action(&self) -> Option<&OperatorInstance> {
        self.previous_action.as_ref()
    }
}

/// Marks the subtask of the tail method that `child` instantiated as
/// completed. No-op when the tail is not a method or no matching open
/// subtask exists.
fn mark_progress(grounding: &Grounding, hierarchy: &mut Hierarchy, child: &OperatorInstance) {
    let Some(item) = hierarchy.items.last_mut() else {
        return;
    };
    if item.op.kind != OperatorKind::Method {
        return;
    }
    let Some(schema) = grounding.domain.method(&item.op.name) else {
        return;
    };
    let binding = binding_of(&schema.params, &item.op.args);
    for st in &schema.subtasks {
        if item.completed.contains(&st.label) || st.name != child.name {
            continue;
        }
        if bind_terms(&st.args, &binding) == child.args {
            item.completed.insert(st.label.clone());
            return;
        }
    }
}

/// The hierarchy update sweep: pops completed tail elements and cascades
/// completion upward.
///
/// `executed` is the canonical key of the action this agent actually
/// executed on the step, if any: a leaf action is removed only when it is
/// that action (execution is completion; a lenient-mode rejection leaves the
/// planned leaf in place). Passing `None` gives the purely structural sweep
/// used during planning (methods with all subtasks done, tasks whose effects
/// hold or whose method completed).
pub fn sweep_hierarchy(
    grounding: &Grounding,
    state: &BTreeSet<String>,
    hierarchy: &mut Hierarchy,
    mut executed: Option<&str>,
) {
    // Set when the task now at the tail was completed by its method
    // finishing structurally rather than by its effects.
    let mut method_completed = false;
    loop {
        let Some(item) = hierarchy.items.last() else {
            break;
        };
        match item.op.kind {
            OperatorKind::Action => {
                if executed == Some(item.op.key.as_str()) {
                    executed = None;
                    let op = hierarchy.pop().unwrap();
                    mark_progress(grounding, hierarchy, &op);
                } else {
                    break;
                }
            }
            OperatorKind::Method => {
                let schema = grounding
                    .domain
                    .method(&item.op.name)
                    .expect("method schema");
                let all_done = schema
                    .subtasks
                    .iter()
                    .all(|st| item.completed.contains(&st.label));
                if all_done {
                    hierarchy.pop();
                    method_completed = true;
                } else {
                    break;
                }
            }
            OperatorKind::Task => {
                if method_completed || grounding.task_effects_hold(state, &item.op) {
                    method_completed = false;
                    let op = hierarchy.pop().unwrap();
                    mark_progress(grounding, hierarchy, &op);
                } else {
                    break;
                }
            }
        }
    }
}

/// Applies the update sweep to an agent and every belief copy it holds.
pub fn update_agent(
    grounding: &Grounding,
    state: &BTreeSet<String>,
    agent: &mut AgentRuntime,
    executed: Option<&str>,
    executed_by_others: &BTreeMap<String, String>,
) {
    sweep_hierarchy(grounding, state, &mut agent.hierarchy, executed);
    for (other, belief) in &mut agent.beliefs {
        let key = executed_by_others.get(other).map(String::as_str);
        sweep_hierarchy(grounding, state, &mut belief.hierarchy, key);
    }
}
