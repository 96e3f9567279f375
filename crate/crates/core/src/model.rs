//! Parsed and validated HDDL domain/problem models.
//!
//! Model nodes keep their source spans so lint findings and mechanical fixes
//! can point back into the original file. Equality between model values is
//! structural and ignores spans.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::sexpr::Span;

/// Name of the distinguished agent root type.
pub const AGENT_TYPE: &str = "agent";
/// Name of the universal object root type.
pub const OBJECT_TYPE: &str = "object";
/// Reserved equality predicate.
pub const EQ_PRED: &str = "=";
/// Name of the mandatory no-op action.
pub const NONE_ACTION: &str = "none";

/// Type names with parent edges. A type may have several supertypes
/// (`vehicle - locatable` plus `vehicle - agent`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeHierarchy {
    types: BTreeSet<String>,
    parents: BTreeMap<String, BTreeSet<String>>,
}

impl TypeHierarchy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_type(&mut self, name: &str) {
        self.types.insert(name.to_string());
    }

    pub fn add_edge(&mut self, child: &str, parent: &str) {
        self.add_type(child);
        self.add_type(parent);
        self.parents
            .entry(child.to_string())
            .or_default()
            .insert(parent.to_string());
    }

    pub fn contains(&self, name: &str) -> bool {
        self.types.contains(name)
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        self.types.iter().map(|s| s.as_str())
    }

    pub fn parents_of(&self, name: &str) -> impl Iterator<Item = &str> {
        self.parents
            .get(name)
            .into_iter()
            .flat_map(|s| s.iter().map(|s| s.as_str()))
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.parents
            .iter()
            .flat_map(|(c, ps)| ps.iter().map(move |p| (c.as_str(), p.as_str())))
    }

    pub fn has_edge(&self, child: &str, parent: &str) -> bool {
        self.parents
            .get(child)
            .is_some_and(|ps| ps.contains(parent))
    }

    /// `name` and all its transitive supertypes.
    pub fn ancestors(&self, name: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![name.to_string()];
        while let Some(t) = stack.pop() {
            if seen.insert(t.clone()) {
                for p in self.parents_of(&t) {
                    stack.push(p.to_string());
                }
            }
        }
        seen
    }

    /// Reachability over parent edges (reflexive).
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        sub == sup || self.ancestors(sub).contains(sup)
    }

    /// Declared types that descend from `agent`.
    pub fn agent_types(&self) -> BTreeSet<String> {
        self.types
            .iter()
            .filter(|t| t.as_str() != AGENT_TYPE && self.is_subtype(t, AGENT_TYPE))
            .cloned()
            .collect()
    }

    /// True iff the parent relation has a cycle.
    pub fn has_cycle(&self) -> bool {
        // DFS with colors over the edge relation.
        fn visit(
            h: &TypeHierarchy,
            node: &str,
            visiting: &mut BTreeSet<String>,
            done: &mut BTreeSet<String>,
        ) -> bool {
            if done.contains(node) {
                return false;
            }
            if !visiting.insert(node.to_string()) {
                return true;
            }
            for p in h.parents_of(node) {
                let p = p.to_string();
                if visit(h, &p, visiting, done) {
                    return true;
                }
            }
            visiting.remove(node);
            done.insert(node.to_string());
            false
        }
        let mut done = BTreeSet::new();
        for t in &self.types {
            if visit(self, t, &mut BTreeSet::new(), &mut done) {
                return true;
            }
        }
        false
    }
}

/// A typed formal parameter such as `?v - vehicle`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn as_str(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct PredicateSchema {
    pub name: String,
    pub params: Vec<Param>,
    pub span: Span,
}

impl PartialEq for PredicateSchema {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.params == other.params
    }
}

/// A possibly negated predicate application.
#[derive(Debug, Clone)]
pub struct Literal {
    pub positive: bool,
    pub pred: String,
    pub terms: Vec<Term>,
    pub span: Span,
}

impl PartialEq for Literal {
    fn eq(&self, other: &Self) -> bool {
        self.positive == other.positive && self.pred == other.pred && self.terms == other.terms
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            write!(f, "(not ")?;
        }
        write!(f, "({}", self.pred)?;
        for t in &self.terms {
            write!(f, " {t}")?;
        }
        write!(f, ")")?;
        if !self.positive {
            write!(f, ")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<Param>,
    pub precondition: Vec<Literal>,
    pub add_effects: Vec<Literal>,
    pub del_effects: Vec<Literal>,
    pub span: Span,
}

impl PartialEq for ActionSchema {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.params == other.params
            && self.precondition == other.precondition
            && self.add_effects == other.add_effects
            && self.del_effects == other.del_effects
    }
}

impl ActionSchema {
    /// Indices of parameters whose type descends from `agent`.
    pub fn agent_param_indices(&self, types: &TypeHierarchy) -> Vec<usize> {
        self.params
            .iter()
            .enumerate()
            .filter(|(_, p)| types.is_subtype(&p.ty, AGENT_TYPE))
            .map(|(i, _)| i)
            .collect()
    }

    /// An action with no agent-typed parameter is an environment action.
    pub fn is_environment_action(&self, types: &TypeHierarchy) -> bool {
        self.agent_param_indices(types).is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TaskSchema {
    pub name: String,
    pub params: Vec<Param>,
    /// Explicit task effects; the agent-centric extension requires them.
    pub effects: Vec<Literal>,
    /// Whether the source carried an `:effect` block at all (an empty block
    /// still counts as declared).
    pub has_effect_block: bool,
    pub span: Span,
}

impl PartialEq for TaskSchema {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.params == other.params
            && self.effects == other.effects
            && self.has_effect_block == other.has_effect_block
    }
}

#[derive(Debug, Clone)]
pub struct Subtask {
    pub label: String,
    pub name: String,
    pub args: Vec<Term>,
    pub span: Span,
}

impl PartialEq for Subtask {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && self.name == other.name && self.args == other.args
    }
}

#[derive(Debug, Clone)]
pub struct MethodSchema {
    pub name: String,
    pub params: Vec<Param>,
    pub task_name: String,
    pub task_args: Vec<Term>,
    pub precondition: Vec<Literal>,
    pub subtasks: Vec<Subtask>,
    /// Pairs of subtask labels `(before, after)` forming a DAG.
    pub ordering: Vec<(String, String)>,
    /// True when the source used `:ordered-subtasks`; printing preserves the
    /// style but both forms compare equal after normalization.
    pub total_order_style: bool,
    pub span: Span,
}

impl PartialEq for MethodSchema {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.params == other.params
            && self.task_name == other.task_name
            && self.task_args == other.task_args
            && self.precondition == other.precondition
            && self.subtasks == other.subtasks
            && self.ordering == other.ordering
    }
}

impl MethodSchema {
    /// Labels whose ordering predecessors are all in `completed`.
    pub fn ready_labels<'a>(&'a self, completed: &BTreeSet<String>) -> Vec<&'a str> {
        self.subtasks
            .iter()
            .filter(|st| !completed.contains(&st.label))
            .filter(|st| {
                self.ordering
                    .iter()
                    .filter(|(_, after)| *after == st.label)
                    .all(|(before, _)| completed.contains(before))
            })
            .map(|st| st.label.as_str())
            .collect()
    }

    pub fn subtask(&self, label: &str) -> Option<&Subtask> {
        self.subtasks.iter().find(|st| st.label == label)
    }
}

/// A construct the engine does not support (quantifier, disjunction,
/// conditional effect, ...), kept so lint can point at it.
#[derive(Debug, Clone)]
pub struct UnsupportedConstruct {
    pub what: String,
    pub context: String,
    pub span: Span,
}

impl PartialEq for UnsupportedConstruct {
    fn eq(&self, other: &Self) -> bool {
        self.what == other.what && self.context == other.context
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainModel {
    pub name: String,
    pub requirements: Vec<String>,
    pub types: TypeHierarchy,
    /// Domain constants, name -> type.
    pub constants: BTreeMap<String, String>,
    pub predicates: Vec<PredicateSchema>,
    pub tasks: Vec<TaskSchema>,
    pub actions: Vec<ActionSchema>,
    pub methods: Vec<MethodSchema>,
    pub unsupported: Vec<UnsupportedConstruct>,
}

impl DomainModel {
    pub fn predicate(&self, name: &str) -> Option<&PredicateSchema> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn task(&self, name: &str) -> Option<&TaskSchema> {
        self.tasks.iter().find(|t| t.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn method(&self, name: &str) -> Option<&MethodSchema> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn methods_for_task<'a>(&'a self, task: &'a str) -> impl Iterator<Item = &'a MethodSchema> {
        self.methods.iter().filter(move |m| m.task_name == task)
    }

    pub fn has_none_action(&self) -> bool {
        self.action(NONE_ACTION).is_some_and(|a| {
            a.params.len() == 1
                && a.precondition.is_empty()
                && a.add_effects.is_empty()
                && a.del_effects.is_empty()
        })
    }
}

/// A ground atom as written in a problem `:init` block.
#[derive(Debug, Clone)]
pub struct InitAtom {
    pub pred: String,
    pub args: Vec<String>,
    pub span: Span,
}

impl PartialEq for InitAtom {
    fn eq(&self, other: &Self) -> bool {
        self.pred == other.pred && self.args == other.args
    }
}

/// One entry of the problem `:htn :tasks` list. Arguments bind the schema's
/// non-agent parameters when the written arity is short by exactly the
/// agent-typed parameters; those stay free until an agent claims the goal.
#[derive(Debug, Clone)]
pub struct GoalTask {
    pub name: String,
    pub args: Vec<String>,
    pub span: Span,
}

impl PartialEq for GoalTask {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.args == other.args
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemModel {
    pub name: String,
    pub domain_name: String,
    /// Problem objects, name -> type.
    pub objects: BTreeMap<String, String>,
    pub init: Vec<InitAtom>,
    pub goal_tasks: Vec<GoalTask>,
    /// Ordering constraints between goal tasks, as index pairs
    /// `(before, after)` into `goal_tasks`.
    pub goal_ordering: Vec<(usize, usize)>,
    /// Optional state goal formula; stored but not used by the environment.
    pub state_goal: Vec<Literal>,
}

impl ProblemModel {
    /// All object names usable for grounding: problem objects plus domain
    /// constants, with problem declarations taking precedence.
    pub fn all_objects<'a>(&'a self, domain: &'a DomainModel) -> BTreeMap<String, String> {
        let mut out = domain.constants.clone();
        for (k, v) in &self.objects {
            out.insert(k.clone(), v.clone());
        }
        out
    }
}
