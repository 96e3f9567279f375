//! Lint rules for the agent-centric HDDL protocol and mechanical adaptation
//! of standard HDDL domains.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::AdaptError;
use crate::model::*;
use crate::printer::print_domain;
use crate::sexpr::{tokenize, SExpr, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Severity::Warning => write!(f, "warning"),
            Severity::Error => write!(f, "error"),
        }
    }
}

/// Fixed rule registry; every finding carries one of these ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RuleId {
    AgentTypeMissing,
    NoneActionMissing,
    TaskEffectMissing,
    ActionNoAgentParam,
    UnreachableMethod,
    UnsupportedConstruct,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::AgentTypeMissing => "AGENT_TYPE_MISSING",
            RuleId::NoneActionMissing => "NONE_ACTION_MISSING",
            RuleId::TaskEffectMissing => "TASK_EFFECT_MISSING",
            RuleId::ActionNoAgentParam => "ACTION_NO_AGENT_PARAM",
            RuleId::UnreachableMethod => "UNREACHABLE_METHOD",
            RuleId::UnsupportedConstruct => "UNSUPPORTED_CONSTRUCT",
        }
    }
}

/// A whole-file replacement that resolves the finding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechanicalFix {
    pub description: String,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LintFinding {
    pub rule: RuleId,
    pub severity: Severity,
    pub message: String,
    pub span: Span,
    pub fix: Option<MechanicalFix>,
}

/// Runs every rule; findings are ordered by span, then rule id.
pub fn lint(domain: &DomainModel, problem: Option<&ProblemModel>) -> Vec<LintFinding> {
    let mut out = Vec::new();
    let origin = Span::point(0, 1, 1);

    if domain.types.agent_types().is_empty() {
        out.push(LintFinding {
            rule: RuleId::AgentTypeMissing,
            severity: Severity::Error,
            message: "no declared type descends from `agent`".to_string(),
            span: origin,
            fix: None,
        });
    }

    if !domain.has_none_action() {
        let mut fixed = domain.clone();
        insert_none_action(&mut fixed);
        out.push(LintFinding {
            rule: RuleId::NoneActionMissing,
            severity: Severity::Error,
            message: "the universal `none` action is missing".to_string(),
            span: origin,
            fix: Some(MechanicalFix {
                description: "insert the `none` action".to_string(),
                replacement: print_domain(&fixed),
            }),
        });
    }

    for t in &domain.tasks {
        if !t.has_effect_block {
            out.push(LintFinding {
                rule: RuleId::TaskEffectMissing,
                severity: Severity::Error,
                message: format!("task {} lacks an `:effect` block", t.name),
                span: t.span,
                fix: None,
            });
        }
    }

    for a in &domain.actions {
        if a.name != NONE_ACTION && a.is_environment_action(&domain.types) {
            out.push(LintFinding {
                rule: RuleId::ActionNoAgentParam,
                severity: Severity::Warning,
                message: format!(
                    "action {} has no agent-typed parameter; it will run as an environment action",
                    a.name
                ),
                span: a.span,
                fix: None,
            });
        }
    }

    // Entry points: the problem's goal tasks when given, otherwise every task
    // that no method lists as a subtask.
    let entry_points: BTreeSet<&str> = match problem {
        Some(p) => p.goal_tasks.iter().map(|g| g.name.as_str()).collect(),
        None => {
            let subtasked: BTreeSet<&str> = domain
                .methods
                .iter()
                .flat_map(|m| m.subtasks.iter().map(|s| s.name.as_str()))
                .collect();
            domain
                .tasks
                .iter()
                .map(|t| t.name.as_str())
                .filter(|t| !subtasked.contains(t))
                .collect()
        }
    };
    let reachable = reachable_tasks(domain, &entry_points);
    for m in &domain.methods {
        if !reachable.contains(m.task_name.as_str()) {
            out.push(LintFinding {
                rule: RuleId::UnreachableMethod,
                severity: Severity::Warning,
                message: format!(
                    "method {} achieves task {}, which no goal or subtask references",
                    m.name, m.task_name
                ),
                span: m.span,
                fix: None,
            });
        }
    }

    for u in &domain.unsupported {
        out.push(LintFinding {
            rule: RuleId::UnsupportedConstruct,
            severity: Severity::Error,
            message: format!("unsupported construct `{}` in {}", u.what, u.context),
            span: u.span,
            fix: None,
        });
    }

    out.sort_by_key(|f| (f.span.start, f.rule));
    out
}

/// Task names reachable from `entry_points` through method decomposition.
fn reachable_tasks<'a>(domain: &'a DomainModel, entry_points: &BTreeSet<&'a str>) -> BTreeSet<&'a str> {
    let mut reach: BTreeSet<&str> = BTreeSet::new();
    let mut stack: Vec<&str> = entry_points.iter().copied().collect();
    while let Some(t) = stack.pop() {
        if !reach.insert(t) {
            continue;
        }
        for m in domain.methods_for_task(t) {
            for st in &m.subtasks {
                if domain.task(&st.name).is_some() {
                    stack.push(&st.name);
                }
            }
        }
    }
    reach
}

/// Appends the universal no-op action.
fn insert_none_action(domain: &mut DomainModel) {
    let span = Span::point(0, 1, 1);
    domain.actions.push(ActionSchema {
        name: NONE_ACTION.to_string(),
        params: vec![Param { name: "?agent".to_string(), ty: AGENT_TYPE.to_string() }],
        precondition: Vec::new(),
        add_effects: Vec::new(),
        del_effects: Vec::new(),
        span,
    });
}

/// Mechanically adapts `domain` to the agent-centric protocol: declares
/// `agent_type` as an agent, inserts the `none` action, and attaches hinted
/// effects to tasks that lack them. Idempotent.
pub fn adapt(
    domain: &DomainModel,
    agent_type: &str,
    task_effect_hints: &BTreeMap<String, Vec<Literal>>,
) -> Result<DomainModel, AdaptError> {
    if !domain.types.contains(agent_type) {
        return Err(AdaptError::UnknownAgentType(agent_type.to_string()));
    }
    let mut out = domain.clone();
    if !out.types.is_subtype(agent_type, AGENT_TYPE) {
        out.types.add_edge(agent_type, AGENT_TYPE);
    }
    if !out.has_none_action() {
        insert_none_action(&mut out);
    }
    for (task_name, lits) in task_effect_hints {
        let task = out
            .tasks
            .iter_mut()
            .find(|t| t.name == *task_name)
            .ok_or_else(|| AdaptError::UnknownHintTask(task_name.clone()))?;
        for lit in lits {
            let schema = domain
                .predicate(&lit.pred)
                .ok_or_else(|| AdaptError::HintUnknownPredicate {
                    task: task_name.clone(),
                    pred: lit.pred.clone(),
                })?;
            if schema.params.len() != lit.terms.len() {
                return Err(AdaptError::HintArityMismatch {
                    task: task_name.clone(),
                    pred: lit.pred.clone(),
                    expected: schema.params.len(),
                    found: lit.terms.len(),
                });
            }
            for t in &lit.terms {
                if let Term::Var(v) = t {
                    if !task.params.iter().any(|p| p.name == *v) {
                        return Err(AdaptError::HintVariableMismatch {
                            task: task_name.clone(),
                            var: v.clone(),
                        });
                    }
                }
            }
        }
        if !task.has_effect_block {
            task.effects = lits.clone();
            task.has_effect_block = true;
        }
    }
    Ok(out)
}

/// Parses a task-effects hint file: one `task = (lit) (lit)...` per line,
/// `#` comments and blank lines ignored.
pub fn parse_effect_hints(text: &str) -> Result<BTreeMap<String, Vec<Literal>>, AdaptError> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (task, rhs) = line.split_once('=').ok_or_else(|| AdaptError::BadHintSyntax {
            line: lineno,
            reason: "expected `task = (literal)...`".to_string(),
        })?;
        let task = task.trim().to_string();
        if task.is_empty() {
            return Err(AdaptError::BadHintSyntax {
                line: lineno,
                reason: "empty task name".to_string(),
            });
        }
        let forms = tokenize(rhs.trim()).map_err(|e| AdaptError::BadHintSyntax {
            line: lineno,
            reason: e.to_string(),
        })?;
        let mut lits = Vec::new();
        for form in &forms {
            lits.push(hint_literal(form, lineno)?);
        }
        if lits.is_empty() {
            return Err(AdaptError::BadHintSyntax {
                line: lineno,
                reason: "no literals after `=`".to_string(),
            });
        }
        out.insert(task, lits);
    }
    Ok(out)
}

fn hint_literal(form: &SExpr, lineno: usize) -> Result<Literal, AdaptError> {
    let bad = |reason: &str| AdaptError::BadHintSyntax { line: lineno, reason: reason.to_string() };
    let items = form.as_list().ok_or_else(|| bad("expected a literal list"))?;
    let (positive, items) = match items.first().and_then(|h| h.as_atom()) {
        Some("not") => {
            let inner = items
                .get(1)
                .and_then(|e| e.as_list())
                .ok_or_else(|| bad("expected (not (pred ...))"))?;
            (false, inner)
        }
        Some(_) => (true, items),
        None => return Err(bad("expected a predicate name")),
    };
    let pred = items[0].as_atom().ok_or_else(|| bad("expected a predicate name"))?.to_string();
    let terms = items[1..]
        .iter()
        .map(|t| {
            let s = t.as_atom().ok_or_else(|| bad("expected a term"))?;
            Ok(if s.starts_with('?') {
                Term::Var(s.to_string())
            } else {
                Term::Const(s.to_string())
            })
        })
        .collect::<Result<Vec<_>, AdaptError>>()?;
    Ok(Literal { positive, pred, terms, span: form.span() })
}
