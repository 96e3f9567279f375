use thiserror::Error;

use crate::sexpr::Span;

/// Errors raised while reading or parsing HDDL text.
#[derive(Debug, Clone, Error)]
pub enum ParseError {
    #[error("unbalanced parenthesis at {span}")]
    UnbalancedParenthesis { span: Span },
    #[error("illegal character {ch:?} at {span}")]
    IllegalCharacter { ch: char, span: Span },
    #[error("expected exactly one top-level form, found {found}")]
    ExpectedSingleForm { found: usize },
    #[error("expected {what} at {span}")]
    Expected { what: String, span: Span },
    #[error("unknown block {name} at {span}")]
    UnknownBlock { name: String, span: Span },
    #[error("{name} expects {expected} arguments, found {found} at {span}")]
    ArityMismatch { name: String, expected: usize, found: usize, span: Span },
    #[error("unknown type {name} at {span}")]
    UnknownType { name: String, span: Span },
    #[error("duplicate name {name} at {span}")]
    DuplicateName { name: String, span: Span },
    #[error("object {object} has unknown type {ty} at {span}")]
    UnknownObjectType { object: String, ty: String, span: Span },
    #[error("goal task {name} is not declared in the domain ({span})")]
    UnknownGoalTask { name: String, span: Span },
    #[error("init atom does not match predicate {pred}: {reason} at {span}")]
    InitAtomMismatch { pred: String, reason: String, span: Span },
    #[error("problem references domain {referenced}, but domain is named {actual}")]
    DomainNameMismatch { referenced: String, actual: String },
}

impl ParseError {
    pub fn span(&self) -> Option<Span> {
        match self {
            ParseError::UnbalancedParenthesis { span }
            | ParseError::IllegalCharacter { span, .. }
            | ParseError::Expected { span, .. }
            | ParseError::UnknownBlock { span, .. }
            | ParseError::ArityMismatch { span, .. }
            | ParseError::UnknownType { span, .. }
            | ParseError::DuplicateName { span, .. }
            | ParseError::UnknownObjectType { span, .. }
            | ParseError::UnknownGoalTask { span, .. }
            | ParseError::InitAtomMismatch { span, .. } => Some(*span),
            ParseError::ExpectedSingleForm { .. } | ParseError::DomainNameMismatch { .. } => None,
        }
    }
}

/// Errors raised while mechanically adapting a domain.
#[derive(Debug, Clone, Error)]
pub enum AdaptError {
    #[error("agent type {0} does not exist in the domain type hierarchy")]
    UnknownAgentType(String),
    #[error("effect hint for unknown task {0}")]
    UnknownHintTask(String),
    #[error("effect hint for task {task} uses variable {var} that is not a task parameter")]
    HintVariableMismatch { task: String, var: String },
    #[error("effect hint for task {task}: predicate {pred} expects {expected} terms, found {found}")]
    HintArityMismatch { task: String, pred: String, expected: usize, found: usize },
    #[error("effect hint for task {task} uses unknown predicate {pred}")]
    HintUnknownPredicate { task: String, pred: String },
    #[error("could not parse effects file line {line}: {reason}")]
    BadHintSyntax { line: usize, reason: String },
}

/// Errors raised by the environment.
#[derive(Debug, Clone, Error)]
pub enum EnvError {
    #[error("domain/problem has {0} lint errors; run `lint` for details")]
    LintErrorsPresent(usize),
    #[error("policy map names unknown agent {0}")]
    PolicyAgentMismatch(String),
    #[error("unknown agent {0} in joint action")]
    UnknownAgent(String),
    #[error("agent {agent} submitted action {action} that does not name it as an agent parameter")]
    ActionAgentMismatch { agent: String, action: String },
    #[error("precondition of {action} does not hold for agent {agent}")]
    PreconditionViolated { agent: String, action: String },
    #[error("conflicting joint actions: {first} vs {second}")]
    ConflictingJointAction { first: String, second: String },
}

/// Errors raised by the planner.
#[derive(Debug, Clone, Error)]
pub enum PlanError {
    #[error("all joint combinations were pruned")]
    AllCombinationsPruned,
    #[error("planner exceeded {0} iterations without completing all hierarchies")]
    NonTermination(usize),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Errors raised by policies and training.
#[derive(Debug, Clone, Error)]
pub enum PolicyError {
    #[error("observation layout mismatch: expected hash {expected}, got {found}")]
    LayoutMismatch { expected: String, found: String },
    #[error("non-finite loss encountered during update")]
    NonFiniteLoss,
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
}

/// Errors raised by evaluation and trace rendering.
#[derive(Debug, Clone, Error)]
pub enum EvalError {
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Env(#[from] EnvError),
}
