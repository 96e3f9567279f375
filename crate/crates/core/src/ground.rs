//! Grounding: enumeration of grounded atoms and operators, static/dynamic
//! predicate classification, and dimensional statistics.
//!
//! The canonical string `name(arg1,...,argn)` ordered bytewise is the single
//! source of truth for every enumeration order; observation/action encodings
//! index into these orders.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::model::*;

/// Builds the canonical key `name(arg1,...,argn)`.
pub fn canonical(name: &str, args: &[String]) -> String {
    let mut out = String::with_capacity(name.len() + 2 + args.iter().map(|a| a.len() + 1).sum::<usize>());
    out.push_str(name);
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(a);
    }
    out.push(')');
    out
}

/// A fully instantiated predicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundAtom {
    pub pred: String,
    pub args: Vec<String>,
    pub key: String,
}

impl GroundAtom {
    pub fn new(pred: &str, args: Vec<String>) -> Self {
        let key = canonical(pred, &args);
        GroundAtom { pred: pred.to_string(), args, key }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Task,
    Method,
    Action,
}

/// A fully instantiated task, method, or action. `args` bind the schema's
/// parameters positionally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OperatorInstance {
    pub kind: OperatorKind,
    pub name: String,
    pub args: Vec<String>,
    pub key: String,
}

impl OperatorInstance {
    pub fn new(kind: OperatorKind, name: &str, args: Vec<String>) -> Self {
        let key = canonical(name, &args);
        OperatorInstance { kind, name: name.to_string(), args, key }
    }
}

/// Table-style dimensional statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundingStats {
    pub objects: usize,
    pub lifted_operators: usize,
    pub lifted_actions: usize,
    pub grounded_predicates: usize,
    pub grounded_dynamic_predicates: usize,
    pub grounded_operators: usize,
    pub grounded_actions: usize,
}

/// A predicate is dynamic iff some action's add- or delete-effects mention
/// it; task effects are abstractions and do not count.
pub fn classify_predicates(domain: &DomainModel) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut dynamic = BTreeSet::new();
    for a in &domain.actions {
        for l in a.add_effects.iter().chain(&a.del_effects) {
            dynamic.insert(l.pred.clone());
        }
    }
    let static_set = domain
        .predicates
        .iter()
        .map(|p| p.name.clone())
        .filter(|p| !dynamic.contains(p))
        .collect();
    (static_set, dynamic)
}

/// Shared grounding context for the environment, planner, and encoders.
#[derive(Debug, Clone)]
pub struct Grounding {
    pub domain: DomainModel,
    pub problem: ProblemModel,
    /// Object name -> declared type (problem objects plus domain constants).
    pub objects: BTreeMap<String, String>,
    pub static_preds: BTreeSet<String>,
    pub dynamic_preds: BTreeSet<String>,
    /// All grounded atoms, canonically ordered.
    pub atoms: Vec<GroundAtom>,
    /// The dynamic subset of `atoms`, canonically ordered.
    pub dynamic_atoms: Vec<GroundAtom>,
    /// Grounded operators (statically pruned), canonically ordered.
    pub operators: Vec<OperatorInstance>,
    /// Static atoms holding in the initial state, by canonical key.
    pub static_init: BTreeSet<String>,
    /// Dynamic atoms holding in the initial state, by canonical key.
    pub dynamic_init: BTreeSet<String>,
    /// Operator canonical key -> index into `operators`.
    index: BTreeMap<String, usize>,
    /// Achieved-task canonical key -> indices of grounded methods for it.
    methods_by_task: BTreeMap<String, Vec<usize>>,
}

impl Grounding {
    pub fn new(domain: &DomainModel, problem: &ProblemModel) -> Self {
        let objects = problem.all_objects(domain);
        let (static_preds, dynamic_preds) = classify_predicates(domain);
        let atoms = ground_atoms(domain, problem);
        let dynamic_atoms: Vec<GroundAtom> = atoms
            .iter()
            .filter(|a| dynamic_preds.contains(&a.pred))
            .cloned()
            .collect();
        let mut static_init = BTreeSet::new();
        let mut dynamic_init = BTreeSet::new();
        for a in &problem.init {
            let key = canonical(&a.pred, &a.args);
            if dynamic_preds.contains(&a.pred) {
                dynamic_init.insert(key);
            } else {
                static_init.insert(key);
            }
        }
        let operators = ground_operators_with(domain, problem, &static_preds, &static_init, true);
        let index = operators
            .iter()
            .enumerate()
            .map(|(i, op)| (op.key.clone(), i))
            .collect();
        let mut methods_by_task: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, op) in operators.iter().enumerate() {
            if op.kind != OperatorKind::Method {
                continue;
            }
            let schema = domain.method(&op.name).expect("grounded method has schema");
            let binding = binding_of(&schema.params, &op.args);
            let task_args = bind_terms(&schema.task_args, &binding);
            methods_by_task
                .entry(canonical(&schema.task_name, &task_args))
                .or_default()
                .push(i);
        }
        Grounding {
            domain: domain.clone(),
            problem: problem.clone(),
            objects,
            static_preds,
            dynamic_preds,
            atoms,
            dynamic_atoms,
            operators,
            static_init,
            dynamic_init,
            index,
            methods_by_task,
        }
    }

    pub fn operator(&self, key: &str) -> Option<&OperatorInstance> {
        self.index.get(key).map(|&i| &self.operators[i])
    }

    /// Grounded methods achieving the task instance with canonical `task_key`.
    pub fn methods_for_task_instance(&self, task_key: &str) -> impl Iterator<Item = &OperatorInstance> {
        self.methods_by_task
            .get(task_key)
            .into_iter()
            .flatten()
            .map(move |&i| &self.operators[i])
    }

    /// Objects compatible with `ty`, canonically ordered.
    pub fn objects_of_type(&self, ty: &str) -> Vec<&str> {
        self.objects
            .iter()
            .filter(|(_, oty)| self.domain.types.is_subtype(oty, ty))
            .map(|(name, _)| name.as_str())
            .collect()
    }

    /// The declared agents: objects of agent-descended types.
    pub fn agents(&self) -> Vec<&str> {
        self.objects_of_type(AGENT_TYPE)
    }

    /// True when the atom with canonical `key` holds given the dynamic
    /// `state`; static atoms are checked against the initial state.
    pub fn holds(&self, state: &BTreeSet<String>, pred: &str, key: &str) -> bool {
        if self.dynamic_preds.contains(pred) {
            state.contains(key)
        } else {
            self.static_init.contains(key)
        }
    }

    /// Evaluates one literal under a binding against `state`.
    pub fn literal_holds(
        &self,
        state: &BTreeSet<String>,
        lit: &Literal,
        binding: &BTreeMap<String, String>,
    ) -> bool {
        let args = bind_terms(&lit.terms, binding);
        let truth = if lit.pred == EQ_PRED {
            args[0] == args[1]
        } else {
            self.holds(state, &lit.pred, &canonical(&lit.pred, &args))
        };
        truth == lit.positive
    }

    /// Evaluates a conjunction under a binding.
    pub fn conjunction_holds(
        &self,
        state: &BTreeSet<String>,
        lits: &[Literal],
        binding: &BTreeMap<String, String>,
    ) -> bool {
        lits.iter().all(|l| self.literal_holds(state, l, binding))
    }

    /// Checks an action's or method's precondition for the given instance.
    pub fn precondition_holds(&self, state: &BTreeSet<String>, op: &OperatorInstance) -> bool {
        match op.kind {
            OperatorKind::Action => {
                let schema = self.domain.action(&op.name).expect("action schema");
                let binding = binding_of(&schema.params, &op.args);
                self.conjunction_holds(state, &schema.precondition, &binding)
            }
            OperatorKind::Method => {
                let schema = self.domain.method(&op.name).expect("method schema");
                let binding = binding_of(&schema.params, &op.args);
                self.conjunction_holds(state, &schema.precondition, &binding)
            }
            OperatorKind::Task => true,
        }
    }

    /// Applies an action instance's effects to `state` (deletes first, then
    /// adds, per STRIPS convention).
    pub fn apply_action(&self, state: &mut BTreeSet<String>, op: &OperatorInstance) {
        debug_assert_eq!(op.kind, OperatorKind::Action);
        let schema = self.domain.action(&op.name).expect("action schema");
        let binding = binding_of(&schema.params, &op.args);
        for l in &schema.del_effects {
            state.remove(&canonical(&l.pred, &bind_terms(&l.terms, &binding)));
        }
        for l in &schema.add_effects {
            state.insert(canonical(&l.pred, &bind_terms(&l.terms, &binding)));
        }
    }

    /// A task instance's effects hold in `state` (vacuously true when empty).
    pub fn task_effects_hold(&self, state: &BTreeSet<String>, op: &OperatorInstance) -> bool {
        debug_assert_eq!(op.kind, OperatorKind::Task);
        let schema = self.domain.task(&op.name).expect("task schema");
        let binding = binding_of(&schema.params, &op.args);
        self.conjunction_holds(state, &schema.effects, &binding)
    }

    /// Grounded argument values in an action's agent-typed parameter slots.
    pub fn action_agent_args<'a>(&self, op: &'a OperatorInstance) -> Vec<&'a str> {
        let Some(schema) = self.domain.action(&op.name) else {
            return Vec::new();
        };
        schema
            .agent_param_indices(&self.domain.types)
            .into_iter()
            .map(|i| op.args[i].as_str())
            .collect()
    }

    /// Grounded literal-key sets of an action: (positive preconditions,
    /// negative preconditions, adds, deletes). Equality literals are
    /// excluded (resolved statically, never part of effects).
    pub fn action_parts(
        &self,
        op: &OperatorInstance,
    ) -> (BTreeSet<String>, BTreeSet<String>, BTreeSet<String>, BTreeSet<String>) {
        let schema = self.domain.action(&op.name).expect("action schema");
        let binding = binding_of(&schema.params, &op.args);
        let keys = |lits: &[crate::model::Literal], positive: bool| {
            lits.iter()
                .filter(|l| l.positive == positive && l.pred != "=")
                .map(|l| canonical(&l.pred, &bind_terms(&l.terms, &binding)))
                .collect::<BTreeSet<String>>()
        };
        (
            keys(&schema.precondition, true),
            keys(&schema.precondition, false),
            keys(&schema.add_effects, true),
            keys(&schema.del_effects, true),
        )
    }

    /// Grounded environment actions (agentless, excluding `none`),
    /// canonically ordered.
    pub fn environment_actions(&self) -> Vec<&OperatorInstance> {
        self.operators
            .iter()
            .filter(|op| {
                op.kind == OperatorKind::Action
                    && op.name != NONE_ACTION
                    && self
                        .domain
                        .action(&op.name)
                        .is_some_and(|a| a.is_environment_action(&self.domain.types))
            })
            .collect()
    }

    pub fn stats(&self, prune: bool) -> GroundingStats {
        let operators = if prune {
            self.operators.clone()
        } else {
            ground_operators_with(
                &self.domain,
                &self.problem,
                &self.static_preds,
                &self.static_init,
                false,
            )
        };
        GroundingStats {
            objects: self.objects.len(),
            lifted_operators: self.domain.tasks.len()
                + self.domain.methods.len()
                + self.domain.actions.len(),
            lifted_actions: self.domain.actions.len(),
            grounded_predicates: self.atoms.len(),
            grounded_dynamic_predicates: self.dynamic_atoms.len(),
            grounded_operators: operators.len(),
            grounded_actions: operators
                .iter()
                .filter(|o| o.kind == OperatorKind::Action)
                .count(),
        }
    }
}

/// Positional binding of schema parameters to instance arguments.
pub fn binding_of(params: &[Param], args: &[String]) -> BTreeMap<String, String> {
    debug_assert_eq!(params.len(), args.len());
    params
        .iter()
        .zip(args)
        .map(|(p, a)| (p.name.clone(), a.clone()))
        .collect()
}

/// Substitutes a binding into terms; constants pass through.
pub fn bind_terms(terms: &[Term], binding: &BTreeMap<String, String>) -> Vec<String> {
    terms
        .iter()
        .map(|t| match t {
            Term::Const(c) => c.clone(),
            Term::Var(v) => binding
                .get(v)
                .unwrap_or_else(|| panic!("unbound variable {v}"))
                .clone(),
        })
        .collect()
}

/// All type-consistent argument tuples for `params` over `objects`.
fn bindings<'a>(
    types: &TypeHierarchy,
    objects: &'a BTreeMap<String, String>,
    params: &[Param],
) -> Vec<Vec<&'a str>> {
    let domains: Vec<Vec<&str>> = params
        .iter()
        .map(|p| {
            objects
                .iter()
                .filter(|(_, oty)| types.is_subtype(oty, &p.ty))
                .map(|(name, _)| name.as_str())
                .collect()
        })
        .collect();
    let mut out = vec![Vec::new()];
    for dom in domains {
        let mut next = Vec::with_capacity(out.len() * dom.len().max(1));
        for partial in &out {
            for obj in &dom {
                let mut row = partial.clone();
                row.push(*obj);
                next.push(row);
            }
        }
        out = next;
    }
    out
}

/// All type-consistent grounded atoms, canonically ordered. `=` is resolved
/// at grounding time and never enumerated.
pub fn ground_atoms(domain: &DomainModel, problem: &ProblemModel) -> Vec<GroundAtom> {
    let objects = problem.all_objects(domain);
    let mut out = Vec::new();
    for p in &domain.predicates {
        if p.name == EQ_PRED {
            continue;
        }
        for args in bindings(&domain.types, &objects, &p.params) {
            out.push(GroundAtom::new(
                &p.name,
                args.into_iter().map(str::to_string).collect(),
            ));
        }
    }
    out.sort_by(|a, b| a.key.cmp(&b.key));
    out
}

/// True when the static portion of `precondition` can hold given the initial
/// static atoms: static atoms never change, so a violated static literal
/// makes the instance unreachable.
fn statically_reachable(
    precondition: &[Literal],
    binding: &BTreeMap<String, String>,
    static_preds: &BTreeSet<String>,
    static_init: &BTreeSet<String>,
) -> bool {
    precondition.iter().all(|lit| {
        let args = bind_terms(&lit.terms, binding);
        if lit.pred == EQ_PRED {
            (args[0] == args[1]) == lit.positive
        } else if static_preds.contains(&lit.pred) {
            static_init.contains(&canonical(&lit.pred, &args)) == lit.positive
        } else {
            true
        }
    })
}

fn ground_operators_with(
    domain: &DomainModel,
    problem: &ProblemModel,
    static_preds: &BTreeSet<String>,
    static_init: &BTreeSet<String>,
    prune: bool,
) -> Vec<OperatorInstance> {
    let objects = problem.all_objects(domain);
    let mut out = Vec::new();
    for t in &domain.tasks {
        for args in bindings(&domain.types, &objects, &t.params) {
            out.push(OperatorInstance::new(
                OperatorKind::Task,
                &t.name,
                args.into_iter().map(str::to_string).collect(),
            ));
        }
    }
    for m in &domain.methods {
        for args in bindings(&domain.types, &objects, &m.params) {
            let args: Vec<String> = args.into_iter().map(str::to_string).collect();
            if prune {
                let binding = binding_of(&m.params, &args);
                if !statically_reachable(&m.precondition, &binding, static_preds, static_init) {
                    continue;
                }
            }
            out.push(OperatorInstance::new(OperatorKind::Method, &m.name, args));
        }
    }
    for a in &domain.actions {
        for args in bindings(&domain.types, &objects, &a.params) {
            let args: Vec<String> = args.into_iter().map(str::to_string).collect();
            if prune {
                let binding = binding_of(&a.params, &args);
                if !statically_reachable(&a.precondition, &binding, static_preds, static_init) {
                    continue;
                }
            }
            out.push(OperatorInstance::new(OperatorKind::Action, &a.name, args));
        }
    }
    out.sort_by(|a, b| a.key.cmp(&b.key));
    out
}

/// All type-consistent grounded operators, canonically ordered. With `prune`,
/// instances whose static precondition literals cannot hold in the initial
/// state are dropped.
pub fn ground_operators(
    domain: &DomainModel,
    problem: &ProblemModel,
    prune: bool,
) -> Vec<OperatorInstance> {
    let (static_preds, _) = classify_predicates(domain);
    let static_init: BTreeSet<String> = problem
        .init
        .iter()
        .filter(|a| static_preds.contains(&a.pred))
        .map(|a| canonical(&a.pred, &a.args))
        .collect();
    ground_operators_with(domain, problem, &static_preds, &static_init, prune)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::parser::{parse_domain_str, parse_problem_str};

    fn transport() -> (DomainModel, ProblemModel) {
        let d = parse_domain_str(fixtures::TRANSPORT_DOMAIN).unwrap();
        let p = parse_problem_str(fixtures::TRANSPORT_P01, &d).unwrap();
        (d, p)
    }

    #[test]
    fn classify_transport_predicates() {
        let (d, _) = transport();
        let (static_set, dynamic) = classify_predicates(&d);
        assert!(static_set.contains("road"));
        assert!(static_set.contains("capacity-predecessor"));
        assert!(dynamic.contains("at"));
        assert!(dynamic.contains("in"));
        assert!(dynamic.contains("capacity"));
    }

    #[test]
    fn no_actions_means_all_static() {
        let d = parse_domain_str("(define (domain d) (:predicates (p ?x - object)))").unwrap();
        let (static_set, dynamic) = classify_predicates(&d);
        assert!(dynamic.is_empty());
        assert_eq!(static_set.len(), 1);
    }

    #[test]
    fn none_effects_do_not_make_predicates_dynamic() {
        let (d, _) = transport();
        let (_, dynamic) = classify_predicates(&d);
        assert!(!dynamic.contains("road"));
    }

    // Independent naive oracle: nested loops over raw object lists, written
    // without the production helpers.
    fn oracle_atoms(d: &DomainModel, p: &ProblemModel) -> BTreeSet<String> {
        let objects: Vec<(String, String)> = p
            .all_objects(d)
            .into_iter()
            .collect();
        let mut out = BTreeSet::new();
        for pred in &d.predicates {
            let mut stack: Vec<Vec<String>> = vec![Vec::new()];
            for param in &pred.params {
                let mut next = Vec::new();
                for partial in &stack {
                    for (name, ty) in &objects {
                        if d.types.is_subtype(ty, &param.ty) {
                            let mut row = partial.clone();
                            row.push(name.clone());
                            next.push(row);
                        }
                    }
                }
                stack = next;
            }
            for row in stack {
                out.insert(format!("{}({})", pred.name, row.join(",")));
            }
        }
        out
    }

    fn oracle_operators(d: &DomainModel, p: &ProblemModel) -> BTreeSet<String> {
        let objects: Vec<(String, String)> = p.all_objects(d).into_iter().collect();
        let mut out = BTreeSet::new();
        let mut schemas: Vec<(&str, Vec<&Param>)> = Vec::new();
        for t in &d.tasks {
            schemas.push((&t.name, t.params.iter().collect()));
        }
        for m in &d.methods {
            schemas.push((&m.name, m.params.iter().collect()));
        }
        for a in &d.actions {
            schemas.push((&a.name, a.params.iter().collect()));
        }
        for (name, params) in schemas {
            let mut stack: Vec<Vec<String>> = vec![Vec::new()];
            for param in params {
                let mut next = Vec::new();
                for partial in &stack {
                    for (oname, ty) in &objects {
                        if d.types.is_subtype(ty, &param.ty) {
                            let mut row = partial.clone();
                            row.push(oname.clone());
                            next.push(row);
                        }
                    }
                }
                stack = next;
            }
            for row in stack {
                out.insert(format!("{name}({})", row.join(",")));
            }
        }
        out
    }

    #[test]
    fn atoms_match_naive_oracle_on_all_bundled_problems() {
        let cases = [
            (fixtures::TRANSPORT_DOMAIN, fixtures::TRANSPORT_P01),
            (fixtures::TRANSPORT_DOMAIN, fixtures::TRANSPORT_P02),
            (fixtures::TRANSPORT_DOMAIN, fixtures::TRANSPORT_P03),
            (fixtures::TRANSPORT_COLLAB_DOMAIN, fixtures::TRANSPORT_COLLAB_P02),
            (fixtures::TRANSPORT_COLLAB_DOMAIN, fixtures::TRANSPORT_COLLAB_HETERO),
            (fixtures::HANDOFF_DOMAIN, fixtures::HANDOFF_P01),
        ];
        for (dt, pt) in cases {
            let d = parse_domain_str(dt).unwrap();
            let p = parse_problem_str(pt, &d).unwrap();
            let got: BTreeSet<String> = ground_atoms(&d, &p).into_iter().map(|a| a.key).collect();
            assert_eq!(got, oracle_atoms(&d, &p));
        }
    }

    #[test]
    fn raw_operators_match_naive_oracle() {
        let cases = [
            (fixtures::TRANSPORT_DOMAIN, fixtures::TRANSPORT_P01),
            (fixtures::TRANSPORT_DOMAIN, fixtures::TRANSPORT_P02),
            (fixtures::TRANSPORT_COLLAB_DOMAIN, fixtures::TRANSPORT_COLLAB_HETERO),
            (fixtures::HANDOFF_DOMAIN, fixtures::HANDOFF_P01),
        ];
        for (dt, pt) in cases {
            let d = parse_domain_str(dt).unwrap();
            let p = parse_problem_str(pt, &d).unwrap();
            let raw: BTreeSet<String> =
                ground_operators(&d, &p, false).into_iter().map(|o| o.key).collect();
            assert_eq!(raw, oracle_operators(&d, &p));
            let pruned: BTreeSet<String> =
                ground_operators(&d, &p, true).into_iter().map(|o| o.key).collect();
            assert!(pruned.is_subset(&raw));
        }
    }

    #[test]
    fn pruning_respects_static_preconditions() {
        let (d, p) = transport();
        let pruned = ground_operators(&d, &p, true);
        // Only road-connected drives survive; roads are a 3-node line.
        let drives: Vec<&OperatorInstance> =
            pruned.iter().filter(|o| o.name == "drive").collect();
        assert_eq!(drives.len(), 4);
        for o in drives {
            assert!(p.init.iter().any(|a| {
                a.pred == "road" && a.args == vec![o.args[1].clone(), o.args[2].clone()]
            }));
        }
    }

    #[test]
    fn enumeration_is_deterministic_and_ordered() {
        let (d, p) = transport();
        let a1 = ground_atoms(&d, &p);
        let a2 = ground_atoms(&d, &p);
        assert_eq!(a1, a2);
        assert!(a1.windows(2).all(|w| w[0].key < w[1].key));
        let o1 = ground_operators(&d, &p, true);
        assert!(o1.windows(2).all(|w| w[0].key < w[1].key));
    }

    #[test]
    fn type_soundness_of_emitted_instances() {
        let (d, p) = transport();
        let g = Grounding::new(&d, &p);
        for atom in &g.atoms {
            let schema = d.predicate(&atom.pred).unwrap();
            for (arg, param) in atom.args.iter().zip(&schema.params) {
                let ty = &g.objects[arg];
                assert!(d.types.is_subtype(ty, &param.ty));
            }
        }
        for op in &g.operators {
            let params: &[Param] = match op.kind {
                OperatorKind::Task => &d.task(&op.name).unwrap().params,
                OperatorKind::Method => &d.method(&op.name).unwrap().params,
                OperatorKind::Action => &d.action(&op.name).unwrap().params,
            };
            for (arg, param) in op.args.iter().zip(params) {
                let ty = &g.objects[arg];
                assert!(d.types.is_subtype(ty, &param.ty));
            }
        }
    }

    #[test]
    fn small_product_example() {
        let d = parse_domain_str(
            "(define (domain d)
               (:types location locatable - object
                       vehicle - locatable)
               (:predicates (at ?x - locatable ?l - location)))",
        )
        .unwrap();
        let p = parse_problem_str(
            "(define (problem q) (:domain d)
               (:objects truck-0 - vehicle city-loc-0 city-loc-1 - location)
               (:htn :tasks (and) :ordering ())
               (:init ))",
            &d,
        )
        .unwrap();
        let atoms = ground_atoms(&d, &p);
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[0].key, "at(truck-0,city-loc-0)");
        assert_eq!(atoms[1].key, "at(truck-0,city-loc-1)");
    }

    #[test]
    fn zero_parameter_action_grounds_once() {
        let d = parse_domain_str(
            "(define (domain d)
               (:predicates (p))
               (:action ping :parameters () :precondition () :effect (p)))",
        )
        .unwrap();
        let p = parse_problem_str(
            "(define (problem q) (:domain d)
               (:objects x - object)
               (:htn :tasks (and) :ordering ())
               (:init ))",
            &d,
        )
        .unwrap();
        let ops = ground_operators(&d, &p, false);
        assert_eq!(ops.len(), 1);
        assert_eq!(ops[0].key, "ping()");
    }

    #[test]
    fn one_agent_instance_dimensions() {
        let (d, p) = transport();
        let g = Grounding::new(&d, &p);
        let raw = g.stats(false);
        assert_eq!(raw.objects, 8);
        assert_eq!(raw.lifted_operators, 14);
        assert_eq!(raw.lifted_actions, 4);
        assert_eq!(raw.grounded_dynamic_predicates, 13);
        assert_eq!(raw.grounded_actions, 58);
        let pruned = g.stats(true);
        assert!(pruned.grounded_operators <= raw.grounded_operators);
        assert!(pruned.grounded_actions <= raw.grounded_actions);
    }

    #[test]
    fn two_agent_instance_dimensions() {
        let d = parse_domain_str(fixtures::TRANSPORT_DOMAIN).unwrap();
        let p = parse_problem_str(fixtures::TRANSPORT_P02, &d).unwrap();
        let g = Grounding::new(&d, &p);
        let raw = g.stats(false);
        assert_eq!(raw.objects, 13);
        assert_eq!(raw.grounded_dynamic_predicates, 38);
        assert_eq!(raw.grounded_actions, 610);
    }

    #[test]
    fn stats_grow_with_instance_size() {
        let d = parse_domain_str(fixtures::TRANSPORT_DOMAIN).unwrap();
        let p1 = parse_problem_str(fixtures::TRANSPORT_P01, &d).unwrap();
        let p2 = parse_problem_str(fixtures::TRANSPORT_P02, &d).unwrap();
        let p3 = parse_problem_str(fixtures::TRANSPORT_P03, &d).unwrap();
        let stats: Vec<GroundingStats> = [p1, p2, p3]
            .iter()
            .map(|p| Grounding::new(&d, p).stats(false))
            .collect();
        for w in stats.windows(2) {
            assert!(w[0].objects < w[1].objects);
            assert!(w[0].grounded_predicates < w[1].grounded_predicates);
            assert!(w[0].grounded_dynamic_predicates < w[1].grounded_dynamic_predicates);
            assert!(w[0].grounded_operators < w[1].grounded_operators);
            assert!(w[0].grounded_actions < w[1].grounded_actions);
        }
    }

    #[test]
    fn stats_invariants_hold() {
        let d = parse_domain_str(fixtures::HANDOFF_DOMAIN).unwrap();
        let p = parse_problem_str(fixtures::HANDOFF_P01, &d).unwrap();
        let g = Grounding::new(&d, &p);
        for prune in [false, true] {
            let s = g.stats(prune);
            assert!(s.grounded_actions <= s.grounded_operators);
            assert!(s.lifted_actions <= s.lifted_operators);
            assert!(s.grounded_dynamic_predicates <= s.grounded_predicates);
        }
    }

    #[test]
    fn grounding_context_lookups() {
        let (d, p) = transport();
        let g = Grounding::new(&d, &p);
        assert_eq!(g.agents(), vec!["truck-0"]);
        assert!(g.operator("drive(truck-0,city-loc-2,city-loc-1)").is_some());
        assert!(g.operator("drive(truck-0,city-loc-0,city-loc-2)").is_none());
        let methods: Vec<&str> = g
            .methods_for_task_instance("get-to(truck-0,city-loc-0)")
            .map(|m| m.name.as_str())
            .collect();
        assert!(methods.contains(&"m-drive-to"));
        assert!(methods.contains(&"m-i-am-there"));
        assert!(methods.contains(&"m-drive-to-via"));
    }

    #[test]
    fn state_evaluation_and_effects() {
        let (d, p) = transport();
        let g = Grounding::new(&d, &p);
        let mut state = g.dynamic_init.clone();
        let drive = g.operator("drive(truck-0,city-loc-2,city-loc-1)").unwrap().clone();
        assert!(g.precondition_holds(&state, &drive));
        g.apply_action(&mut state, &drive);
        assert!(state.contains("at(truck-0,city-loc-1)"));
        assert!(!state.contains("at(truck-0,city-loc-2)"));
        // Static `road` atoms remain visible through `holds`.
        assert!(g.holds(&state, "road", "road(city-loc-1,city-loc-2)"));
        // Task effect check: get-to(truck-0, city-loc-1) is now achieved.
        let task = g.operator("get-to(truck-0,city-loc-1)").unwrap();
        assert!(g.task_effects_hold(&state, task));
        let unreached = g.operator("get-to(truck-0,city-loc-0)").unwrap();
        assert!(!g.task_effects_hold(&state, unreached));
    }

    #[test]
    fn environment_actions_are_agentless() {
        let d = parse_domain_str(fixtures::HANDOFF_DOMAIN).unwrap();
        let p = parse_problem_str(fixtures::HANDOFF_P01, &d).unwrap();
        let g = Grounding::new(&d, &p);
        let names: BTreeSet<&str> =
            g.environment_actions().iter().map(|o| o.name.as_str()).collect();
        assert_eq!(names, BTreeSet::from(["scan", "archive"]));
        let (d, p) = transport();
        let g = Grounding::new(&d, &p);
        assert!(g.environment_actions().is_empty());
    }
}
