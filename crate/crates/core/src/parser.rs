//! HDDL domain and problem parsing.
//!
//! The supported logic subset is conjunctions of literals with negation and
//! `=` constraints. Quantifiers, disjunctions, and conditional effects are
//! kept as [`UnsupportedConstruct`] markers on the model so lint can report
//! them at their spans; grounding refuses models that carry any.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::ParseError;
use crate::model::*;
use crate::sexpr::{read_one, SExpr, Span};

pub fn parse_domain_str(text: &str) -> Result<DomainModel, ParseError> {
    parse_domain(&read_one(text)?)
}

pub fn parse_problem_str(text: &str, domain: &DomainModel) -> Result<ProblemModel, ParseError> {
    parse_problem(&read_one(text)?, domain)
}

fn expected(what: impl Into<String>, span: Span) -> ParseError {
    ParseError::Expected { what: what.into(), span }
}

fn atom_of(e: &SExpr, what: &str) -> Result<String, ParseError> {
    e.as_atom()
        .map(|s| s.to_string())
        .ok_or_else(|| expected(what, e.span()))
}

fn list_of<'a>(e: &'a SExpr, what: &str) -> Result<&'a [SExpr], ParseError> {
    e.as_list().ok_or_else(|| expected(what, e.span()))
}

/// Parses a typed element list such as `(?v - vehicle ?l1 ?l2 - location ?x)`.
/// Untyped trailing elements default to `object`.
fn parse_typed_list(items: &[SExpr]) -> Result<Vec<(String, String, Span)>, ParseError> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Span)> = Vec::new();
    let mut iter = items.iter().peekable();
    while let Some(item) = iter.next() {
        let text = atom_of(item, "name or `-`")?;
        if text == "-" {
            let ty_expr = iter
                .next()
                .ok_or_else(|| expected("type name after `-`", item.span()))?;
            let ty = atom_of(ty_expr, "type name")?;
            for (name, span) in pending.drain(..) {
                out.push((name, ty.clone(), span));
            }
        } else {
            pending.push((text, item.span()));
        }
    }
    for (name, span) in pending {
        out.push((name, OBJECT_TYPE.to_string(), span));
    }
    Ok(out)
}

fn parse_params(e: &SExpr, types: &TypeHierarchy) -> Result<Vec<Param>, ParseError> {
    let items = list_of(e, "parameter list")?;
    let typed = parse_typed_list(items)?;
    let mut params = Vec::new();
    let mut seen = BTreeSet::new();
    for (name, ty, span) in typed {
        if !name.starts_with('?') {
            return Err(expected("variable starting with `?`", span));
        }
        if !types.contains(&ty) {
            return Err(ParseError::UnknownType { name: ty, span });
        }
        if !seen.insert(name.clone()) {
            return Err(ParseError::DuplicateName { name, span });
        }
        params.push(Param { name, ty });
    }
    Ok(params)
}

struct FormulaCtx<'a> {
    predicates: &'a [PredicateSchema],
    /// Variables in scope; `None` disables the free-variable check.
    vars: Option<&'a BTreeSet<String>>,
    unsupported: &'a mut Vec<UnsupportedConstruct>,
    context: String,
}

impl FormulaCtx<'_> {
    fn check_literal(&mut self, lit: &Literal) -> Result<(), ParseError> {
        if lit.pred == EQ_PRED {
            if lit.terms.len() != 2 {
                return Err(ParseError::ArityMismatch {
                    name: EQ_PRED.to_string(),
                    expected: 2,
                    found: lit.terms.len(),
                    span: lit.span,
                });
            }
        } else {
            let schema = self
                .predicates
                .iter()
                .find(|p| p.name == lit.pred)
                .ok_or_else(|| expected(format!("declared predicate, found `{}`", lit.pred), lit.span))?;
            if schema.params.len() != lit.terms.len() {
                return Err(ParseError::ArityMismatch {
                    name: lit.pred.clone(),
                    expected: schema.params.len(),
                    found: lit.terms.len(),
                    span: lit.span,
                });
            }
        }
        if let Some(vars) = self.vars {
            for t in &lit.terms {
                if let Term::Var(v) = t {
                    if !vars.contains(v) {
                        return Err(expected(
                            format!("variable {v} to be declared in {}", self.context),
                            lit.span,
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn parse_atom_literal(&mut self, e: &SExpr, positive: bool) -> Result<Option<Literal>, ParseError> {
        let items = list_of(e, "literal")?;
        let head = atom_of(&items[0], "predicate name")?;
        let terms = items[1..]
            .iter()
            .map(|t| {
                let s = atom_of(t, "term")?;
                Ok(if s.starts_with('?') { Term::Var(s) } else { Term::Const(s) })
            })
            .collect::<Result<Vec<_>, ParseError>>()?;
        let lit = Literal { positive, pred: head, terms, span: e.span() };
        self.check_literal(&lit)?;
        Ok(Some(lit))
    }

    /// Parses one conjunct. Returns `None` when the construct is unsupported
    /// (it is recorded on the model instead).
    fn parse_conjunct(&mut self, e: &SExpr) -> Result<Option<Literal>, ParseError> {
        let items = list_of(e, "literal or (not ...)")?;
        if items.is_empty() {
            return Err(expected("non-empty literal", e.span()));
        }
        let head = atom_of(&items[0], "literal head")?;
        match head.to_ascii_lowercase().as_str() {
            "not" => {
                if items.len() != 2 {
                    return Err(expected("(not (pred ...))", e.span()));
                }
                self.parse_atom_literal(&items[1], false)
            }
            "or" | "forall" | "exists" | "imply" | "when" | "and" => {
                if head.eq_ignore_ascii_case("and") {
                    return Err(expected("literal, found nested `and`", e.span()));
                }
                self.unsupported.push(UnsupportedConstruct {
                    what: head.to_ascii_lowercase(),
                    context: self.context.clone(),
                    span: e.span(),
                });
                Ok(None)
            }
            _ => self.parse_atom_literal(e, true),
        }
    }

    /// Parses `()`, a single literal, or `(and lit...)` into a conjunction.
    fn parse_conjunction(&mut self, e: &SExpr) -> Result<Vec<Literal>, ParseError> {
        let items = list_of(e, "conjunction")?;
        if items.is_empty() {
            return Ok(Vec::new());
        }
        let conjuncts: Vec<&SExpr> = if items[0].is_keyword("and") {
            items[1..].iter().collect()
        } else {
            vec![e]
        };
        let mut out = Vec::new();
        for c in conjuncts {
            if let Some(lit) = self.parse_conjunct(c)? {
                out.push(lit);
            }
        }
        Ok(out)
    }
}

fn split_effects(effects: Vec<Literal>) -> (Vec<Literal>, Vec<Literal>) {
    let (add, del): (Vec<_>, Vec<_>) = effects.into_iter().partition(|l| l.positive);
    let del = del
        .into_iter()
        .map(|mut l| {
            l.positive = true;
            l
        })
        .collect();
    (add, del)
}

fn param_vars(params: &[Param]) -> BTreeSet<String> {
    params.iter().map(|p| p.name.clone()).collect()
}

/// Splits a block body into `:keyword value...` sections.
fn keyword_sections(items: &[SExpr]) -> Result<Vec<(String, Span, Vec<&SExpr>)>, ParseError> {
    let mut out: Vec<(String, Span, Vec<&SExpr>)> = Vec::new();
    for item in items {
        match item.as_atom() {
            Some(kw) if kw.starts_with(':') => {
                out.push((kw.to_string(), item.span(), Vec::new()));
            }
            _ => match out.last_mut() {
                Some((_, _, vals)) => vals.push(item),
                None => return Err(expected("`:keyword`", item.span())),
            },
        }
    }
    Ok(out)
}

fn single_value<'a>(
    name: &str,
    kw: &str,
    span: Span,
    vals: &[&'a SExpr],
) -> Result<&'a SExpr, ParseError> {
    match vals {
        [v] => Ok(v),
        _ => Err(expected(format!("exactly one value for {kw} in {name}"), span)),
    }
}

pub fn parse_domain(sexpr: &SExpr) -> Result<DomainModel, ParseError> {
    let top = list_of(sexpr, "(define (domain ...) ...)")?;
    if top.is_empty() || !top[0].is_keyword("define") {
        return Err(expected("(define ...)", sexpr.span()));
    }
    let header = list_of(&top[1], "(domain <name>)")?;
    if header.len() != 2 || !header[0].is_keyword("domain") {
        return Err(expected("(domain <name>)", top[1].span()));
    }
    let name = atom_of(&header[1], "domain name")?;

    let mut requirements = Vec::new();
    let mut types = TypeHierarchy::new();
    // `object` and `agent` are reserved roots and always present.
    types.add_type(OBJECT_TYPE);
    types.add_type(AGENT_TYPE);
    let mut constants = BTreeMap::new();
    let mut predicates: Vec<PredicateSchema> = Vec::new();
    let mut unsupported = Vec::new();

    // Blocks are collected first so declarations can appear in any order.
    let mut task_blocks = Vec::new();
    let mut action_blocks = Vec::new();
    let mut method_blocks = Vec::new();

    for block in &top[2..] {
        let items = list_of(block, "domain block")?;
        if items.is_empty() {
            return Err(expected("non-empty domain block", block.span()));
        }
        let head = atom_of(&items[0], "block keyword")?;
        match head.as_str() {
            ":requirements" => {
                for r in &items[1..] {
                    requirements.push(atom_of(r, "requirement")?);
                }
            }
            ":types" => {
                for (child, parent, _) in parse_typed_list(&items[1..])? {
                    if parent == OBJECT_TYPE && child == OBJECT_TYPE {
                        continue;
                    }
                    types.add_edge(&child, &parent);
                }
                if types.has_cycle() {
                    return Err(expected("acyclic type hierarchy", block.span()));
                }
            }
            ":constants" => {
                for (cname, ty, span) in parse_typed_list(&items[1..])? {
                    if !types.contains(&ty) {
                        return Err(ParseError::UnknownType { name: ty, span });
                    }
                    if constants.insert(cname.clone(), ty).is_some() {
                        return Err(ParseError::DuplicateName { name: cname, span });
                    }
                }
            }
            ":predicates" => {
                for p in &items[1..] {
                    let plist = list_of(p, "predicate declaration")?;
                    if plist.is_empty() {
                        return Err(expected("predicate name", p.span()));
                    }
                    let pname = atom_of(&plist[0], "predicate name")?;
                    let params = parse_params(
                        &SExpr::List { items: plist[1..].to_vec(), span: p.span() },
                        &types,
                    )?;
                    if predicates.iter().any(|q| q.name == pname) {
                        return Err(ParseError::DuplicateName { name: pname, span: p.span() });
                    }
                    predicates.push(PredicateSchema { name: pname, params, span: p.span() });
                }
            }
            ":task" => task_blocks.push((items, block.span())),
            ":action" => action_blocks.push((items, block.span())),
            ":method" => method_blocks.push((items, block.span())),
            _ => {
                return Err(ParseError::UnknownBlock { name: head, span: block.span() });
            }
        }
    }

    let mut tasks: Vec<TaskSchema> = Vec::new();
    for (items, span) in task_blocks {
        let tname = atom_of(&items[1], "task name")?;
        if tasks.iter().any(|t| t.name == tname) {
            return Err(ParseError::DuplicateName { name: tname, span });
        }
        let mut params = Vec::new();
        let mut effects = Vec::new();
        let mut has_effect_block = false;
        for (kw, kspan, vals) in keyword_sections(&items[2..])? {
            match kw.as_str() {
                ":parameters" => {
                    params = parse_params(single_value(&tname, &kw, kspan, &vals)?, &types)?;
                }
                ":effect" => {
                    has_effect_block = true;
                    let vars = param_vars(&params);
                    let mut ctx = FormulaCtx {
                        predicates: &predicates,
                        vars: Some(&vars),
                        unsupported: &mut unsupported,
                        context: format!("task {tname}"),
                    };
                    effects = ctx.parse_conjunction(single_value(&tname, &kw, kspan, &vals)?)?;
                }
                _ => return Err(ParseError::UnknownBlock { name: kw, span: kspan }),
            }
        }
        tasks.push(TaskSchema { name: tname, params, effects, has_effect_block, span });
    }

    let mut actions: Vec<ActionSchema> = Vec::new();
    for (items, span) in action_blocks {
        let aname = atom_of(&items[1], "action name")?;
        if actions.iter().any(|a| a.name == aname) {
            return Err(ParseError::DuplicateName { name: aname, span });
        }
        let mut params = Vec::new();
        let mut precondition = Vec::new();
        let mut add_effects = Vec::new();
        let mut del_effects = Vec::new();
        for (kw, kspan, vals) in keyword_sections(&items[2..])? {
            let value = single_value(&aname, &kw, kspan, &vals)?;
            let vars = param_vars(&params);
            let mut ctx = FormulaCtx {
                predicates: &predicates,
                vars: Some(&vars),
                unsupported: &mut unsupported,
                context: format!("action {aname}"),
            };
            match kw.as_str() {
                ":parameters" => params = parse_params(value, &types)?,
                ":precondition" => precondition = ctx.parse_conjunction(value)?,
                ":effect" => {
                    let effects = ctx.parse_conjunction(value)?;
                    (add_effects, del_effects) = split_effects(effects);
                }
                _ => return Err(ParseError::UnknownBlock { name: kw, span: kspan }),
            }
        }
        // Add and delete lists must not overlap.
        for a in &add_effects {
            if del_effects.contains(a) {
                return Err(expected(
                    format!("disjoint add/delete effects in action {aname}"),
                    span,
                ));
            }
        }
        actions.push(ActionSchema { name: aname, params, precondition, add_effects, del_effects, span });
    }

    let mut methods: Vec<MethodSchema> = Vec::new();
    for (items, span) in method_blocks {
        let mname = atom_of(&items[1], "method name")?;
        if methods.iter().any(|m| m.name == mname) {
            return Err(ParseError::DuplicateName { name: mname, span });
        }
        let method = parse_method(&mname, &items[2..], span, &types, &predicates, &tasks, &actions, &mut unsupported)?;
        methods.push(method);
    }

    Ok(DomainModel {
        name,
        requirements,
        types,
        constants,
        predicates,
        tasks,
        actions,
        methods,
        unsupported,
    })
}

/// Parses one subtask entry, either `(label (name args))` or `(name args)`.
fn parse_subtask_entry(e: &SExpr, auto_idx: usize) -> Result<Subtask, ParseError> {
    let items = list_of(e, "subtask")?;
    if items.is_empty() {
        return Err(expected("subtask", e.span()));
    }
    let labeled = items.len() == 2 && items[1].as_list().is_some();
    let (label, body) = if labeled {
        (atom_of(&items[0], "subtask label")?, list_of(&items[1], "subtask body")?)
    } else {
        (format!("t{}", auto_idx + 1), items)
    };
    if body.is_empty() {
        return Err(expected("subtask name", e.span()));
    }
    let name = atom_of(&body[0], "subtask name")?;
    let args = body[1..]
        .iter()
        .map(|t| {
            let s = atom_of(t, "subtask argument")?;
            Ok(if s.starts_with('?') { Term::Var(s) } else { Term::Const(s) })
        })
        .collect::<Result<Vec<_>, ParseError>>()?;
    Ok(Subtask { label, name, args, span: e.span() })
}

#[allow(clippy::too_many_arguments)]
fn parse_method(
    mname: &str,
    body: &[SExpr],
    span: Span,
    types: &TypeHierarchy,
    predicates: &[PredicateSchema],
    tasks: &[TaskSchema],
    actions: &[ActionSchema],
    unsupported: &mut Vec<UnsupportedConstruct>,
) -> Result<MethodSchema, ParseError> {
    let mut params = Vec::new();
    let mut task_name = String::new();
    let mut task_args = Vec::new();
    let mut precondition = Vec::new();
    let mut subtasks: Vec<Subtask> = Vec::new();
    let mut ordering: Vec<(String, String)> = Vec::new();
    let mut total_order_style = false;

    for (kw, kspan, vals) in keyword_sections(body)? {
        match kw.as_str() {
            ":parameters" => {
                params = parse_params(single_value(mname, &kw, kspan, &vals)?, types)?;
            }
            ":task" => {
                let t = list_of(single_value(mname, &kw, kspan, &vals)?, "(task args...)")?;
                if t.is_empty() {
                    return Err(expected("achieved task", kspan));
                }
                task_name = atom_of(&t[0], "task name")?;
                task_args = t[1..]
                    .iter()
                    .map(|a| {
                        let s = atom_of(a, "task argument")?;
                        Ok(if s.starts_with('?') { Term::Var(s) } else { Term::Const(s) })
                    })
                    .collect::<Result<Vec<_>, ParseError>>()?;
            }
            ":precondition" => {
                let vars = param_vars(&params);
                let mut ctx = FormulaCtx {
                    predicates,
                    vars: Some(&vars),
                    unsupported,
                    context: format!("method {mname}"),
                };
                precondition = ctx.parse_conjunction(single_value(mname, &kw, kspan, &vals)?)?;
            }
            ":subtasks" | ":tasks" => {
                let value = single_value(mname, &kw, kspan, &vals)?;
                let items = list_of(value, "subtask list")?;
                let entries: &[SExpr] = if !items.is_empty() && items[0].is_keyword("and") {
                    &items[1..]
                } else {
                    items
                };
                for (i, e) in entries.iter().enumerate() {
                    subtasks.push(parse_subtask_entry(e, i)?);
                }
            }
            ":ordered-subtasks" => {
                total_order_style = true;
                let value = single_value(mname, &kw, kspan, &vals)?;
                let items = list_of(value, "subtask list")?;
                let entries: &[SExpr] = if !items.is_empty() && items[0].is_keyword("and") {
                    &items[1..]
                } else {
                    items
                };
                for (i, e) in entries.iter().enumerate() {
                    // `:ordered-subtasks` entries are unlabeled; normalize to
                    // t1..tn with a total-order chain.
                    let items_e = list_of(e, "subtask")?;
                    if items_e.is_empty() {
                        return Err(expected("subtask", e.span()));
                    }
                    let name = atom_of(&items_e[0], "subtask name")?;
                    let args = items_e[1..]
                        .iter()
                        .map(|t| {
                            let s = atom_of(t, "subtask argument")?;
                            Ok(if s.starts_with('?') { Term::Var(s) } else { Term::Const(s) })
                        })
                        .collect::<Result<Vec<_>, ParseError>>()?;
                    subtasks.push(Subtask { label: format!("t{}", i + 1), name, args, span: e.span() });
                    if i > 0 {
                        ordering.push((format!("t{i}"), format!("t{}", i + 1)));
                    }
                }
            }
            ":ordering" => {
                let value = single_value(mname, &kw, kspan, &vals)?;
                let items = list_of(value, "ordering list")?;
                let entries: &[SExpr] = if !items.is_empty() && items[0].is_keyword("and") {
                    &items[1..]
                } else {
                    items
                };
                for e in entries {
                    let pair = list_of(e, "(a < b)")?;
                    if pair.len() != 3 || pair[1].as_atom() != Some("<") {
                        return Err(expected("(label < label)", e.span()));
                    }
                    ordering.push((atom_of(&pair[0], "label")?, atom_of(&pair[2], "label")?));
                }
            }
            _ => return Err(ParseError::UnknownBlock { name: kw, span: kspan }),
        }
    }

    if task_name.is_empty() {
        return Err(expected(format!("`:task` in method {mname}"), span));
    }
    let achieved = tasks
        .iter()
        .find(|t| t.name == task_name)
        .ok_or_else(|| expected(format!("declared task `{task_name}` achieved by method {mname}"), span))?;
    if achieved.params.len() != task_args.len() {
        return Err(ParseError::ArityMismatch {
            name: task_name.clone(),
            expected: achieved.params.len(),
            found: task_args.len(),
            span,
        });
    }

    // Labels must be distinct and ordering must reference declared labels.
    let mut labels = BTreeSet::new();
    for st in &subtasks {
        if !labels.insert(st.label.clone()) {
            return Err(ParseError::DuplicateName { name: st.label.clone(), span: st.span });
        }
        let known = tasks.iter().any(|t| t.name == st.name)
            || actions.iter().any(|a| a.name == st.name);
        if !known {
            return Err(expected(format!("declared task or action `{}`", st.name), st.span));
        }
        let arity = tasks
            .iter()
            .find(|t| t.name == st.name)
            .map(|t| t.params.len())
            .or_else(|| actions.iter().find(|a| a.name == st.name).map(|a| a.params.len()))
            .unwrap();
        if arity != st.args.len() {
            return Err(ParseError::ArityMismatch {
                name: st.name.clone(),
                expected: arity,
                found: st.args.len(),
                span: st.span,
            });
        }
    }
    for (a, b) in &ordering {
        for l in [a, b] {
            if !labels.contains(l) {
                return Err(expected(format!("declared subtask label `{l}` in method {mname}"), span));
            }
        }
    }
    if ordering_has_cycle(&subtasks, &ordering) {
        return Err(expected(format!("acyclic ordering in method {mname}"), span));
    }

    Ok(MethodSchema {
        name: mname.to_string(),
        params,
        task_name,
        task_args,
        precondition,
        subtasks,
        ordering,
        total_order_style,
        span,
    })
}

fn ordering_has_cycle(subtasks: &[Subtask], ordering: &[(String, String)]) -> bool {
    // Kahn's algorithm over subtask labels.
    let mut indeg: BTreeMap<&str, usize> = subtasks.iter().map(|s| (s.label.as_str(), 0)).collect();
    for (_, after) in ordering {
        if let Some(d) = indeg.get_mut(after.as_str()) {
            *d += 1;
        }
    }
    let mut queue: Vec<&str> = indeg
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(l, _)| *l)
        .collect();
    let mut removed = 0;
    while let Some(l) = queue.pop() {
        removed += 1;
        for (before, after) in ordering {
            if before == l {
                let d = indeg.get_mut(after.as_str()).unwrap();
                *d -= 1;
                if *d == 0 {
                    queue.push(after);
                }
            }
        }
    }
    removed != subtasks.len()
}

pub fn parse_problem(sexpr: &SExpr, domain: &DomainModel) -> Result<ProblemModel, ParseError> {
    let top = list_of(sexpr, "(define (problem ...) ...)")?;
    if top.is_empty() || !top[0].is_keyword("define") {
        return Err(expected("(define ...)", sexpr.span()));
    }
    let header = list_of(&top[1], "(problem <name>)")?;
    if header.len() != 2 || !header[0].is_keyword("problem") {
        return Err(expected("(problem <name>)", top[1].span()));
    }
    let name = atom_of(&header[1], "problem name")?;

    let mut domain_name = String::new();
    let mut objects = BTreeMap::new();
    let mut init = Vec::new();
    let mut goal_tasks: Vec<GoalTask> = Vec::new();
    let mut goal_labels: Vec<String> = Vec::new();
    let mut ordering_pairs: Vec<(String, String)> = Vec::new();
    let mut state_goal = Vec::new();
    let mut unsupported = Vec::new();

    for block in &top[2..] {
        let items = list_of(block, "problem block")?;
        if items.is_empty() {
            return Err(expected("non-empty problem block", block.span()));
        }
        let head = atom_of(&items[0], "block keyword")?;
        match head.as_str() {
            ":domain" => {
                domain_name = atom_of(&items[1], "domain name")?;
                if domain_name != domain.name {
                    return Err(ParseError::DomainNameMismatch {
                        referenced: domain_name,
                        actual: domain.name.clone(),
                    });
                }
            }
            ":objects" => {
                for (oname, ty, span) in parse_typed_list(&items[1..])? {
                    if !domain.types.contains(&ty) {
                        return Err(ParseError::UnknownObjectType { object: oname, ty, span });
                    }
                    if objects.insert(oname.clone(), ty).is_some() {
                        return Err(ParseError::DuplicateName { name: oname, span });
                    }
                }
            }
            ":init" => {
                let all = {
                    let mut m = domain.constants.clone();
                    m.extend(objects.clone());
                    m
                };
                for a in &items[1..] {
                    init.push(parse_init_atom(a, domain, &all)?);
                }
            }
            ":htn" => {
                parse_htn_block(
                    &items[1..],
                    &mut goal_tasks,
                    &mut goal_labels,
                    &mut ordering_pairs,
                )?;
            }
            ":goal" => {
                let mut ctx = FormulaCtx {
                    predicates: &domain.predicates,
                    vars: None,
                    unsupported: &mut unsupported,
                    context: "problem goal".to_string(),
                };
                state_goal = ctx.parse_conjunction(&items[1])?;
            }
            _ => return Err(ParseError::UnknownBlock { name: head, span: block.span() }),
        }
    }

    // Validate goal tasks against the domain. Goals may omit agent-typed
    // parameters; they stay free until claimed by an agent.
    for gt in &goal_tasks {
        let schema = domain
            .task(&gt.name)
            .ok_or_else(|| ParseError::UnknownGoalTask { name: gt.name.clone(), span: gt.span })?;
        let non_agent = schema
            .params
            .iter()
            .filter(|p| !domain.types.is_subtype(&p.ty, AGENT_TYPE))
            .count();
        if gt.args.len() != schema.params.len() && gt.args.len() != non_agent {
            return Err(ParseError::ArityMismatch {
                name: gt.name.clone(),
                expected: schema.params.len(),
                found: gt.args.len(),
                span: gt.span,
            });
        }
    }

    let goal_ordering = ordering_pairs
        .iter()
        .map(|(a, b)| {
            let ia = goal_labels.iter().position(|l| l == a);
            let ib = goal_labels.iter().position(|l| l == b);
            match (ia, ib) {
                (Some(ia), Some(ib)) => Ok((ia, ib)),
                _ => Err(expected(format!("declared goal task label in `{a} < {b}`"), sexpr.span())),
            }
        })
        .collect::<Result<Vec<_>, ParseError>>()?;

    Ok(ProblemModel {
        name,
        domain_name,
        objects,
        init,
        goal_tasks,
        goal_ordering,
        state_goal,
    })
}

fn parse_htn_block(
    body: &[SExpr],
    goal_tasks: &mut Vec<GoalTask>,
    goal_labels: &mut Vec<String>,
    ordering_pairs: &mut Vec<(String, String)>,
) -> Result<(), ParseError> {
    for (kw, kspan, vals) in keyword_sections(body)? {
        match kw.as_str() {
            ":parameters" => {
                let v = single_value("htn", &kw, kspan, &vals)?;
                if !list_of(v, "parameter list")?.is_empty() {
                    return Err(expected("empty :parameters in :htn", v.span()));
                }
            }
            ":tasks" | ":subtasks" | ":ordered-subtasks" => {
                let chain = kw == ":ordered-subtasks";
                let v = single_value("htn", &kw, kspan, &vals)?;
                let items = list_of(v, "goal task list")?;
                let entries: &[SExpr] = if !items.is_empty() && items[0].is_keyword("and") {
                    &items[1..]
                } else {
                    items
                };
                for (i, e) in entries.iter().enumerate() {
                    let st = parse_subtask_entry(e, i)?;
                    let args = st
                        .args
                        .iter()
                        .map(|t| match t {
                            Term::Const(c) => Ok(c.clone()),
                            Term::Var(v) => {
                                Err(expected(format!("constant goal argument, found {v}"), st.span))
                            }
                        })
                        .collect::<Result<Vec<_>, ParseError>>()?;
                    goal_labels.push(st.label.clone());
                    goal_tasks.push(GoalTask { name: st.name, args, span: st.span });
                    if chain && i > 0 {
                        ordering_pairs.push((format!("t{i}"), format!("t{}", i + 1)));
                    }
                }
            }
            ":ordering" => {
                let v = single_value("htn", &kw, kspan, &vals)?;
                let items = list_of(v, "ordering list")?;
                let entries: &[SExpr] = if !items.is_empty() && items[0].is_keyword("and") {
                    &items[1..]
                } else {
                    items
                };
                for e in entries {
                    let pair = list_of(e, "(a < b)")?;
                    if pair.len() != 3 || pair[1].as_atom() != Some("<") {
                        return Err(expected("(label < label)", e.span()));
                    }
                    ordering_pairs.push((
                        atom_of(&pair[0], "label")?,
                        atom_of(&pair[2], "label")?,
                    ));
                }
            }
            _ => return Err(ParseError::UnknownBlock { name: kw, span: kspan }),
        }
    }
    Ok(())
}

fn parse_init_atom(
    e: &SExpr,
    domain: &DomainModel,
    objects: &BTreeMap<String, String>,
) -> Result<InitAtom, ParseError> {
    let items = list_of(e, "init atom")?;
    if items.is_empty() {
        return Err(expected("init atom", e.span()));
    }
    let pred = atom_of(&items[0], "predicate name")?;
    let schema = domain.predicate(&pred).ok_or_else(|| ParseError::InitAtomMismatch {
        pred: pred.clone(),
        reason: "unknown predicate".to_string(),
        span: e.span(),
    })?;
    let args = items[1..]
        .iter()
        .map(|a| atom_of(a, "object name"))
        .collect::<Result<Vec<_>, ParseError>>()?;
    if args.len() != schema.params.len() {
        return Err(ParseError::InitAtomMismatch {
            pred,
            reason: format!("expected {} arguments, found {}", schema.params.len(), args.len()),
            span: e.span(),
        });
    }
    for (arg, param) in args.iter().zip(&schema.params) {
        match objects.get(arg) {
            None => {
                return Err(ParseError::InitAtomMismatch {
                    pred,
                    reason: format!("unknown object {arg}"),
                    span: e.span(),
                })
            }
            Some(ty) if !domain.types.is_subtype(ty, &param.ty) => {
                return Err(ParseError::InitAtomMismatch {
                    pred,
                    reason: format!("object {arg} of type {ty} is not a {}", param.ty),
                    span: e.span(),
                })
            }
            Some(_) => {}
        }
    }
    Ok(InitAtom { pred, args, span: e.span() })
}
