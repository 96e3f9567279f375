//! Prints models back to HDDL text.
//!
//! The contract is the round trip: `parse(print(m))` is structurally equal to
//! `m` for any model without unsupported-construct markers.

use std::fmt::Write;

use crate::model::*;

fn write_conjunction(out: &mut String, lits: &[Literal]) {
    if lits.is_empty() {
        out.push_str("()");
        return;
    }
    out.push_str("(and");
    for l in lits {
        write!(out, " {l}").unwrap();
    }
    out.push(')');
}

fn write_params(out: &mut String, params: &[Param]) {
    out.push('(');
    for (i, p) in params.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{} - {}", p.name, p.ty).unwrap();
    }
    out.push(')');
}

fn write_terms(out: &mut String, name: &str, terms: &[Term]) {
    write!(out, "({name}").unwrap();
    for t in terms {
        write!(out, " {t}").unwrap();
    }
    out.push(')');
}

pub fn print_domain(model: &DomainModel) -> String {
    let mut out = String::new();
    writeln!(out, "(define (domain {})", model.name).unwrap();
    if !model.requirements.is_empty() {
        writeln!(out, "  (:requirements {})", model.requirements.join(" ")).unwrap();
    }
    let edges: Vec<_> = model.types.edges().collect();
    if !edges.is_empty() {
        out.push_str("  (:types");
        for (child, parent) in edges {
            write!(out, "\n    {child} - {parent}").unwrap();
        }
        out.push_str(")\n");
    }
    if !model.constants.is_empty() {
        out.push_str("  (:constants");
        for (name, ty) in &model.constants {
            write!(out, " {name} - {ty}").unwrap();
        }
        out.push_str(")\n");
    }
    if !model.predicates.is_empty() {
        out.push_str("  (:predicates");
        for p in &model.predicates {
            write!(out, "\n    ({}", p.name).unwrap();
            for param in &p.params {
                write!(out, " {} - {}", param.name, param.ty).unwrap();
            }
            out.push(')');
        }
        out.push_str(")\n");
    }
    for t in &model.tasks {
        write!(out, "  (:task {}\n    :parameters ", t.name).unwrap();
        write_params(&mut out, &t.params);
        if t.has_effect_block {
            out.push_str("\n    :effect ");
            write_conjunction(&mut out, &t.effects);
        }
        out.push_str(")\n");
    }
    for m in &model.methods {
        write!(out, "  (:method {}\n    :parameters ", m.name).unwrap();
        write_params(&mut out, &m.params);
        out.push_str("\n    :task ");
        write_terms(&mut out, &m.task_name, &m.task_args);
        out.push_str("\n    :precondition ");
        write_conjunction(&mut out, &m.precondition);
        if m.total_order_style {
            out.push_str("\n    :ordered-subtasks (and");
            for st in &m.subtasks {
                out.push(' ');
                write_terms(&mut out, &st.name, &st.args);
            }
            out.push(')');
        } else {
            out.push_str("\n    :subtasks (and");
            for st in &m.subtasks {
                write!(out, " ({} ", st.label).unwrap();
                write_terms(&mut out, &st.name, &st.args);
                out.push(')');
            }
            out.push(')');
            out.push_str("\n    :ordering (and");
            for (a, b) in &m.ordering {
                write!(out, " ({a} < {b})").unwrap();
            }
            out.push(')');
        }
        out.push_str(")\n");
    }
    for a in &model.actions {
        write!(out, "  (:action {}\n    :parameters ", a.name).unwrap();
        write_params(&mut out, &a.params);
        out.push_str("\n    :precondition ");
        write_conjunction(&mut out, &a.precondition);
        out.push_str("\n    :effect ");
        let mut effects: Vec<Literal> = a.add_effects.clone();
        effects.extend(a.del_effects.iter().map(|l| {
            let mut l = l.clone();
            l.positive = false;
            l
        }));
        write_conjunction(&mut out, &effects);
        out.push_str(")\n");
    }
    out.push_str(")\n");
    out
}

pub fn print_problem(model: &ProblemModel) -> String {
    let mut out = String::new();
    writeln!(out, "(define (problem {})", model.name).unwrap();
    writeln!(out, "  (:domain {})", model.domain_name).unwrap();
    if !model.objects.is_empty() {
        out.push_str("  (:objects");
        for (name, ty) in &model.objects {
            write!(out, "\n    {name} - {ty}").unwrap();
        }
        out.push_str(")\n");
    }
    out.push_str("  (:htn\n    :tasks (and");
    for (i, gt) in model.goal_tasks.iter().enumerate() {
        write!(out, "\n      (t{} ({}", i + 1, gt.name).unwrap();
        for a in &gt.args {
            write!(out, " {a}").unwrap();
        }
        out.push_str("))");
    }
    out.push(')');
    out.push_str("\n    :ordering (");
    for (i, (a, b)) in model.goal_ordering.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "(t{} < t{})", a + 1, b + 1).unwrap();
    }
    out.push_str("))\n");
    if !model.init.is_empty() {
        out.push_str("  (:init");
        for atom in &model.init {
            write!(out, "\n    ({}", atom.pred).unwrap();
            for a in &atom.args {
                write!(out, " {a}").unwrap();
            }
            out.push(')');
        }
        out.push_str(")\n");
    }
    if !model.state_goal.is_empty() {
        out.push_str("  (:goal ");
        write_conjunction(&mut out, &model.state_goal);
        out.push_str(")\n");
    }
    out.push_str(")\n");
    out
}
