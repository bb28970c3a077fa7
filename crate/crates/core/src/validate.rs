//! Structural checks: distinct names, label uniqueness, scoping, typing.

use crate::ast::{
    BinOp, Expr, InvariantDef, Label, LabeledPred, ProcessDef, SlpModel, SourceSpan, Stmt,
    StmtKind, Substitution, VarDecl,
};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub rule: &'static str,
    pub severity: Severity,
    pub message: String,
    pub span: SourceSpan,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "{}:{}: {sev}[{}]: {}",
            self.span.begin_line, self.span.begin_col, self.rule, self.message
        )
    }
}

pub fn validate_model(model: &SlpModel) -> Vec<Diagnostic> {
    let mut v = Validator { model, out: Vec::new(), types: BTreeMap::new() };
    v.run();
    let mut out = v.out;
    out.sort_by(|a, b| {
        (a.span.begin, a.rule, &a.message).cmp(&(b.span.begin, b.rule, &b.message))
    });
    out.dedup_by(|a, b| a.span.begin == b.span.begin && a.rule == b.rule && a.message == b.message);
    out
}

#[derive(Clone, Debug, PartialEq)]
enum Ty {
    Int,
    Bool,
    Atom(String),
    Set(Box<Ty>),
    Pair(Box<Ty>, Box<Ty>),
    Any,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Int => f.write_str("int"),
            Ty::Bool => f.write_str("bool"),
            Ty::Atom(s) => f.write_str(s),
            Ty::Set(t) => write!(f, "set({t})"),
            Ty::Pair(a, b) => write!(f, "pair({a}, {b})"),
            Ty::Any => f.write_str("?"),
        }
    }
}

fn unify(a: &Ty, b: &Ty) -> Option<Ty> {
    match (a, b) {
        (Ty::Any, t) | (t, Ty::Any) => Some(t.clone()),
        (Ty::Set(x), Ty::Set(y)) => Some(Ty::Set(Box::new(unify(x, y)?))),
        (Ty::Pair(a1, b1), Ty::Pair(a2, b2)) => {
            Some(Ty::Pair(Box::new(unify(a1, a2)?), Box::new(unify(b1, b2)?)))
        }
        (x, y) if x == y => Some(x.clone()),
        _ => None,
    }
}

struct Validator<'m> {
    model: &'m SlpModel,
    out: Vec<Diagnostic>,
    types: BTreeMap<String, Ty>,
}

/// Where a predicate sits, deciding which names and primes are legal.
struct Names<'a> {
    plain: &'a BTreeSet<String>,
    primed: &'a BTreeSet<String>,
}

impl<'m> Validator<'m> {
    fn err(&mut self, rule: &'static str, span: SourceSpan, message: String) {
        self.out.push(Diagnostic { rule, severity: Severity::Error, message, span });
    }

    fn run(&mut self) {
        let m = self.model;
        let mut context_names = BTreeSet::new();
        for d in m.context.sets.iter().chain(&m.context.constants) {
            if !context_names.insert(d.name.clone()) {
                self.err("distinct-vars", d.span, format!("`{}` declared twice", d.name));
            }
        }
        for s in &m.context.sets {
            self.types.insert(s.name.clone(), Ty::Set(Box::new(Ty::Atom(s.name.clone()))));
        }
        let mut globals = BTreeSet::new();
        for d in &m.globals {
            self.declare(d, &context_names, &globals, "global");
            globals.insert(d.name.clone());
        }

        let none = BTreeSet::new();
        let mut model_labels = BTreeMap::new();
        for ax in &m.context.axioms {
            self.label(&mut model_labels, &ax.label);
            self.names(&ax.predicate, ax.span, &Names { plain: &context_names, primed: &none }, "axiom");
        }
        self.learn_types(m.invariants.iter().map(|i| &i.predicate));
        let cv: BTreeSet<String> = context_names.union(&globals).cloned().collect();
        for inv in &m.invariants {
            self.label(&mut model_labels, &inv.label);
            self.names(&inv.predicate, inv.span, &Names { plain: &cv, primed: &none }, "invariant");
        }
        if let Some(init) = &m.initialisation {
            self.substitution(init, SourceSpan::default(), &cv, &globals, &mut BTreeMap::new());
        }
        if m.processes.is_empty() {
            self.err("need-process", SourceSpan::default(), "a model needs at least one process".into());
        }
        for env in &m.environments {
            self.label(&mut model_labels, &env.label);
            let mut own = BTreeMap::new();
            for p in env.relies.iter().chain(&env.guarantees) {
                self.label(&mut own, &p.label);
                self.names(&p.predicate, p.span, &Names { plain: &cv, primed: &globals }, "rely/guarantee");
            }
            self.refines(&env.refines, env.label.span);
        }
        for p in &m.processes {
            self.label(&mut model_labels, &p.label);
            self.process(p, &context_names, &globals);
        }
        if let Some(mach) = &m.machine {
            let mut mvars = BTreeSet::new();
            for d in &mach.variables {
                self.declare(d, &context_names, &mvars, "machine");
                mvars.insert(d.name.clone());
            }
            let mut saved = std::mem::take(&mut self.types);
            saved.iter().filter(|(k, _)| context_names.contains(*k)).for_each(|(k, t)| {
                self.types.insert(k.clone(), t.clone());
            });
            self.learn_types(mach.invariants.iter().map(|i| &i.predicate));
            let mc: BTreeSet<String> = context_names.union(&mvars).cloned().collect();
            let mut labels = BTreeMap::new();
            for inv in &mach.invariants {
                self.label(&mut labels, &inv.label);
                self.names(&inv.predicate, inv.span, &Names { plain: &mc, primed: &none }, "invariant");
            }
            if let Some(init) = &mach.initialisation {
                self.substitution(init, mach.span, &mc, &mvars, &mut BTreeMap::new());
            }
            let mut events = BTreeMap::new();
            for ev in &mach.events {
                self.label(&mut events, &ev.label);
                self.names(&ev.guard, ev.span, &Names { plain: &mc, primed: &none }, "guard");
                self.substitution(&ev.action, ev.span, &mc, &mvars, &mut BTreeMap::new());
            }
            std::mem::swap(&mut self.types, &mut saved);
        }
        for rm in &m.refmaps {
            let Some(p) = m.process(&rm.process.text) else {
                self.err("unknown-name", rm.span, format!("REFMAP names unknown process `{}`", rm.process));
                continue;
            };
            for (from, to) in &rm.pairs {
                let found = p.body.as_ref().and_then(|b| crate::scope::find_label(b, &from.text));
                if found.is_none() {
                    self.err("unknown-name", from.span, format!("no statement labeled `{from}` in `{}`", p.label));
                }
                if m.machine.as_ref().and_then(|mm| mm.event(&to.text)).is_none() {
                    self.err("unknown-name", to.span, format!("no machine event `{to}`"));
                }
            }
        }
    }

    fn refines(&mut self, refines: &[Label], span: SourceSpan) {
        for l in refines {
            if self.model.machine.as_ref().and_then(|m| m.event(&l.text)).is_none() {
                let s = if l.span.end == 0 { span } else { l.span };
                self.err("unknown-name", s, format!("refined event `{l}` is not in the machine"));
            }
        }
    }

    fn declare(&mut self, d: &VarDecl, outer: &BTreeSet<String>, same: &BTreeSet<String>, what: &str) {
        if outer.contains(&d.name) || same.contains(&d.name) {
            self.err("distinct-vars", d.span, format!("{what} variable `{}` is not distinct", d.name));
        }
    }

    fn label(&mut self, seen: &mut BTreeMap<String, SourceSpan>, l: &Label) {
        if !Label::is_valid(&l.text) {
            self.err("invalid-label", l.span, format!("`{l}` is not a valid label"));
        }
        if seen.insert(l.text.clone(), l.span).is_some() {
            self.err("dup-label", l.span, format!("label `{l}` is not unique"));
        }
    }

    fn process(&mut self, p: &ProcessDef, context: &BTreeSet<String>, globals: &BTreeSet<String>) {
        let outer: BTreeSet<String> = context.union(globals).cloned().collect();
        let mut locals = BTreeSet::new();
        for d in &p.locals {
            self.declare(d, &outer, &locals, "local");
            locals.insert(d.name.clone());
        }
        let saved = self.types.clone();
        self.learn_types(p.invariants.iter().map(|i| &i.predicate));
        let mut labels = BTreeMap::new();
        let cv = &outer;
        for r in p.relies.iter().chain(&p.guarantees) {
            self.label(&mut labels, &r.label);
            self.rg(r, cv, globals, &locals);
        }
        let mut visible = outer.clone();
        visible.extend(locals.iter().cloned());
        for inv in &p.invariants {
            self.label(&mut labels, &inv.label);
            self.names(&inv.predicate, inv.span, &Names { plain: &visible, primed: &BTreeSet::new() }, "invariant");
        }
        self.refines(&p.refines, p.label.span);
        if let Some(body) = &p.body {
            let mut writable = globals.clone();
            writable.extend(locals.iter().cloned());
            self.stmt(body, &visible, &writable, &mut labels);
        }
        self.types = saved;
    }

    fn rg(&mut self, r: &LabeledPred, cv: &BTreeSet<String>, globals: &BTreeSet<String>, locals: &BTreeSet<String>) {
        let free = r.predicate.free_names();
        for n in free.plain.iter().chain(&free.primed) {
            if locals.contains(n) && !globals.contains(n) {
                self.err("rely-scope", r.span, format!("`{}` refers to process local `{n}`", r.label));
            }
        }
        self.names(&r.predicate, r.span, &Names { plain: cv, primed: globals }, "rely/guarantee");
    }

    fn block_invariants(&mut self, defs: &[InvariantDef], visible: &BTreeSet<String>) {
        let mut labels = BTreeMap::new();
        self.learn_types(defs.iter().map(|d| &d.predicate));
        for d in defs {
            self.label(&mut labels, &d.label);
            self.names(&d.predicate, d.span, &Names { plain: visible, primed: &BTreeSet::new() }, "invariant");
        }
    }

    fn stmt(
        &mut self,
        s: &Stmt,
        visible: &BTreeSet<String>,
        writable: &BTreeSet<String>,
        labels: &mut BTreeMap<String, SourceSpan>,
    ) {
        if let Some(l) = &s.label {
            self.label(labels, l);
        }
        let none = BTreeSet::new();
        let plain = |v| Names { plain: v, primed: &none };
        match &s.kind {
            StmtKind::Subst(sub) => self.substitution(sub, s.span, visible, writable, labels),
            StmtKind::Seq(a, b) => {
                self.stmt(a, visible, writable, labels);
                self.stmt(b, visible, writable, labels);
            }
            StmtKind::If { branches, else_body } => {
                for (g, b) in branches {
                    self.names(g, s.span, &plain(visible), "guard");
                    self.predicate(g, s.span);
                    self.stmt(b, visible, writable, labels);
                }
                if let Some(e) = else_body {
                    self.stmt(e, visible, writable, labels);
                }
            }
            StmtKind::While { cond, invariants, variant, body } => {
                self.names(cond, s.span, &plain(visible), "loop condition");
                self.predicate(cond, s.span);
                self.block_invariants(invariants, visible);
                self.names(variant, s.span, &plain(visible), "variant");
                self.expect(variant, &Ty::Int, s.span);
                self.stmt(body, visible, writable, labels);
            }
            StmtKind::Begin { locals, invariants, body } => {
                let mut inner_vis = visible.clone();
                let mut inner_w = writable.clone();
                let mut seen = BTreeSet::new();
                for d in locals {
                    self.declare(d, visible, &seen, "block");
                    seen.insert(d.name.clone());
                }
                inner_vis.extend(seen.iter().cloned());
                inner_w.extend(seen.iter().cloned());
                let saved = self.types.clone();
                self.block_invariants(invariants, &inner_vis);
                self.stmt(body, &inner_vis, &inner_w, labels);
                self.types = saved;
            }
            StmtKind::Assert(cs) => {
                for c in cs {
                    if let Some(l) = &c.label {
                        self.label(labels, l);
                    }
                    self.names(&c.predicate, s.span, &plain(visible), "assertion");
                    self.predicate(&c.predicate, s.span);
                }
            }
            StmtKind::Stop => {}
        }
    }

    fn substitution(
        &mut self,
        sub: &Substitution,
        span: SourceSpan,
        visible: &BTreeSet<String>,
        writable: &BTreeSet<String>,
        labels: &mut BTreeMap<String, SourceSpan>,
    ) {
        let none = BTreeSet::new();
        let mut written: BTreeSet<String> = BTreeSet::new();
        for (l, part) in sub.parts() {
            if let Some(l) = l {
                self.label(labels, l);
            }
            for t in part.targets() {
                if !writable.contains(&t) {
                    self.err("unknown-target", span, format!("`{t}` is not a variable in scope"));
                }
                if !written.insert(t.clone()) {
                    self.err("parallel-overlap", span, format!("`{t}` is written by two parallel parts"));
                }
            }
            match part {
                Substitution::BecomesEqual { target, expr } => {
                    self.names(expr, span, &Names { plain: visible, primed: &none }, "expression");
                    let want = self.types.get(target).cloned().unwrap_or(Ty::Any);
                    self.expect(expr, &want, span);
                }
                Substitution::BecomesIn { target, set } => {
                    self.names(set, span, &Names { plain: visible, primed: &none }, "expression");
                    let want = self.types.get(target).cloned().unwrap_or(Ty::Any);
                    self.expect(set, &Ty::Set(Box::new(want)), span);
                }
                Substitution::BecomesSuchThat { targets, pred } => {
                    let primed: BTreeSet<String> = targets.iter().cloned().collect();
                    self.names(pred, span, &Names { plain: visible, primed: &primed }, "predicate");
                    self.predicate(pred, span);
                }
                Substitution::Parallel(_) => {}
            }
        }
    }

    fn names(&mut self, e: &Expr, span: SourceSpan, ok: &Names<'_>, what: &str) {
        let free = e.free_names();
        for n in &free.plain {
            if !ok.plain.contains(n) {
                self.err("unknown-name", span, format!("{what} refers to unknown name `{n}`"));
            }
        }
        for n in &free.primed {
            if ok.primed.is_empty() {
                self.err("primed-outside-ba", span, format!("{what} may not mention `{n}'`"));
            } else if !ok.primed.contains(n) {
                self.err("unknown-name", span, format!("{what} may not mention `{n}'`"));
            }
        }
        if what != "axiom" && what != "invariant" {
            self.predicate_or_expr(e, span);
        } else {
            self.predicate(e, span);
        }
    }

    fn predicate_or_expr(&mut self, e: &Expr, span: SourceSpan) {
        let _ = self.infer(e, &mut Vec::new(), span);
    }

    fn predicate(&mut self, e: &Expr, span: SourceSpan) {
        self.expect(e, &Ty::Bool, span);
    }

    fn expect(&mut self, e: &Expr, want: &Ty, span: SourceSpan) {
        let got = self.infer(e, &mut Vec::new(), span);
        if unify(&got, want).is_none() {
            self.err("type-error", span, format!("expected {want}, found {got}"));
        }
    }

    /// Variable types from typing conjuncts `x : S` / `x <: S`.
    fn learn_types<'e>(&mut self, preds: impl Iterator<Item = &'e Expr>) {
        for p in preds {
            for c in p.conjuncts() {
                if let Expr::Bin(op @ (BinOp::In | BinOp::Subset), lhs, rhs) = c {
                    if let Expr::Var(n) = &**lhs {
                        if let Ty::Set(elem) = self.infer(rhs, &mut Vec::new(), SourceSpan::default()) {
                            let t = if *op == BinOp::In { *elem } else { Ty::Set(elem) };
                            if !self.types.contains_key(n) {
                                self.types.insert(n.clone(), t);
                            }
                        }
                    }
                }
            }
        }
    }

    fn infer(&mut self, e: &Expr, bound: &mut Vec<(String, Ty)>, span: SourceSpan) -> Ty {
        use BinOp::*;
        let need = |v: &mut Self, t: &Ty, want: &Ty| {
            if unify(t, want).is_none() {
                v.err("type-error", span, format!("expected {want}, found {t} in `{}`", crate::render::render_expr(e)));
            }
        };
        match e {
            Expr::Int(_) => Ty::Int,
            Expr::Bool(_) => Ty::Bool,
            Expr::Var(n) | Expr::Primed(n) => bound
                .iter()
                .rev()
                .find(|(b, _)| b == n)
                .map(|(_, t)| t.clone())
                .or_else(|| self.types.get(n).cloned())
                .unwrap_or(Ty::Any),
            Expr::IntSet | Expr::NatSet | Expr::Nat1Set => Ty::Set(Box::new(Ty::Int)),
            Expr::BoolSet => Ty::Set(Box::new(Ty::Bool)),
            Expr::EmptySet => Ty::Set(Box::new(Ty::Any)),
            Expr::SetLit(items) => {
                let mut t = Ty::Any;
                for it in items {
                    let ti = self.infer(it, bound, span);
                    match unify(&t, &ti) {
                        Some(u) => t = u,
                        None => need(self, &ti, &t),
                    }
                }
                Ty::Set(Box::new(t))
            }
            Expr::Not(p) | Expr::BoolOf(p) => {
                let t = self.infer(p, bound, span);
                need(self, &t, &Ty::Bool);
                Ty::Bool
            }
            Expr::Neg(a) => {
                let t = self.infer(a, bound, span);
                need(self, &t, &Ty::Int);
                Ty::Int
            }
            Expr::Apply(f, a) => {
                let tf = self.infer(f, bound, span);
                let ta = self.infer(a, bound, span);
                match tf {
                    Ty::Set(inner) => match *inner {
                        Ty::Pair(d, r) => {
                            need(self, &ta, &d);
                            *r
                        }
                        Ty::Any => Ty::Any,
                        other => {
                            need(self, &other, &Ty::Pair(Box::new(Ty::Any), Box::new(Ty::Any)));
                            Ty::Any
                        }
                    },
                    Ty::Any => Ty::Any,
                    other => {
                        need(self, &other, &Ty::Set(Box::new(Ty::Any)));
                        Ty::Any
                    }
                }
            }
            Expr::Quant(_, vars, body) => {
                let n = bound.len();
                for v in vars {
                    bound.push((v.clone(), Ty::Any));
                }
                let scope = match &**body {
                    Expr::Bin(Implies, a, _) => &**a,
                    b => b,
                };
                for c in scope.conjuncts() {
                    if let Expr::Bin(op @ (In | Subset), lhs, rhs) = c {
                        if let Expr::Var(x) = &**lhs {
                            if vars.contains(x) {
                                if let Ty::Set(elem) = self.infer(rhs, bound, span) {
                                    let t = if *op == In { *elem } else { Ty::Set(elem) };
                                    if let Some(slot) = bound[n..].iter_mut().rev().find(|(b, _)| b == x) {
                                        slot.1 = t;
                                    }
                                }
                            }
                        }
                    }
                }
                let t = self.infer(body, bound, span);
                need(self, &t, &Ty::Bool);
                bound.truncate(n);
                Ty::Bool
            }
            Expr::Unsupported(kind, args) => {
                if kind == "comprehension" {
                    if let [Expr::SetLit(vs), body] = args.as_slice() {
                        let qv: Vec<String> = vs
                            .iter()
                            .filter_map(|v| if let Expr::Var(n) = v { Some(n.clone()) } else { None })
                            .collect();
                        let q = Expr::Quant(crate::ast::Quantifier::Exists, qv, Box::new(body.clone()));
                        self.infer(&q, bound, span);
                    }
                    return Ty::Set(Box::new(Ty::Any));
                }
                for a in args {
                    self.infer(a, bound, span);
                }
                match kind.as_str() {
                    "card" => Ty::Int,
                    _ => Ty::Any,
                }
            }
            Expr::Bin(op, a, b) => {
                let ta = self.infer(a, bound, span);
                let tb = self.infer(b, bound, span);
                match op {
                    Add | Sub | Mul | Div | Mod => {
                        need(self, &ta, &Ty::Int);
                        need(self, &tb, &Ty::Int);
                        Ty::Int
                    }
                    Lt | Le | Gt | Ge => {
                        need(self, &ta, &Ty::Int);
                        need(self, &tb, &Ty::Int);
                        Ty::Bool
                    }
                    Eq | Neq => {
                        need(self, &tb, &ta);
                        Ty::Bool
                    }
                    And | Or | Implies | Equiv => {
                        need(self, &ta, &Ty::Bool);
                        need(self, &tb, &Ty::Bool);
                        Ty::Bool
                    }
                    In | NotIn => {
                        need(self, &tb, &Ty::Set(Box::new(ta)));
                        Ty::Bool
                    }
                    Subset => {
                        need(self, &tb, &ta);
                        need(self, &ta, &Ty::Set(Box::new(Ty::Any)));
                        Ty::Bool
                    }
                    Union | Inter | Diff => {
                        need(self, &ta, &Ty::Set(Box::new(Ty::Any)));
                        need(self, &tb, &ta);
                        unify(&ta, &tb).unwrap_or(ta)
                    }
                    Interval => {
                        need(self, &ta, &Ty::Int);
                        need(self, &tb, &Ty::Int);
                        Ty::Set(Box::new(Ty::Int))
                    }
                    Maplet => Ty::Pair(Box::new(ta), Box::new(tb)),
                }
            }
        }
    }
}
