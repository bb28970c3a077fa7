//! SMT-LIB v2 export of proof obligations.

use crate::ast::{BinOp, Expr, Quantifier, SlpModel};
use crate::po::ProofObligation;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SmtError {
    #[error("unsupported-construct: {0}")]
    UnsupportedConstruct(String),
}

type SmtResult<T> = Result<T, SmtError>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Ty {
    Int,
    Bool,
    Sort(String),
    Set(Box<Ty>),
    Pair(Box<Ty>, Box<Ty>),
}

impl Ty {
    fn set(t: Ty) -> Ty {
        Ty::Set(Box::new(t))
    }

    fn elem(&self) -> Option<&Ty> {
        match self {
            Ty::Set(t) => Some(t),
            _ => None,
        }
    }

    fn flat(&self) -> Vec<String> {
        match self {
            Ty::Int => vec!["Int".into()],
            Ty::Bool => vec!["Bool".into()],
            Ty::Sort(s) => vec![quote(s)],
            Ty::Pair(a, b) => {
                let mut v = a.flat();
                v.extend(b.flat());
                v
            }
            Ty::Set(_) => vec!["Int".into()],
        }
    }
}

fn quote(name: &str) -> String {
    format!("|{name}|")
}

fn key(e: &Expr) -> Option<String> {
    match e {
        Expr::Var(n) => Some(n.split('~').next().unwrap_or(n).to_string()),
        Expr::Primed(n) => Some(n.clone()),
        _ => None,
    }
}

fn symbol(e: &Expr) -> Option<String> {
    match e {
        Expr::Var(n) => Some(n.clone()),
        Expr::Primed(n) => Some(format!("{n}'")),
        _ => None,
    }
}

struct Types<'m> {
    carriers: BTreeSet<String>,
    env: BTreeMap<String, Ty>,
    applied: BTreeSet<String>,
    changed: bool,
    _model: &'m SlpModel,
}

impl<'m> Types<'m> {
    fn infer(model: &'m SlpModel, exprs: &[&Expr]) -> Types<'m> {
        let mut t = Types {
            carriers: model.context.sets.iter().map(|s| s.name.clone()).collect(),
            env: BTreeMap::new(),
            applied: BTreeSet::new(),
            changed: true,
            _model: model,
        };
        let mut rounds = 0;
        while t.changed && rounds < 32 {
            t.changed = false;
            for e in exprs {
                t.walk(e);
            }
            rounds += 1;
        }
        t
    }

    fn ty(&self, e: &Expr) -> Option<Ty> {
        use BinOp::*;
        match e {
            Expr::Int(_) | Expr::Neg(_) => Some(Ty::Int),
            Expr::Bool(_) | Expr::Not(_) | Expr::BoolOf(_) | Expr::Quant(..) => Some(Ty::Bool),
            Expr::IntSet | Expr::NatSet | Expr::Nat1Set => Some(Ty::set(Ty::Int)),
            Expr::BoolSet => Some(Ty::set(Ty::Bool)),
            Expr::EmptySet | Expr::Unsupported(..) => None,
            Expr::SetLit(xs) => xs.iter().find_map(|x| self.ty(x)).map(Ty::set),
            Expr::Var(n) if self.carriers.contains(n) => Some(Ty::set(Ty::Sort(n.clone()))),
            Expr::Var(_) | Expr::Primed(_) => self.env.get(&key(e)?).cloned(),
            Expr::Apply(f, _) => match self.ty(f)? {
                Ty::Set(p) => match *p {
                    Ty::Pair(_, r) => Some(*r),
                    _ => None,
                },
                _ => None,
            },
            Expr::Bin(op, a, b) => match op {
                Add | Sub | Mul | Div | Mod => Some(Ty::Int),
                Interval => Some(Ty::set(Ty::Int)),
                Union | Inter | Diff => self.ty(a).or_else(|| self.ty(b)),
                Maplet => Some(Ty::Pair(Box::new(self.ty(a)?), Box::new(self.ty(b)?))),
                _ => Some(Ty::Bool),
            },
        }
    }

    fn constrain(&mut self, e: &Expr, t: &Ty) {
        match e {
            Expr::Var(n) if self.carriers.contains(n) => {}
            Expr::Var(_) | Expr::Primed(_) => {
                let k = key(e).expect("named");
                if let std::collections::btree_map::Entry::Vacant(v) = self.env.entry(k) {
                    v.insert(t.clone());
                    self.changed = true;
                }
            }
            Expr::SetLit(xs) => {
                if let Some(el) = t.elem() {
                    for x in xs {
                        self.constrain(x, el);
                    }
                }
            }
            Expr::Bin(BinOp::Union | BinOp::Inter | BinOp::Diff, a, b) => {
                self.constrain(a, t);
                self.constrain(b, t);
            }
            Expr::Bin(BinOp::Maplet, a, b) => {
                if let Ty::Pair(x, y) = t {
                    self.constrain(a, x);
                    self.constrain(b, y);
                }
            }
            Expr::Apply(f, x) => {
                if let Some(a) = self.ty(x) {
                    self.constrain(f, &Ty::set(Ty::Pair(Box::new(a), Box::new(t.clone()))));
                }
            }
            _ => {}
        }
    }

    fn unify(&mut self, a: &Expr, b: &Expr) {
        if let Some(t) = self.ty(a) {
            self.constrain(b, &t);
        }
        if let Some(t) = self.ty(b) {
            self.constrain(a, &t);
        }
    }

    fn walk(&mut self, e: &Expr) {
        use BinOp::*;
        match e {
            Expr::Bin(op, a, b) => {
                match op {
                    Add | Sub | Mul | Div | Mod | Lt | Le | Gt | Ge | Interval => {
                        self.constrain(a, &Ty::Int);
                        self.constrain(b, &Ty::Int);
                    }
                    And | Or | Implies | Equiv => {
                        self.constrain(a, &Ty::Bool);
                        self.constrain(b, &Ty::Bool);
                    }
                    Eq | Neq | Subset | Union | Inter | Diff => self.unify(a, b),
                    In | NotIn => {
                        if let Some(el) = self.ty(b).and_then(|t| t.elem().cloned()) {
                            self.constrain(a, &el);
                        }
                        if let Some(t) = self.ty(a) {
                            self.constrain(b, &Ty::set(t));
                        }
                    }
                    Maplet => {}
                }
                self.walk(a);
                self.walk(b);
            }
            Expr::Neg(a) => {
                self.constrain(a, &Ty::Int);
                self.walk(a);
            }
            Expr::Not(a) | Expr::BoolOf(a) => {
                self.constrain(a, &Ty::Bool);
                self.walk(a);
            }
            Expr::Apply(f, x) => {
                if let Some(k) = key(f) {
                    self.applied.insert(k);
                }
                if let Some(Ty::Set(p)) = self.ty(f) {
                    if let Ty::Pair(a, _) = *p {
                        self.constrain(x, &a);
                    }
                }
                self.walk(f);
                self.walk(x);
            }
            Expr::SetLit(xs) => xs.iter().for_each(|x| self.walk(x)),
            Expr::Quant(_, _, body) => self.walk(body),
            Expr::Unsupported(_, xs) => xs.iter().for_each(|x| self.walk(x)),
            _ => {}
        }
    }

    fn of_name(&self, k: &str) -> Ty {
        self.env.get(k).cloned().unwrap_or(Ty::Int)
    }

    fn is_function(&self, k: &str) -> bool {
        self.applied.contains(k) && matches!(self.env.get(k), Some(Ty::Set(p)) if matches!(**p, Ty::Pair(..)))
    }
}

struct Encoder<'t, 'm> {
    types: &'t Types<'m>,
    fresh: usize,
}

impl Encoder<'_, '_> {
    fn term(&mut self, e: &Expr) -> SmtResult<String> {
        use BinOp::*;
        Ok(match e {
            Expr::Int(n) if *n < 0 => format!("(- {})", n.unsigned_abs()),
            Expr::Int(n) => n.to_string(),
            Expr::Bool(true) => "true".into(),
            Expr::Bool(false) => "false".into(),
            Expr::Var(_) | Expr::Primed(_) => quote(&symbol(e).expect("named")),
            Expr::Neg(a) => format!("(- {})", self.term(a)?),
            Expr::BoolOf(p) => self.formula(p)?,
            Expr::Apply(f, x) => {
                let Some(k) = key(f) else { return Err(unsupported("application of a non-name")) };
                if !self.types.is_function(&k) {
                    return Err(unsupported(&format!("application of {k}")));
                }
                format!("({} {})", quote(&symbol(f).expect("named")), self.elems(x)?.join(" "))
            }
            Expr::Bin(op @ (Add | Sub | Mul | Div | Mod), a, b) => {
                let o = match op {
                    Add => "+",
                    Sub => "-",
                    Mul => "*",
                    Div => "div",
                    _ => "mod",
                };
                format!("({o} {} {})", self.term(a)?, self.term(b)?)
            }
            Expr::Unsupported(w, _) => return Err(unsupported(w)),
            other if self.types.ty(other) == Some(Ty::Bool) => self.formula(other)?,
            other => return Err(unsupported(&format!("set-valued term {}", crate::render::render_expr(other)))),
        })
    }

    fn elems(&mut self, e: &Expr) -> SmtResult<Vec<String>> {
        match e {
            Expr::Bin(BinOp::Maplet, a, b) => {
                let mut v = self.elems(a)?;
                v.extend(self.elems(b)?);
                Ok(v)
            }
            other => Ok(vec![self.term(other)?]),
        }
    }

    fn is_set(&self, e: &Expr) -> bool {
        matches!(self.types.ty(e), Some(Ty::Set(_))) || matches!(e, Expr::EmptySet)
    }

    fn elem_ty(&self, a: &Expr, b: &Expr) -> Ty {
        self.types
            .ty(a)
            .and_then(|t| t.elem().cloned())
            .or_else(|| self.types.ty(b).and_then(|t| t.elem().cloned()))
            .unwrap_or(Ty::Int)
    }

    fn binder(&mut self, t: &Ty) -> (Vec<String>, String) {
        let mut names = Vec::new();
        let mut decls = Vec::new();
        for sort in t.flat() {
            self.fresh += 1;
            let n = format!("|z~{}|", self.fresh);
            decls.push(format!("({n} {sort})"));
            names.push(n);
        }
        (names, decls.join(" "))
    }

    fn set_relation(&mut self, op: BinOp, a: &Expr, b: &Expr) -> SmtResult<String> {
        let t = self.elem_ty(a, b);
        let (zs, decls) = self.binder(&t);
        let ma = self.member(&zs, a)?;
        let mb = self.member(&zs, b)?;
        Ok(match op {
            BinOp::Subset => format!("(forall ({decls}) (=> {ma} {mb}))"),
            BinOp::Neq => format!("(not (forall ({decls}) (= {ma} {mb})))"),
            _ => format!("(forall ({decls}) (= {ma} {mb}))"),
        })
    }

    fn formula(&mut self, e: &Expr) -> SmtResult<String> {
        use BinOp::*;
        Ok(match e {
            Expr::Bool(true) => "true".into(),
            Expr::Bool(false) => "false".into(),
            Expr::Not(a) => format!("(not {})", self.formula(a)?),
            Expr::BoolOf(a) => self.formula(a)?,
            Expr::Var(_) | Expr::Primed(_) | Expr::Apply(..) => self.term(e)?,
            Expr::Quant(q, vars, body) => {
                let decls: Vec<String> = vars
                    .iter()
                    .map(|v| {
                        let t = self.types.of_name(v);
                        match t {
                            Ty::Int | Ty::Bool | Ty::Sort(_) => Ok(format!("({} {})", quote(v), t.flat()[0])),
                            _ => Err(unsupported(&format!("quantified set {v}"))),
                        }
                    })
                    .collect::<SmtResult<_>>()?;
                let kw = match q {
                    Quantifier::ForAll => "forall",
                    Quantifier::Exists => "exists",
                };
                format!("({kw} ({}) {})", decls.join(" "), self.formula(body)?)
            }
            Expr::Bin(op, a, b) => match op {
                And | Or | Implies | Equiv => {
                    let o = match op {
                        And => "and",
                        Or => "or",
                        Implies => "=>",
                        _ => "=",
                    };
                    format!("({o} {} {})", self.formula(a)?, self.formula(b)?)
                }
                Lt | Le | Gt | Ge => {
                    let o = match op {
                        Lt => "<",
                        Le => "<=",
                        Gt => ">",
                        _ => ">=",
                    };
                    format!("({o} {} {})", self.term(a)?, self.term(b)?)
                }
                Eq | Neq if self.is_set(a) || self.is_set(b) => self.set_relation(*op, a, b)?,
                Eq | Neq => {
                    let xs = self.elems(a)?;
                    let ys = self.elems(b)?;
                    let eq = tuple_eq(&xs, &ys);
                    if *op == Eq {
                        eq
                    } else {
                        format!("(not {eq})")
                    }
                }
                Subset => self.set_relation(Subset, a, b)?,
                In => {
                    let xs = self.elems(a)?;
                    self.member(&xs, b)?
                }
                NotIn => {
                    let xs = self.elems(a)?;
                    format!("(not {})", self.member(&xs, b)?)
                }
                _ => return Err(unsupported(&format!("{} as a predicate", op.symbol()))),
            },
            Expr::Unsupported(w, _) => return Err(unsupported(w)),
            other => return Err(unsupported(&format!("{} as a predicate", crate::render::render_expr(other)))),
        })
    }

    fn member(&mut self, xs: &[String], set: &Expr) -> SmtResult<String> {
        use BinOp::*;
        let x = || xs.join(" ");
        Ok(match set {
            Expr::IntSet | Expr::BoolSet => "true".into(),
            Expr::NatSet => format!("(>= {} 0)", x()),
            Expr::Nat1Set => format!("(>= {} 1)", x()),
            Expr::EmptySet => "false".into(),
            Expr::Var(n) if self.types.carriers.contains(n) => "true".into(),
            Expr::Var(_) | Expr::Primed(_) => {
                let k = key(set).expect("named");
                let s = quote(&symbol(set).expect("named"));
                if self.types.is_function(&k) {
                    let (args, last) = xs.split_at(xs.len() - 1);
                    format!("(= ({s} {}) {})", args.join(" "), last[0])
                } else {
                    format!("({s} {})", x())
                }
            }
            Expr::SetLit(items) => {
                let mut alts = Vec::new();
                for i in items {
                    let ys = self.elems(i)?;
                    alts.push(tuple_eq(xs, &ys));
                }
                match alts.len() {
                    0 => "false".into(),
                    1 => alts.pop().expect("one"),
                    _ => format!("(or {})", alts.join(" ")),
                }
            }
            Expr::Bin(Interval, lo, hi) => format!("(and (<= {} {}) (<= {} {}))", self.term(lo)?, x(), x(), self.term(hi)?),
            Expr::Bin(Union, a, b) => format!("(or {} {})", self.member(xs, a)?, self.member(xs, b)?),
            Expr::Bin(Inter, a, b) => format!("(and {} {})", self.member(xs, a)?, self.member(xs, b)?),
            Expr::Bin(Diff, a, b) => format!("(and {} (not {}))", self.member(xs, a)?, self.member(xs, b)?),
            Expr::Unsupported(w, _) => return Err(unsupported(w)),
            other => return Err(unsupported(&format!("membership in {}", crate::render::render_expr(other)))),
        })
    }
}

fn tuple_eq(xs: &[String], ys: &[String]) -> String {
    if xs.len() != ys.len() {
        return "false".into();
    }
    let eqs: Vec<String> = xs.iter().zip(ys).map(|(a, b)| format!("(= {a} {b})")).collect();
    if eqs.len() == 1 {
        eqs[0].clone()
    } else {
        format!("(and {})", eqs.join(" "))
    }
}

fn unsupported(what: &str) -> SmtError {
    SmtError::UnsupportedConstruct(what.to_string())
}

fn free_symbols(e: &Expr, bound: &mut Vec<String>, out: &mut BTreeSet<(String, String)>) {
    match e {
        Expr::Var(n) if !bound.contains(n) => {
            out.insert((n.clone(), key(e).expect("named")));
        }
        Expr::Primed(n) => {
            out.insert((format!("{n}'"), n.clone()));
        }
        Expr::Quant(_, vs, body) => {
            let depth = bound.len();
            bound.extend(vs.iter().cloned());
            free_symbols(body, bound, out);
            bound.truncate(depth);
        }
        other => other.children().into_iter().for_each(|c| free_symbols(c, bound, out)),
    }
}

/// One self-contained script: `unsat` means the obligation holds.
pub fn export_smt(po: &ProofObligation, model: &SlpModel) -> SmtResult<String> {
    script(po, model, false)
}

/// As [`export_smt`], also pinning the `CHECK` section: constant values,
/// carrier set elements and the integer bound on every variable.
pub fn export_smt_bounded(po: &ProofObligation, model: &SlpModel) -> SmtResult<String> {
    script(po, model, true)
}

fn script(po: &ProofObligation, model: &SlpModel, bounded: bool) -> SmtResult<String> {
    if let Some(w) = po.sequent.goal.contains_unsupported() {
        return Err(unsupported(w));
    }
    for h in &po.sequent.hyps {
        if let Some(w) = h.pred.contains_unsupported() {
            return Err(unsupported(w));
        }
    }
    let has_axm = po.sequent.hyps.iter().any(|h| h.label.as_deref() == Some("AXM"));
    let axioms: Vec<(String, &Expr)> = if has_axm {
        Vec::new()
    } else {
        model.context.axioms.iter().map(|a| (format!("AXM {}", a.label), &a.predicate)).collect()
    };
    let mut asserted: Vec<(String, &Expr)> = axioms;
    for h in &po.sequent.hyps {
        asserted.push((h.label.clone().unwrap_or_else(|| "hyp".into()), &h.pred));
    }
    let check = model.check.clone().unwrap_or_default();
    let mut all: Vec<&Expr> = asserted.iter().map(|(_, e)| *e).collect();
    all.push(&po.sequent.goal);
    if bounded {
        all.extend(check.consts.iter().map(|(_, e)| e));
        all.extend(check.domains.iter().map(|(_, e)| e));
    }
    let pinned: Vec<Expr> = if bounded {
        check.consts.iter().map(|(n, e)| Expr::eq(Expr::var(n), e.clone())).collect()
    } else {
        Vec::new()
    };
    all.extend(pinned.iter());
    let types = Types::infer(model, &all);

    let mut symbols = BTreeSet::new();
    for e in asserted.iter().map(|(_, e)| *e).chain([&po.sequent.goal]) {
        free_symbols(e, &mut Vec::new(), &mut symbols);
    }
    let symbols: Vec<(String, String)> =
        symbols.into_iter().filter(|(_, k)| !types.carriers.contains(k)).collect();

    let mut enc = Encoder { types: &types, fresh: 0 };
    let mut out = String::new();
    writeln!(out, "; {}", po.id).ok();
    writeln!(out, "(set-logic ALL)").ok();
    for s in &types.carriers {
        writeln!(out, "(declare-sort {} 0)", quote(s)).ok();
    }
    for (sym, k) in &symbols {
        let t = types.of_name(k);
        let line = match &t {
            Ty::Set(el) if types.is_function(k) => {
                let Ty::Pair(d, r) = &**el else { unreachable!("function type") };
                format!("(declare-fun {} ({}) {})", quote(sym), d.flat().join(" "), r.flat().join(" "))
            }
            Ty::Set(el) => format!("(declare-fun {} ({}) Bool)", quote(sym), el.flat().join(" ")),
            Ty::Pair(..) => return Err(unsupported(&format!("pair-valued name {sym}"))),
            scalar => format!("(declare-const {} {})", quote(sym), scalar.flat()[0]),
        };
        writeln!(out, "{line}").ok();
    }
    if bounded {
        bounds(&mut out, &mut enc, &check, &symbols)?;
    }
    for (label, e) in &asserted {
        if e.is_true() {
            continue;
        }
        writeln!(out, "; {label}").ok();
        writeln!(out, "(assert {})", enc.formula(e)?).ok();
    }
    writeln!(out, "(assert (not {}))", enc.formula(&po.sequent.goal)?).ok();
    writeln!(out, "(check-sat)").ok();
    Ok(out)
}

fn bounds(
    out: &mut String,
    enc: &mut Encoder<'_, '_>,
    check: &crate::ast::CheckSection,
    symbols: &[(String, String)],
) -> SmtResult<()> {
    let types = enc.types;
    for (s, elems) in &check.sets {
        if !types.carriers.contains(s) {
            continue;
        }
        for a in elems {
            writeln!(out, "(declare-const {} {})", quote(a), quote(s)).ok();
        }
        if elems.len() > 1 {
            let names: Vec<String> = elems.iter().map(|a| quote(a)).collect();
            writeln!(out, "(assert (distinct {}))", names.join(" ")).ok();
        }
        let z = quote("z~0");
        let alts: Vec<String> = elems.iter().map(|a| format!("(= {z} {})", quote(a))).collect();
        writeln!(out, "(assert (forall (({z} {})) (or {})))", quote(s), alts.join(" ")).ok();
    }
    writeln!(out, "; CHECK").ok();
    let present: BTreeSet<&str> = symbols.iter().map(|(s, _)| s.as_str()).collect();
    for (n, e) in &check.consts {
        if !present.contains(n.as_str()) {
            continue;
        }
        let line = match types.of_name(n) {
            Ty::Set(el) if types.is_function(n) => {
                let Expr::SetLit(items) = e else {
                    return Err(unsupported(&format!("non-literal function constant {n}")));
                };
                let _ = el;
                let mut lines = Vec::new();
                for i in items {
                    let xs = enc.elems(i)?;
                    lines.push(format!("(assert {})", enc.member(&xs, &Expr::var(n))?));
                }
                lines.join("\n")
            }
            Ty::Set(_) => format!("(assert {})", enc.formula(&Expr::eq(Expr::var(n), e.clone()))?),
            _ => format!("(assert (= {} {}))", quote(n), enc.term(e)?),
        };
        writeln!(out, "{line}").ok();
    }
    let (lo, hi) = check.bound.unwrap_or((-8, 8));
    for (sym, k) in symbols {
        if check.consts.iter().any(|(c, _)| c == sym) {
            continue;
        }
        if types.of_name(k) != Ty::Int {
            continue;
        }
        let q = quote(sym);
        let mut line = format!("(and (<= {} {q}) (<= {q} {}))", enc.term(&Expr::Int(lo))?, enc.term(&Expr::Int(hi))?);
        if let Some((_, d)) = check.domains.iter().find(|(v, _)| v == k) {
            line = format!("(and {line} {})", enc.member(std::slice::from_ref(&q), d)?);
        }
        writeln!(out, "(assert {line})").ok();
    }
    Ok(())
}
