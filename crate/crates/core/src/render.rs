//! Canonical text rendering of models, statements and expressions.
//!
//! The output re-parses to a structurally equal tree.

use crate::ast::*;
use std::fmt::Write;

pub fn render_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr(&mut s, e, 0);
    s
}

// Precedence levels: 1..=11 for binary operators, 5 for `not`,
// 12 for unary minus, 13 for atoms.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(op, _, _) => op.precedence(),
        Expr::Not(_) => 5,
        Expr::Neg(_) => 12,
        Expr::Int(i) if *i < 0 => 12,
        _ => 13,
    }
}

fn expr(out: &mut String, e: &Expr, min: u8) {
    let p = prec(e);
    let paren = p < min;
    if paren {
        out.push('(');
    }
    match e {
        Expr::Int(i) => write!(out, "{i}").unwrap(),
        Expr::Bool(true) => out.push_str("TRUE"),
        Expr::Bool(false) => out.push_str("FALSE"),
        Expr::Var(n) => out.push_str(n),
        Expr::Primed(n) => write!(out, "{n}'").unwrap(),
        Expr::IntSet => out.push_str("INT"),
        Expr::NatSet => out.push_str("NAT"),
        Expr::Nat1Set => out.push_str("NAT1"),
        Expr::BoolSet => out.push_str("BOOL"),
        Expr::EmptySet => out.push_str("{}"),
        Expr::SetLit(items) => {
            out.push('{');
            for (i, it) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(out, it, 0);
            }
            out.push('}');
        }
        Expr::Bin(op, l, r) => {
            let p = op.precedence();
            // left-assoc ops accept an equal-precedence left child;
            // `=>` is right-assoc; relations and `..` are non-assoc.
            let (lmin, rmin) = match op {
                BinOp::Implies => (p + 1, p),
                o if o.is_relational() || *o == BinOp::Interval => (p + 1, p + 1),
                _ => (p, p + 1),
            };
            expr(out, l, lmin);
            write!(out, " {} ", op.symbol()).unwrap();
            expr(out, r, rmin);
        }
        Expr::Not(inner) => {
            out.push_str("not ");
            expr(out, inner, 5);
        }
        Expr::Neg(inner) => {
            out.push('-');
            expr(out, inner, 13);
        }
        Expr::BoolOf(inner) => {
            out.push_str("bool(");
            expr(out, inner, 0);
            out.push(')');
        }
        Expr::Apply(f, a) => {
            expr(out, f, 13);
            out.push('(');
            expr(out, a, 0);
            out.push(')');
        }
        Expr::Quant(q, vars, body) => {
            out.push(if *q == Quantifier::ForAll { '!' } else { '#' });
            out.push_str(&vars.join(", "));
            out.push_str(".(");
            expr(out, body, 0);
            out.push(')');
        }
        Expr::Unsupported(name, args) => {
            if name == "comprehension" {
                out.push_str("{ ");
                if let Some(Expr::SetLit(vars)) = args.first() {
                    let names: Vec<String> = vars.iter().map(render_expr).collect();
                    out.push_str(&names.join(", "));
                }
                out.push_str(" | ");
                expr(out, &args[1], 0);
                out.push_str(" }");
            } else {
                write!(out, "{name}(").unwrap();
                expr(out, &args[0], 0);
                out.push(')');
            }
        }
    }
    if paren {
        out.push(')');
    }
}

pub fn render_substitution(s: &Substitution) -> String {
    match s {
        Substitution::BecomesEqual { target, expr } => {
            format!("{target} := {}", render_expr(expr))
        }
        Substitution::BecomesIn { target, set } => format!("{target} :: {}", render_expr(set)),
        Substitution::BecomesSuchThat { targets, pred } => {
            format!("{} :| {}", targets.join(", "), render_expr(pred))
        }
        Substitution::Parallel(parts) => parts
            .iter()
            .map(|(l, p)| match l {
                Some(l) => format!("{}: {}", l.text, render_substitution(p)),
                None => render_substitution(p),
            })
            .collect::<Vec<_>>()
            .join(" || "),
    }
}

struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn invariants(&mut self, keyword_each: bool, invs: &[InvariantDef]) {
        for inv in invs {
            let kw = match (inv.kind, keyword_each) {
                (InvariantKind::Theorem, _) => "THEOREM ",
                (InvariantKind::Invariant, true) => "INVARIANT ",
                (InvariantKind::Invariant, false) => "",
            };
            self.line(&format!(
                "{kw}{}: {}",
                inv.label.text,
                render_expr(&inv.predicate)
            ));
        }
    }

    fn labeled(&mut self, kw: &str, items: &[LabeledPred]) {
        for it in items {
            self.line(&format!("{kw}{}: {}", it.label.text, render_expr(&it.predicate)));
        }
    }

    fn block(&mut self, s: &Stmt) {
        let items = s.flatten_seq();
        let n = items.len();
        for (i, item) in items.into_iter().enumerate() {
            self.action(item, if i + 1 < n { ";" } else { "" });
        }
    }

    fn action(&mut self, s: &Stmt, sep: &str) {
        let prefix = s
            .label
            .as_ref()
            .map(|l| format!("{}: ", l.text))
            .unwrap_or_default();
        let mut suffix = String::new();
        if s.annotations.atomic {
            suffix.push_str(" ATOMIC");
        }
        if !s.annotations.refines.is_empty() {
            suffix.push_str(" REFINES");
            for l in &s.annotations.refines {
                suffix.push(' ');
                suffix.push_str(&l.text);
            }
        }
        if let Some(w) = &s.annotations.with {
            suffix.push_str(" WITH ");
            suffix.push_str(&render_expr(w));
        }
        match &s.kind {
            StmtKind::Subst(sub) => {
                self.line(&format!("{prefix}{}{suffix}{sep}", render_substitution(sub)))
            }
            StmtKind::Stop => self.line(&format!("{prefix}STOP{suffix}{sep}")),
            StmtKind::Assert(cs) => {
                let parts: Vec<String> = cs
                    .iter()
                    .map(|c| match &c.label {
                        Some(l) => format!("{}: {}", l.text, render_expr(&c.predicate)),
                        None => render_expr(&c.predicate),
                    })
                    .collect();
                self.line(&format!("{prefix}ASSERT {}{suffix}{sep}", parts.join(" &&& ")));
            }
            StmtKind::If {
                branches,
                else_body,
            } => {
                for (i, (c, b)) in branches.iter().enumerate() {
                    let kw = if i == 0 {
                        format!("{prefix}IF")
                    } else {
                        "ELSIF".into()
                    };
                    self.line(&format!("{kw} {} THEN", render_expr(c)));
                    self.indent += 1;
                    self.block(b);
                    self.indent -= 1;
                }
                if let Some(e) = else_body {
                    self.line("ELSE");
                    self.indent += 1;
                    self.block(e);
                    self.indent -= 1;
                }
                self.line(&format!("END{suffix}{sep}"));
            }
            StmtKind::While {
                cond,
                invariants,
                variant,
                body,
            } => {
                self.line(&format!("{prefix}WHILE {}", render_expr(cond)));
                self.indent += 1;
                self.invariants(true, invariants);
                self.line(&format!("VARIANT {}", render_expr(variant)));
                self.indent -= 1;
                self.line("THEN");
                self.indent += 1;
                self.block(body);
                self.indent -= 1;
                self.line(&format!("END{suffix}{sep}"));
            }
            StmtKind::Begin {
                locals,
                invariants,
                body,
            } => {
                self.line(&format!("{prefix}BEGIN"));
                self.indent += 1;
                if !locals.is_empty() {
                    let names: Vec<&str> = locals.iter().map(|v| v.name.as_str()).collect();
                    self.line(&format!("VARIABLES {}", names.join(" ")));
                }
                self.invariants(true, invariants);
                self.block(body);
                self.indent -= 1;
                self.line(&format!("END{suffix}{sep}"));
            }
            StmtKind::Seq(..) => {
                // nested sequences only arise from flattening; print inline
                self.block(s);
            }
        }
    }
}

fn names(decls: &[VarDecl]) -> String {
    decls
        .iter()
        .map(|d| d.name.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn render_statement(s: &Stmt) -> String {
    let mut p = Printer {
        out: String::new(),
        indent: 0,
    };
    p.block(s);
    p.out
}

pub fn render(model: &SlpModel) -> String {
    let mut p = Printer {
        out: String::new(),
        indent: 0,
    };
    p.line(&format!("MODEL {}", model.name));
    if !model.context.sets.is_empty() {
        p.line(&format!("SETS {}", names(&model.context.sets)));
    }
    if !model.context.constants.is_empty() {
        p.line(&format!("CONSTANTS {}", names(&model.context.constants)));
    }
    if !model.context.axioms.is_empty() {
        p.line("AXIOMS");
        p.indent += 1;
        p.labeled("", &model.context.axioms);
        p.indent -= 1;
    }
    if !model.globals.is_empty() {
        p.line(&format!("VARIABLES {}", names(&model.globals)));
    }
    if !model.invariants.is_empty() {
        p.line("INVARIANTS");
        p.indent += 1;
        p.invariants(false, &model.invariants);
        p.indent -= 1;
    }
    if let Some(init) = &model.initialisation {
        p.line(&format!("INITIALISATION {}", render_substitution(init)));
    }
    for env in &model.environments {
        p.line(&format!("ENVIRONMENT {}{}", env.label.text, refines(&env.refines)));
        p.indent += 1;
        p.labeled("RELY ", &env.relies);
        p.labeled("GUARANTEE ", &env.guarantees);
        p.indent -= 1;
        p.line("END");
    }
    for proc in &model.processes {
        p.line(&format!("PROCESS {}{}", proc.label.text, refines(&proc.refines)));
        p.indent += 1;
        if !proc.locals.is_empty() {
            p.line(&format!("VARIABLES {}", names(&proc.locals)));
        }
        p.labeled("RELY ", &proc.relies);
        p.labeled("GUARANTEE ", &proc.guarantees);
        p.invariants(true, &proc.invariants);
        if let Some(body) = &proc.body {
            p.line("BODY");
            p.indent += 1;
            p.block(body);
            p.indent -= 1;
        }
        p.indent -= 1;
        p.line("END");
    }
    if let Some(m) = &model.machine {
        p.line(&format!("MACHINE {}", m.name.text));
        p.indent += 1;
        if !m.variables.is_empty() {
            p.line(&format!("VARIABLES {}", names(&m.variables)));
        }
        if !m.invariants.is_empty() {
            p.line("INVARIANTS");
            p.indent += 1;
            p.invariants(false, &m.invariants);
            p.indent -= 1;
        }
        if let Some(init) = &m.initialisation {
            p.line(&format!("INITIALISATION {}", render_substitution(init)));
        }
        for ev in &m.events {
            let guard = if ev.guard.is_true() {
                String::new()
            } else {
                format!(" WHEN {}", render_expr(&ev.guard))
            };
            p.line(&format!(
                "EVENT {}{guard} THEN {} END",
                ev.label.text,
                render_substitution(&ev.action)
            ));
        }
        p.indent -= 1;
        p.line("END");
    }
    for rm in &model.refmaps {
        let pairs: Vec<String> = rm
            .pairs
            .iter()
            .map(|(a, b)| format!("{} -> {}", a.text, b.text))
            .collect();
        p.line(&format!("REFMAP {} {{ {} }}", rm.process.text, pairs.join(" ; ")));
    }
    if let Some(c) = &model.check {
        p.line("CHECK");
        p.indent += 1;
        let mut items = Vec::new();
        if let Some((lo, hi)) = c.bound {
            items.push(format!("BOUND INT = {lo}..{hi}"));
        }
        for (n, atoms) in &c.sets {
            items.push(format!("SET {n} = {{{}}}", atoms.join(", ")));
        }
        for (n, e) in &c.consts {
            items.push(format!("CONST {n} = {}", render_expr(e)));
        }
        for (n, e) in &c.domains {
            items.push(format!("DOMAIN {n} = {}", render_expr(e)));
        }
        let k = items.len();
        for (i, it) in items.into_iter().enumerate() {
            p.line(&format!("{it}{}", if i + 1 < k { " ;" } else { "" }));
        }
        p.indent -= 1;
        p.line("END");
    }
    p.out
}

fn refines(labels: &[Label]) -> String {
    if labels.is_empty() {
        String::new()
    } else {
        let l: Vec<&str> = labels.iter().map(|l| l.text.as_str()).collect();
        format!(" REFINES {}", l.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_model, parse_predicate};

    #[test]
    fn empty_body_process() {
        let m = parse_model("MODEL m PROCESS p END").unwrap();
        let text = render(&m);
        assert!(text.ends_with("PROCESS p\nEND\n"));
        assert_eq!(parse_model(&text).unwrap(), m);
    }

    #[test]
    fn expression_round_trip_keeps_structure() {
        for src in [
            "a - (b - c)",
            "(a - b) - c",
            "(a => b) => c",
            "a => b => c",
            "not (a = 1 & b = 2)",
            "-(x + 1) * 2",
            "x - -3",
            "(a |-> b) |-> c",
            "s \\/ {e} /= {}",
            "!a, b.(a : NAT & b : NAT => a + b >= 0)",
            "gcd(x1 |-> x2) = gcd(y1 |-> y2)",
            "t' : t - d .. t + d",
        ] {
            let e = parse_predicate(src).unwrap();
            let again = parse_predicate(&render_expr(&e)).unwrap();
            assert_eq!(again, e, "{src} -> {}", render_expr(&e));
        }
    }
}
