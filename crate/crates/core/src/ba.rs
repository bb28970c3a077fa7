//! Before-after predicates: the relational semantics written as predicates
//! over plain (pre) and primed (post) variables.

use crate::ast::{BinOp, Event, Expr, Stmt, StmtKind, Substitution};
use crate::kernel::Interpretation;
use crate::relsem::{defining_conjunct, effective_guard, forgetful_cut, write_set, SemResult, Scoped};
use crate::scope::invariant_conj;
use std::cell::Cell;
use std::collections::BTreeSet;
use std::rc::Rc;

/// `rel` relates states to states; `done` holds where ✓ is reachable.
#[derive(Clone, Debug, PartialEq)]
pub struct Ba {
    pub rel: Expr,
    pub done: Expr,
}

pub struct BaBuilder<'a> {
    pub sc: &'a Scoped,
    pub interp: &'a Interpretation,
    pub strict_paper: bool,
    fresh: Rc<Cell<usize>>,
}

impl<'a> BaBuilder<'a> {
    pub fn new(sc: &'a Scoped, interp: &'a Interpretation, strict_paper: bool) -> BaBuilder<'a> {
        BaBuilder { sc, interp, strict_paper, fresh: Rc::new(Cell::new(0)) }
    }

    fn inner<'b>(&self, sc: &'b Scoped) -> BaBuilder<'b>
    where
        'a: 'b,
    {
        BaBuilder { sc, interp: self.interp, strict_paper: self.strict_paper, fresh: self.fresh.clone() }
    }

    /// A fresh name standing for an intermediate value of `x`.
    pub fn fresh(&self, x: &str) -> String {
        let n = self.fresh.get() + 1;
        self.fresh.set(n);
        format!("{x}~{n}")
    }

    pub fn vars(&self) -> Vec<String> {
        self.sc.vars()
    }

    pub fn identity(&self) -> Expr {
        Expr::conjoin(self.vars().into_iter().map(|x| Expr::eq(Expr::primed(&x), Expr::var(&x))))
    }

    pub fn frame(&self, written: &BTreeSet<String>) -> Expr {
        Expr::conjoin(
            self.vars()
                .into_iter()
                .filter(|x| !written.contains(x))
                .map(|x| Expr::eq(Expr::primed(&x), Expr::var(&x))),
        )
    }

    /// `∃ v'. rel`, assuming `rel` frames every variable outside `written`.
    pub fn exists_post(&self, rel: &Expr, written: &BTreeSet<String>) -> Expr {
        let mut bound = Vec::new();
        let pairs: Vec<(String, Expr)> = self
            .vars()
            .into_iter()
            .map(|x| {
                if written.contains(&x) {
                    let m = self.fresh(&x);
                    bound.push(m.clone());
                    (x, Expr::var(&m))
                } else {
                    let v = Expr::var(&x);
                    (x, v)
                }
            })
            .collect();
        one_point(bound, simplify(&rel.replace_primed(&pairs)))
    }

    pub fn feasible(&self, ba: &Ba, written: &BTreeSet<String>) -> Expr {
        simplify(&Expr::or(ba.done.clone(), self.exists_post(&ba.rel, written)))
    }

    /// Before-after predicate of `stmt` including its own ◇ closure.
    pub fn ba(&self, stmt: &Stmt) -> SemResult<Ba> {
        let raw = self.raw(stmt)?;
        match &stmt.kind {
            StmtKind::Subst(_) | StmtKind::If { .. } if raw_maybe_empty(stmt, self.strict_paper) => {
                let feas = match &stmt.kind {
                    StmtKind::If { branches, else_body: None }
                        if !branches.iter().any(|(_, b)| maybe_empty(b)) =>
                    {
                        Expr::disjoin(branches.iter().map(|(g, _)| g.clone()))
                    }
                    _ => self.feasible(&raw, &write_set(stmt)),
                };
                Ok(Ba {
                    rel: simplify(&Expr::or(raw.rel, Expr::and(Expr::not(feas), self.identity()))),
                    done: raw.done,
                })
            }
            _ => Ok(raw),
        }
    }

    /// Before-after predicate without the statement's own ◇ closure.
    pub fn raw(&self, stmt: &Stmt) -> SemResult<Ba> {
        let ff = Expr::Bool(false);
        Ok(match &stmt.kind {
            StmtKind::Stop => Ba { rel: ff, done: Expr::Bool(true) },
            StmtKind::Assert(cs) => Ba {
                rel: Expr::and(Expr::conjoin(cs.iter().map(|c| c.predicate.clone())), self.identity()),
                done: ff,
            },
            StmtKind::While { cond, invariants, .. } => Ba {
                rel: Expr::conjoin([Expr::not(cond.clone()), invariant_conj(invariants), self.identity()]),
                done: ff,
            },
            StmtKind::Subst(sub) => {
                let parts = sub.parts();
                if self.strict_paper && parts.len() > 1 {
                    let mut alts = Vec::new();
                    for (_, p) in parts {
                        let w: BTreeSet<String> = p.targets().into_iter().collect();
                        let core = Expr::and(self.core(p), self.frame(&w));
                        let alt = if subst_maybe_empty(p) {
                            let feas = self.exists_post(&core, &w);
                            Expr::or(core, Expr::and(Expr::not(feas), self.identity()))
                        } else {
                            core
                        };
                        alts.push(alt);
                    }
                    Ba { rel: simplify(&Expr::disjoin(alts)), done: ff }
                } else {
                    let w: BTreeSet<String> = sub.targets().into_iter().collect();
                    let core = Expr::conjoin(parts.into_iter().map(|(_, p)| self.core(p)));
                    Ba { rel: Expr::and(core, self.frame(&w)), done: ff }
                }
            }
            StmtKind::Seq(..) => {
                let items = stmt.flatten_seq();
                match forgetful_cut(&items) {
                    Some(k) => {
                        let p = items[k].assert_predicate().expect("assert");
                        let tail = &items[k + 1..];
                        let c = self.compose(tail)?;
                        let w: BTreeSet<String> = tail.iter().flat_map(|s| write_set(s)).collect();
                        let feas = self.feasible(&c, &w);
                        Ba {
                            rel: simplify(&Expr::or(
                                Expr::and(p.clone(), c.rel),
                                Expr::and(Expr::not(Expr::and(p.clone(), feas)), self.identity()),
                            )),
                            done: simplify(&Expr::and(p, c.done)),
                        }
                    }
                    None => self.compose(&items)?,
                }
            }
            StmtKind::If { branches, else_body } => {
                let mut rel = Vec::new();
                let mut done = Vec::new();
                for (j, (_, b)) in branches.iter().enumerate() {
                    let g = effective_guard(branches, j);
                    let bb = self.ba(b)?;
                    rel.push(Expr::and(g.clone(), bb.rel));
                    done.push(Expr::and(g, bb.done));
                }
                if let Some(e) = else_body {
                    let g = effective_guard(branches, branches.len());
                    let bb = self.ba(e)?;
                    rel.push(Expr::and(g.clone(), bb.rel));
                    done.push(Expr::and(g, bb.done));
                }
                Ba { rel: simplify(&Expr::disjoin(rel)), done: simplify(&Expr::disjoin(done)) }
            }
            StmtKind::Begin { locals, invariants, body } => {
                let inner_sc = self.sc.enter(stmt, self.interp)?;
                let inner = self.inner(&inner_sc);
                let b = inner.ba(body)?;
                let bi = invariant_conj(invariants);
                let names: Vec<String> = locals.iter().map(|l| l.name.clone()).collect();
                let typing = Expr::conjoin(names.iter().map(|n| match inner_sc.space.domain(n) {
                    Some(d) => d.membership(Expr::var(n)),
                    None => Expr::Bool(true),
                }));
                let posts: Vec<(String, String)> = names.iter().map(|n| (n.clone(), self.fresh(n))).collect();
                let pairs: Vec<(String, Expr)> = posts.iter().map(|(n, m)| (n.clone(), Expr::var(m))).collect();
                let mut bound = names.clone();
                bound.extend(posts.iter().map(|(_, m)| m.clone()));
                let entry = Expr::and(typing, bi);
                Ba {
                    rel: Expr::exists(
                        names.clone(),
                        one_point(
                            posts.iter().map(|(_, m)| m.clone()).collect(),
                            simplify(&Expr::and(entry.clone(), b.rel.replace_primed(&pairs))),
                        ),
                    ),
                    done: Expr::exists(names, simplify(&Expr::and(entry, b.done))),
                }
            }
        })
    }

    /// The substitution's own constraint on its targets. Such-that targets
    /// without a defining conjunct range over their domain.
    pub fn core(&self, p: &Substitution) -> Expr {
        match p {
            Substitution::BecomesSuchThat { targets, pred } => {
                let mut parts = vec![pred.clone()];
                for t in targets {
                    if defining_conjunct(pred, t).is_none() {
                        parts.push(self.post_typing(t));
                    }
                }
                Expr::conjoin(parts)
            }
            Substitution::Parallel(_) => Expr::conjoin(p.parts().into_iter().map(|(_, q)| self.core(q))),
            _ => subst_core(p),
        }
    }

    pub fn post_typing(&self, t: &str) -> Expr {
        match self.sc.space.domain(t) {
            Some(d) => d.membership(Expr::primed(t)),
            None => Expr::member(
                Expr::primed(t),
                Expr::bin(BinOp::Interval, Expr::Int(self.interp.int_lo), Expr::Int(self.interp.int_hi)),
            ),
        }
    }

    /// Before-after predicate of an event over `vars`: guard, action and
    /// frame, never ◇-closed.
    pub fn event(&self, event: &Event, vars: &[String]) -> Expr {
        let targets = event.action.targets();
        Expr::conjoin([
            event.guard.clone(),
            self.core(&event.action),
            Expr::conjoin(
                vars.iter()
                    .filter(|x| !targets.contains(x))
                    .map(|x| Expr::eq(Expr::primed(x), Expr::var(x))),
            ),
        ])
    }

    /// Relational composition with ✓ absorbing.
    fn compose(&self, items: &[&Stmt]) -> SemResult<Ba> {
        let Some((first, rest)) = items.split_first() else {
            return Ok(Ba { rel: self.identity(), done: Expr::Bool(false) });
        };
        let mut acc = self.ba(first)?;
        let mut written = write_set(first);
        for b in rest {
            let bb = self.ba(b)?;
            let mids: Vec<(String, String)> = self
                .vars()
                .into_iter()
                .filter(|x| written.contains(x))
                .map(|x| {
                    let m = self.fresh(&x);
                    (x, m)
                })
                .collect();
            let to_mid: Vec<(String, Expr)> = mids.iter().map(|(x, m)| (x.clone(), Expr::var(m))).collect();
            let post_pairs: Vec<(String, Expr)> = self
                .vars()
                .into_iter()
                .map(|x| match mids.iter().find(|(y, _)| *y == x) {
                    Some((_, m)) => (x, Expr::var(m)),
                    None => {
                        let v = Expr::var(&x);
                        (x, v)
                    }
                })
                .collect();
            let left = acc.rel.replace_primed(&post_pairs);
            let bound: Vec<String> = mids.iter().map(|(_, m)| m.clone()).collect();
            let rel = one_point(bound.clone(), simplify(&Expr::and(left.clone(), bb.rel.replace_vars(&to_mid))));
            let via = one_point(bound, simplify(&Expr::and(left, bb.done.replace_vars(&to_mid))));
            acc = Ba { rel, done: simplify(&Expr::or(acc.done, via)) };
            written.extend(write_set(b));
        }
        Ok(acc)
    }
}

fn subst_core(p: &Substitution) -> Expr {
    match p {
        Substitution::BecomesEqual { target, expr } => Expr::eq(Expr::primed(target), expr.clone()),
        Substitution::BecomesIn { target, set } => Expr::member(Expr::primed(target), set.clone()),
        Substitution::BecomesSuchThat { pred, .. } => pred.clone(),
        Substitution::Parallel(_) => Expr::conjoin(p.parts().into_iter().map(|(_, q)| subst_core(q))),
    }
}

fn subst_maybe_empty(p: &Substitution) -> bool {
    p.parts().iter().any(|(_, q)| !matches!(q, Substitution::BecomesEqual { .. }))
}

/// Whether the ◇-closed image of `stmt` can be empty for some state.
pub fn maybe_empty(stmt: &Stmt) -> bool {
    match &stmt.kind {
        StmtKind::Subst(_) | StmtKind::If { .. } | StmtKind::Stop => false,
        StmtKind::Assert(_) | StmtKind::While { .. } | StmtKind::Begin { .. } => true,
        StmtKind::Seq(..) => {
            let items = stmt.flatten_seq();
            if forgetful_cut(&items).is_some() {
                false
            } else {
                items.iter().any(|s| maybe_empty(s))
            }
        }
    }
}

/// Whether the image before ◇ can be empty.
pub fn raw_maybe_empty(stmt: &Stmt, strict: bool) -> bool {
    match &stmt.kind {
        StmtKind::Subst(sub) => {
            if strict && sub.parts().len() > 1 {
                false
            } else {
                subst_maybe_empty(sub)
            }
        }
        StmtKind::If { branches, else_body } => {
            else_body.is_none()
                || branches.iter().any(|(_, b)| maybe_empty(b))
                || else_body.as_ref().is_some_and(|e| maybe_empty(e))
        }
        _ => maybe_empty(stmt),
    }
}

/// Eliminate `∃ m` when a conjunct `m = E` defines it.
pub fn one_point(bound: Vec<String>, body: Expr) -> Expr {
    let (bound, body, _) = eliminate(bound, body, Expr::Bool(true));
    Expr::exists(bound, body)
}

/// One-point rule over the conjuncts of `body`; each eliminated name is
/// also replaced in `extra`. Unused names are dropped from `bound`.
pub fn eliminate(mut bound: Vec<String>, mut body: Expr, mut extra: Expr) -> (Vec<String>, Expr, Expr) {
    loop {
        let mut hit = None;
        'search: for (i, m) in bound.iter().enumerate() {
            for c in body.conjuncts() {
                if let Expr::Bin(BinOp::Eq, lhs, rhs) = c {
                    if matches!(&**lhs, Expr::Var(n) if n == m) && !rhs.free_names().plain.contains(m) {
                        hit = Some((i, c.clone(), (**rhs).clone()));
                        break 'search;
                    }
                }
            }
        }
        let Some((i, conj, def)) = hit else { break };
        let m = bound.remove(i);
        let mut dropped = false;
        let rest = Expr::conjoin(
            body.conjuncts()
                .into_iter()
                .filter(|c| {
                    if !dropped && **c == conj {
                        dropped = true;
                        false
                    } else {
                        true
                    }
                })
                .cloned(),
        );
        let pairs = [(m, def)];
        body = simplify(&rest.replace_vars(&pairs));
        extra = extra.replace_vars(&pairs);
    }
    let mut used = body.free_names().plain;
    used.extend(extra.free_names().plain);
    bound.retain(|b| used.contains(b));
    (bound, body, extra)
}

/// Light boolean clean-up: drops `e = e`, absorbs TRUE/FALSE.
pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Bin(BinOp::Eq, a, b) if a == b => Expr::Bool(true),
        Expr::Bin(BinOp::And, a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            if a == Expr::Bool(false) || b == Expr::Bool(false) {
                Expr::Bool(false)
            } else {
                Expr::and(a, b)
            }
        }
        Expr::Bin(BinOp::Or, a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            if a.is_true() || b.is_true() {
                Expr::Bool(true)
            } else {
                Expr::or(a, b)
            }
        }
        Expr::Not(a) => match simplify(a) {
            Expr::Bool(v) => Expr::Bool(!v),
            Expr::Not(inner) => *inner,
            other => Expr::not(other),
        },
        Expr::Quant(q, vs, body) => {
            let body = simplify(body);
            if let Expr::Bool(_) = body {
                return body;
            }
            Expr::Quant(*q, vs.clone(), Box::new(body))
        }
        _ => e.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Evaluator, State, Value};
    use crate::parser::{parse_predicate, parse_statement};
    use crate::relsem::{Semantics, Terminal};
    use crate::scope::ScopeContext;

    fn scoped(vars: &[&str], inv: &str, i: &Interpretation) -> Scoped {
        let ctx = ScopeContext {
            process: None,
            layers: vec![vars.iter().map(|s| s.to_string()).collect()],
            layer_invariants: vec![parse_predicate(inv).unwrap()],
        };
        Scoped::new(ctx, i).unwrap()
    }

    /// The predicate and the image agree on every pair of Σ.
    fn agree(src: &str) {
        let i = Interpretation::new(0, 3);
        let sc = scoped(&["x", "y"], "x : 0..3 & y : 0..3", &i);
        let stmt = parse_statement(src).unwrap();
        let sem = Semantics::new(&i);
        let ba = BaBuilder::new(&sc, &i, false).ba(&stmt).unwrap();
        let sigma = sc.states(&i).unwrap();
        for s in &sigma {
            let img = sem.image(&stmt, &sc, s).unwrap();
            let ev = Evaluator::on(&i, s);
            assert_eq!(ev.holds(&ba.done).unwrap(), img.contains(&Terminal::Done), "{src} done at {s}");
            for t in &sigma {
                let pair = Evaluator::on_pair(&i, s, t).holds(&ba.rel).unwrap();
                assert_eq!(pair, img.contains(&Terminal::State(t.clone())), "{src} at {s} -> {t}");
            }
        }
    }

    #[test]
    fn predicates_match_images() {
        for src in [
            "x := y",
            "x :: {1, 2}",
            "x :| x' > y",
            "x :| x' > 5",
            "x := 1 || y := 2",
            "x := y; y := x",
            "x := 1; STOP; y := 2",
            "IF x > y THEN x := x - y ELSIF y > x THEN y := y - x END",
            "IF x = 0 THEN ASSERT y = 1 ELSE y := 0 END",
            "x := 3; ASSERT x < 2; x := x + 1",
            "x := 0; ASSERT x = 0",
            "WHILE x < y INVARIANT li: x <= y VARIANT y - x THEN x := x + 1 END",
            "BEGIN VARIABLES w INVARIANT bi: w : 0..1 x := w; y := w END",
        ] {
            agree(src);
        }
    }

    #[test]
    fn one_point_substitutes() {
        let body = parse_predicate("m = x + 1 & y' = m").unwrap();
        assert_eq!(one_point(vec!["m".into()], body), parse_predicate("y' = x + 1").unwrap());
        let st = State::new().with("x", Value::Int(1));
        let i = Interpretation::new(0, 3);
        assert!(Evaluator::on(&i, &st).holds(&simplify(&parse_predicate("x = x & TRUE").unwrap())).unwrap());
    }
}
