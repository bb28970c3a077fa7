//! Relational semantics of statements over finite scopes.
//!
//! Relations are never materialised during checking; `image` computes the
//! successors of one state. `interpret` builds the whole relation for
//! small scopes.

use crate::ast::{BinOp, Event, Expr, Stmt, StmtKind, Substitution};
use crate::kernel::states::{infer_domain, Space};
use crate::kernel::{EvalError, Evaluator, Interpretation, Name, State, Value};
use crate::scope::{invariant_conj, ScopeContext};
use std::collections::BTreeSet;
use std::sync::OnceLock;
use std::fmt;

/// A state or the absorbing terminator ✓.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Terminal {
    State(State),
    Done,
}

impl Terminal {
    pub fn state(&self) -> Option<&State> {
        match self {
            Terminal::State(s) => Some(s),
            Terminal::Done => None,
        }
    }
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Terminal::State(s) => write!(f, "{s}"),
            Terminal::Done => f.write_str("DONE"),
        }
    }
}

pub type Image = BTreeSet<Terminal>;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SemError {
    #[error("parallel-write-clash: `{0}` is written by more than one part")]
    ParallelWriteClash(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("variant-not-integer: variant evaluates to {0}")]
    VariantNotInteger(String),
    #[error("assert-failed: {0}")]
    AssertFailed(State),
    #[error("fuel-exhausted")]
    FuelExhausted,
    #[error("stuck: no branch applies in {0}")]
    Stuck(State),
}

pub type SemResult<T> = Result<T, SemError>;

/// A scope with its candidate space and accumulated invariant.
#[derive(Clone, Debug)]
pub struct Scoped {
    pub ctx: ScopeContext,
    pub space: Space,
    pub invariant: Expr,
    /// Conjuncts of the invariant reading some variable.
    pub open: Expr,
    /// The closed conjuncts (axioms), constant over states.
    pub closed: Expr,
    closed_holds: OnceLock<Result<bool, EvalError>>,
}

impl Scoped {
    pub fn new(ctx: ScopeContext, interp: &Interpretation) -> SemResult<Scoped> {
        let space = Space::of_scope(&ctx, interp)?;
        Ok(Scoped::with_space(ctx, space))
    }

    /// Σ: candidate states satisfying the invariant, in canonical order.
    pub fn states(&self, interp: &Interpretation) -> SemResult<Vec<State>> {
        Ok(self.space.filter(&self.invariant, interp)?)
    }

    pub fn contains(&self, s: &State, interp: &Interpretation) -> SemResult<bool> {
        for (n, _, vals) in &self.space.vars {
            match s.get(n) {
                Some(v) if vals.binary_search(v).is_ok() => {}
                _ => return Ok(false),
            }
        }
        let closed = self.closed_holds.get_or_init(|| Evaluator::new(interp).holds(&self.closed)).clone()?;
        Ok(closed && Evaluator::on(interp, s).holds(&self.open)?)
    }

    /// Scope of a WHILE or BEGIN body.
    pub fn enter(&self, stmt: &Stmt, interp: &Interpretation) -> SemResult<Scoped> {
        let ctx = match &stmt.kind {
            StmtKind::While { invariants, .. } => self.ctx.push(Vec::new(), invariant_conj(invariants)),
            StmtKind::Begin { locals, invariants, .. } => self
                .ctx
                .push(locals.iter().map(|v| v.name.clone()).collect(), invariant_conj(invariants)),
            _ => return Ok(self.clone()),
        };
        Scoped::uncapped(ctx, interp)
    }

    pub fn vars(&self) -> Vec<String> {
        self.ctx.vars()
    }

    /// Scope whose candidate space is not checked against the cap yet.
    pub fn uncapped(ctx: ScopeContext, interp: &Interpretation) -> SemResult<Scoped> {
        let space = Space::uncapped(&ctx.vars(), &ctx.invariant(), interp)?;
        Ok(Scoped::with_space(ctx, space))
    }

    fn with_space(ctx: ScopeContext, space: Space) -> Scoped {
        let invariant = ctx.invariant();
        let vars = ctx.vars();
        let (closed, open): (Vec<&Expr>, Vec<&Expr>) = invariant.conjuncts().into_iter().partition(|c| {
            !c.mentions_primed() && c.free_names().plain.iter().all(|n| !vars.contains(n))
        });
        let open = Expr::conjoin(open.into_iter().cloned());
        let closed = Expr::conjoin(closed.into_iter().cloned());
        Scoped { ctx, space, invariant, open, closed, closed_holds: OnceLock::new() }
    }
}

/// The first conjunct `t' = E` or `t' : S` whose right side reads no
/// primed variable.
pub fn defining_conjunct<'e>(pred: &'e Expr, t: &str) -> Option<(BinOp, &'e Expr)> {
    pred.conjuncts().into_iter().find_map(|c| match c {
        Expr::Bin(op @ (BinOp::Eq | BinOp::In), lhs, rhs)
            if matches!(&**lhs, Expr::Primed(n) if n == t) && rhs.free_names().primed.is_empty() =>
        {
            Some((*op, &**rhs))
        }
        _ => None,
    })
}

/// A finite relation from Σ to Σ ∪ {✓}.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScopedRelation {
    pub pairs: BTreeSet<(State, Terminal)>,
}

impl ScopedRelation {
    pub fn domain(&self) -> BTreeSet<&State> {
        self.pairs.iter().map(|(s, _)| s).collect()
    }

    pub fn image_of(&self, s: &State) -> Image {
        self.pairs.iter().filter(|(a, _)| a == s).map(|(_, t)| t.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Identity on `sigma` overridden by `rel`.
pub fn diamond(rel: &ScopedRelation, sigma: &[State]) -> ScopedRelation {
    let dom = rel.domain();
    let mut pairs = rel.pairs.clone();
    for s in sigma {
        if !dom.contains(s) {
            pairs.insert((s.clone(), Terminal::State(s.clone())));
        }
    }
    ScopedRelation { pairs }
}

/// Write set following the RW table; block locals are filtered out.
pub fn write_set(stmt: &Stmt) -> BTreeSet<String> {
    match &stmt.kind {
        StmtKind::Subst(s) => s.targets().into_iter().collect(),
        StmtKind::Seq(a, b) => write_set(a).union(&write_set(b)).cloned().collect(),
        StmtKind::If { branches, else_body } => {
            let mut out: BTreeSet<String> = branches.iter().flat_map(|(_, b)| write_set(b)).collect();
            if let Some(e) = else_body {
                out.extend(write_set(e));
            }
            out
        }
        StmtKind::While { body, .. } => write_set(body),
        StmtKind::Begin { locals, body, .. } => {
            let mut w = write_set(body);
            for l in locals {
                w.remove(&l.name);
            }
            w
        }
        StmtKind::Assert(_) | StmtKind::Stop => BTreeSet::new(),
    }
}

/// Index of the last ASSERT in a flattened sequence that has a successor.
pub fn forgetful_cut(items: &[&Stmt]) -> Option<usize> {
    (0..items.len().saturating_sub(1)).rev().find(|&i| items[i].is_assert())
}

/// Effective guard of IF branch `k` (branch count = else).
pub fn effective_guard(branches: &[(Expr, Stmt)], k: usize) -> Expr {
    let earlier = branches[..k.min(branches.len())].iter().map(|(g, _)| Expr::not(g.clone()));
    match branches.get(k) {
        Some((g, _)) => Expr::conjoin(earlier.chain(std::iter::once(g.clone()))),
        None => Expr::conjoin(earlier),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TrmResult {
    Discharged,
    Violated { pre: State, post: State },
}

pub struct Semantics<'a> {
    pub interp: &'a Interpretation,
    /// Verbatim readings: parallel as union, trm quantified globally.
    pub strict_paper: bool,
}

impl<'a> Semantics<'a> {
    pub fn new(interp: &'a Interpretation) -> Semantics<'a> {
        Semantics { interp, strict_paper: false }
    }

    pub fn strict(mut self, on: bool) -> Semantics<'a> {
        self.strict_paper = on;
        self
    }

    fn ev(&self, s: &'a State) -> Evaluator<'a> {
        Evaluator::on(self.interp, s)
    }

    /// Successors of `s` under `stmt` at scope `sc`.
    pub fn image(&self, stmt: &Stmt, sc: &Scoped, s: &State) -> SemResult<Image> {
        let raw = self.raw_image(stmt, sc, s)?;
        let diamonded = matches!(stmt.kind, StmtKind::Subst(_) | StmtKind::If { .. });
        if raw.is_empty() && diamonded {
            return Ok(BTreeSet::from([Terminal::State(s.clone())]));
        }
        Ok(raw)
    }

    /// Successors before the statement's own ◇ closure.
    pub fn raw_image(&self, stmt: &Stmt, sc: &Scoped, s: &State) -> SemResult<Image> {
        let ev = Evaluator::on(self.interp, s);
        match &stmt.kind {
            StmtKind::Stop => Ok(BTreeSet::from([Terminal::Done])),
            StmtKind::Assert(cs) => {
                for c in cs {
                    if !ev.holds(&c.predicate)? {
                        return Ok(BTreeSet::new());
                    }
                }
                Ok(BTreeSet::from([Terminal::State(s.clone())]))
            }
            StmtKind::Subst(sub) => self.subst_image(sub, sc, s),
            StmtKind::Seq(..) => {
                let items = stmt.flatten_seq();
                match forgetful_cut(&items) {
                    Some(k) => {
                        if !ev.holds(&items[k].assert_predicate().expect("assert"))? {
                            return Ok(BTreeSet::from([Terminal::State(s.clone())]));
                        }
                        let out = self.compose(&items[k + 1..], sc, s)?;
                        if out.is_empty() {
                            return Ok(BTreeSet::from([Terminal::State(s.clone())]));
                        }
                        Ok(out)
                    }
                    None => self.compose(&items, sc, s),
                }
            }
            StmtKind::If { branches, else_body } => {
                for (g, b) in branches {
                    if ev.holds(g)? {
                        return self.image(b, sc, s);
                    }
                }
                match else_body {
                    Some(e) => self.image(e, sc, s),
                    None => Ok(BTreeSet::new()),
                }
            }
            StmtKind::While { cond, invariants, .. } => {
                let li = invariant_conj(invariants);
                if !ev.holds(cond)? && ev.holds(&li)? {
                    Ok(BTreeSet::from([Terminal::State(s.clone())]))
                } else {
                    Ok(BTreeSet::new())
                }
            }
            StmtKind::Begin { body, .. } => {
                let inner = sc.enter(stmt, self.interp)?;
                let mut out = BTreeSet::new();
                for entry in self.block_entries(stmt, &inner, s)? {
                    for t in self.image(body, &inner, &entry)? {
                        out.insert(match t {
                            Terminal::State(t) => Terminal::State(project_like(&t, s)),
                            Terminal::Done => Terminal::Done,
                        });
                    }
                }
                Ok(out)
            }
        }
    }

    /// Extensions of an outer state by block locals satisfying typing and BI.
    pub fn block_entries(&self, stmt: &Stmt, inner: &Scoped, s: &State) -> SemResult<Vec<State>> {
        let StmtKind::Begin { locals, invariants, .. } = &stmt.kind else {
            return Ok(vec![s.clone()]);
        };
        let bi = invariant_conj(invariants);
        let names: Vec<String> = locals.iter().map(|l| l.name.clone()).collect();
        let mut doms: Vec<(Name, Vec<Value>)> = Vec::new();
        for n in &names {
            let vals = match inner.space.values(n) {
                Some(v) => v.to_vec(),
                None => infer_domain(n, &names, &bi, self.interp).values(self.interp)?,
            };
            doms.push((Name::from(n.as_str()), vals));
        }
        let mut out = Vec::new();
        let mut cur = s.clone();
        self.extend(&doms, 0, &bi, &mut cur, &mut out)?;
        Ok(out)
    }

    fn extend(
        &self,
        doms: &[(Name, Vec<Value>)],
        k: usize,
        pred: &Expr,
        cur: &mut State,
        out: &mut Vec<State>,
    ) -> SemResult<()> {
        let Some((n, vals)) = doms.get(k) else {
            if Evaluator::on(self.interp, cur).holds(pred)? {
                out.push(cur.clone());
            }
            return Ok(());
        };
        for v in vals {
            cur.set(n, v.clone());
            self.extend(doms, k + 1, pred, cur, out)?;
        }
        Ok(())
    }

    fn compose(&self, items: &[&Stmt], sc: &Scoped, s: &State) -> SemResult<Image> {
        let mut frontier = BTreeSet::from([Terminal::State(s.clone())]);
        for item in items {
            let mut next = BTreeSet::new();
            for t in frontier {
                match t {
                    Terminal::Done => {
                        next.insert(Terminal::Done);
                    }
                    Terminal::State(st) => next.extend(self.image(item, sc, &st)?),
                }
            }
            frontier = next;
        }
        Ok(frontier)
    }

    /// Raw successors of a substitution (frame kept, no ◇).
    pub fn subst_image(&self, sub: &Substitution, sc: &Scoped, s: &State) -> SemResult<Image> {
        let parts = sub.parts();
        let mut seen = BTreeSet::new();
        for (_, p) in &parts {
            for t in p.targets() {
                if !seen.insert(t.clone()) {
                    return Err(SemError::ParallelWriteClash(t));
                }
            }
        }
        if self.strict_paper && parts.len() > 1 {
            let mut out = BTreeSet::new();
            for (_, p) in &parts {
                let alts = self.assignments(p, Some(&sc.space), s)?;
                if alts.is_empty() {
                    out.insert(Terminal::State(s.clone()));
                }
                out.extend(alts.into_iter().map(|a| Terminal::State(apply(s, &a))));
            }
            return Ok(out);
        }
        let mut combos: Vec<Vec<(String, Value)>> = vec![Vec::new()];
        for (_, p) in &parts {
            let alts = self.assignments(p, Some(&sc.space), s)?;
            let mut next = Vec::new();
            for c in &combos {
                for a in &alts {
                    let mut m = c.clone();
                    m.extend(a.iter().cloned());
                    next.push(m);
                }
            }
            combos = next;
        }
        Ok(combos.into_iter().map(|a| Terminal::State(apply(s, &a))).collect())
    }

    /// Alternative target assignments of one non-parallel substitution.
    pub fn assignments(
        &self,
        sub: &Substitution,
        space: Option<&Space>,
        s: &State,
    ) -> SemResult<Vec<Vec<(String, Value)>>> {
        let ev = Evaluator::on(self.interp, s);
        match sub {
            Substitution::BecomesEqual { target, expr } => Ok(vec![vec![(target.clone(), ev.eval(expr)?)]]),
            Substitution::BecomesIn { target, set } => match ev.eval(set)? {
                Value::Set(vs) => Ok(vs.iter().map(|v| vec![(target.clone(), v.clone())]).collect()),
                v => Err(EvalError::Type(format!("`::` needs a set, found {v}")).into()),
            },
            Substitution::BecomesSuchThat { targets, pred } => {
                let mut cands: Vec<Vec<Value>> = Vec::new();
                for t in targets {
                    cands.push(self.primed_candidates(t, pred, space, s)?);
                }
                let mut out = Vec::new();
                let mut post = s.clone();
                self.solve(targets, &cands, 0, pred, s, &mut post, &mut out)?;
                Ok(out)
            }
            Substitution::Parallel(_) => {
                let mut combos: Vec<Vec<(String, Value)>> = vec![Vec::new()];
                for (_, p) in sub.parts() {
                    let alts = self.assignments(p, space, s)?;
                    combos = combos
                        .iter()
                        .flat_map(|c| {
                            alts.iter().map(move |a| {
                                let mut m = c.clone();
                                m.extend(a.iter().cloned());
                                m
                            })
                        })
                        .collect();
                }
                Ok(combos)
            }
        }
    }

    /// Candidate values for `t'`: a defining equation or membership when
    /// present, else the variable's domain.
    fn primed_candidates(&self, t: &str, pred: &Expr, space: Option<&Space>, s: &State) -> SemResult<Vec<Value>> {
        let ev = Evaluator::on(self.interp, s);
        match defining_conjunct(pred, t) {
            Some((BinOp::Eq, rhs)) => return Ok(vec![ev.eval(rhs)?]),
            Some((_, rhs)) => {
                if let Value::Set(vs) = ev.eval(rhs)? {
                    return Ok(vs.iter().cloned().collect());
                }
            }
            None => {}
        }
        match space.and_then(|sp| sp.values(t)) {
            Some(v) => Ok(v.to_vec()),
            None => Ok(self.interp.int_range().map(Value::Int).collect()),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        targets: &[String],
        cands: &[Vec<Value>],
        k: usize,
        pred: &Expr,
        pre: &State,
        post: &mut State,
        out: &mut Vec<Vec<(String, Value)>>,
    ) -> SemResult<()> {
        if k == targets.len() {
            if Evaluator::on_pair(self.interp, pre, post).holds(pred)? {
                out.push(targets.iter().map(|t| (t.clone(), post.get(t).cloned().expect("set"))).collect());
            }
            return Ok(());
        }
        for v in &cands[k] {
            post.set(&targets[k], v.clone());
            self.solve(targets, cands, k + 1, pred, pre, post, out)?;
        }
        Ok(())
    }

    /// The whole relation over Σ, clipped to Σ × (Σ ∪ {✓}).
    pub fn interpret(&self, stmt: &Stmt, sc: &Scoped) -> SemResult<ScopedRelation> {
        let sigma = sc.states(self.interp)?;
        let mut pairs = BTreeSet::new();
        for s in &sigma {
            for t in self.image(stmt, sc, s)? {
                let keep = match &t {
                    Terminal::Done => true,
                    Terminal::State(t) => sc.contains(t, self.interp)?,
                };
                if keep {
                    pairs.insert((s.clone(), t));
                }
            }
        }
        Ok(ScopedRelation { pairs })
    }

    /// Variant decrease for a WHILE at scope `sc`.
    pub fn trm_holds(&self, stmt: &Stmt, sc: &Scoped) -> SemResult<TrmResult> {
        let StmtKind::While { cond, variant, body, .. } = &stmt.kind else {
            return Ok(TrmResult::Discharged);
        };
        let inner = sc.enter(stmt, self.interp)?;
        let st = inner.space.filter(&Expr::and(inner.invariant.clone(), cond.clone()), self.interp)?;
        let var = |s: &State| -> SemResult<i64> {
            match Evaluator::on(self.interp, s).eval(variant)? {
                Value::Int(i) => Ok(i),
                v => Err(SemError::VariantNotInteger(v.to_string())),
            }
        };
        let mut lowest_pre: Option<(i64, State)> = None;
        let mut highest_post: Option<(i64, State, State)> = None;
        for s in &st {
            let v0 = var(s)?;
            if v0 < 0 {
                return Ok(TrmResult::Violated { pre: s.clone(), post: s.clone() });
            }
            if lowest_pre.as_ref().is_none_or(|(l, _)| v0 < *l) {
                lowest_pre = Some((v0, s.clone()));
            }
            for t in self.image(body, &inner, s)? {
                let Terminal::State(t) = t else { continue };
                let v1 = var(&t)?;
                if !self.strict_paper && v1 >= v0 {
                    return Ok(TrmResult::Violated { pre: s.clone(), post: t });
                }
                if highest_post.as_ref().is_none_or(|(h, _, _)| v1 > *h) {
                    highest_post = Some((v1, s.clone(), t));
                }
            }
        }
        if self.strict_paper {
            if let (Some((lo, pre)), Some((hi, _, post))) = (lowest_pre, highest_post) {
                if hi >= lo {
                    return Ok(TrmResult::Violated { pre, post });
                }
            }
        }
        Ok(TrmResult::Discharged)
    }

    /// Successors under an event: guard-restricted, never ◇-extended.
    pub fn event_image(&self, event: &Event, space: Option<&Space>, s: &State) -> SemResult<Vec<State>> {
        if !self.ev(s).holds(&event.guard)? {
            return Ok(Vec::new());
        }
        let mut out: Vec<State> = self
            .assignments(&event.action, space, s)?
            .into_iter()
            .map(|a| apply(s, &a))
            .collect();
        out.sort();
        out.dedup();
        Ok(out)
    }

    pub fn interpret_event(&self, event: &Event, sc: &Scoped) -> SemResult<ScopedRelation> {
        let mut pairs = BTreeSet::new();
        for s in sc.states(self.interp)? {
            for t in self.event_image(event, Some(&sc.space), &s)? {
                if sc.contains(&t, self.interp)? {
                    pairs.insert((s.clone(), Terminal::State(t)));
                }
            }
        }
        Ok(ScopedRelation { pairs })
    }

    /// Operational run from each initial state; loops iterate, asserts
    /// are checked. `stuck_if` reports an unmatched else-less IF.
    pub fn execute(
        &self,
        stmt: &Stmt,
        initial: &[State],
        sc: &Scoped,
        fuel: u64,
        stuck_if: bool,
    ) -> SemResult<Image> {
        let mut fuel = fuel;
        let mut out = BTreeSet::new();
        for s in initial {
            out.extend(self.exec(stmt, sc, s, &mut fuel, stuck_if)?);
        }
        Ok(out)
    }

    fn exec(&self, stmt: &Stmt, sc: &Scoped, s: &State, fuel: &mut u64, stuck_if: bool) -> SemResult<Image> {
        if *fuel == 0 {
            return Err(SemError::FuelExhausted);
        }
        *fuel -= 1;
        let ev = Evaluator::on(self.interp, s);
        let one = |t: State| BTreeSet::from([Terminal::State(t)]);
        match &stmt.kind {
            StmtKind::Stop => Ok(BTreeSet::from([Terminal::Done])),
            StmtKind::Assert(cs) => {
                for c in cs {
                    if !ev.holds(&c.predicate)? {
                        return Err(SemError::AssertFailed(s.clone()));
                    }
                }
                Ok(one(s.clone()))
            }
            StmtKind::Subst(_) => self.image(stmt, sc, s),
            StmtKind::Seq(..) => {
                let mut frontier = one(s.clone());
                for item in stmt.flatten_seq() {
                    let mut next = BTreeSet::new();
                    for t in frontier {
                        match t {
                            Terminal::Done => {
                                next.insert(Terminal::Done);
                            }
                            Terminal::State(t) => next.extend(self.exec(item, sc, &t, fuel, stuck_if)?),
                        }
                    }
                    frontier = next;
                }
                Ok(frontier)
            }
            StmtKind::If { branches, else_body } => {
                for (g, b) in branches {
                    if ev.holds(g)? {
                        return self.exec(b, sc, s, fuel, stuck_if);
                    }
                }
                match else_body {
                    Some(e) => self.exec(e, sc, s, fuel, stuck_if),
                    None if stuck_if => Err(SemError::Stuck(s.clone())),
                    None => Ok(one(s.clone())),
                }
            }
            StmtKind::While { cond, body, .. } => {
                let inner = sc.enter(stmt, self.interp)?;
                let mut out = BTreeSet::new();
                let mut frontier = vec![s.clone()];
                while let Some(cur) = frontier.pop() {
                    if !Evaluator::on(self.interp, &cur).holds(cond)? {
                        out.insert(Terminal::State(cur));
                        continue;
                    }
                    for t in self.exec(body, &inner, &cur, fuel, stuck_if)? {
                        match t {
                            Terminal::Done => {
                                out.insert(Terminal::Done);
                            }
                            Terminal::State(t) => frontier.push(t),
                        }
                    }
                    if *fuel == 0 {
                        return Err(SemError::FuelExhausted);
                    }
                    *fuel -= 1;
                }
                Ok(out)
            }
            StmtKind::Begin { body, .. } => {
                let inner = sc.enter(stmt, self.interp)?;
                let mut out = BTreeSet::new();
                for entry in self.block_entries(stmt, &inner, s)? {
                    for t in self.exec(body, &inner, &entry, fuel, stuck_if)? {
                        out.insert(match t {
                            Terminal::State(t) => Terminal::State(project_like(&t, s)),
                            Terminal::Done => Terminal::Done,
                        });
                    }
                }
                Ok(out)
            }
        }
    }
}

pub fn apply(s: &State, assignment: &[(String, Value)]) -> State {
    let mut t = s.clone();
    for (k, v) in assignment {
        t.set(k, v.clone());
    }
    t
}

/// Restrict `t` to the variables of `like`.
fn project_like(t: &State, like: &State) -> State {
    State(
        like.0
            .keys()
            .filter_map(|k| t.0.get(k).map(|v| (k.clone(), v.clone())))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_predicate, parse_statement};

    fn scope(vars: &[&str], inv: &str, interp: &Interpretation) -> Scoped {
        let ctx = ScopeContext {
            process: None,
            layers: vec![vars.iter().map(|s| s.to_string()).collect()],
            layer_invariants: vec![parse_predicate(inv).unwrap()],
        };
        Scoped::new(ctx, interp).unwrap()
    }

    fn st(pairs: &[(&str, i64)]) -> State {
        pairs.iter().fold(State::new(), |s, (k, v)| s.with(k, Value::Int(*v)))
    }

    const GCD_INV: &str = "r : 0..9 & x1 : 0..9 & x2 : 0..9 & y1 : 0..9 & y2 : 0..9";

    #[test]
    fn stop_targets_done() {
        let i = Interpretation::new(0, 2);
        let sc = scope(&["x"], "x : 0..2", &i);
        let rel = Semantics::new(&i).interpret(&parse_statement("STOP").unwrap(), &sc).unwrap();
        assert_eq!(rel.len(), 3);
        assert!(rel.pairs.iter().all(|(_, t)| *t == Terminal::Done));
    }

    #[test]
    fn simultaneous_copy() {
        let i = Interpretation::new(0, 9);
        let sc = scope(&["r", "x1", "x2", "y1", "y2"], GCD_INV, &i);
        let s = st(&[("r", 0), ("x1", 2), ("x2", 1), ("y1", 9), ("y2", 9)]);
        let img = Semantics::new(&i).image(&parse_statement("y1 := x1 || y2 := x2").unwrap(), &sc, &s).unwrap();
        let want = st(&[("r", 0), ("x1", 2), ("x2", 1), ("y1", 2), ("y2", 1)]);
        assert_eq!(img, BTreeSet::from([Terminal::State(want)]));
    }

    #[test]
    fn union_reading_under_strict_flag() {
        let i = Interpretation::new(0, 9);
        let sc = scope(&["r", "x1", "x2", "y1", "y2"], GCD_INV, &i);
        let s = st(&[("r", 0), ("x1", 2), ("x2", 1), ("y1", 9), ("y2", 9)]);
        let img = Semantics::new(&i)
            .strict(true)
            .image(&parse_statement("y1 := x1 || y2 := x2").unwrap(), &sc, &s)
            .unwrap();
        assert_eq!(img.len(), 2);
    }

    #[test]
    fn unmatched_if_is_identity() {
        let i = Interpretation::new(0, 9);
        let sc = scope(&["y1", "y2"], "y1 : 0..9 & y2 : 0..9", &i);
        let s = st(&[("y1", 3), ("y2", 3)]);
        let stmt = parse_statement("IF y1 > y2 THEN y1 := y1 - y2 ELSIF y2 > y1 THEN y2 := y2 - y1 END").unwrap();
        assert_eq!(Semantics::new(&i).image(&stmt, &sc, &s).unwrap(), BTreeSet::from([Terminal::State(s)]));
    }

    #[test]
    fn diamond_over_two_states() {
        let a = st(&[("x", 0)]);
        let b = st(&[("x", 1)]);
        let rel = ScopedRelation { pairs: BTreeSet::from([(a.clone(), Terminal::Done)]) };
        let d = diamond(&rel, &[a.clone(), b.clone()]);
        assert_eq!(d.image_of(&a), BTreeSet::from([Terminal::Done]));
        assert_eq!(d.image_of(&b), BTreeSet::from([Terminal::State(b.clone())]));
        assert_eq!(diamond(&ScopedRelation::default(), std::slice::from_ref(&a)).image_of(&a), BTreeSet::from([Terminal::State(a)]));
    }

    #[test]
    fn write_sets() {
        assert!(write_set(&parse_statement("STOP").unwrap()).is_empty());
        assert_eq!(write_set(&parse_statement("y1 := y1 - y2").unwrap()), BTreeSet::from(["y1".to_string()]));
        let b = parse_statement("BEGIN VARIABLES tmp INVARIANT bi: tmp : 0..3 tmp := 1; r := tmp END").unwrap();
        assert_eq!(write_set(&b), BTreeSet::from(["r".to_string()]));
    }

    #[test]
    fn begin_projects_locals() {
        let i = Interpretation::new(0, 3);
        let sc = scope(&["r"], "r : 0..3", &i);
        let b = parse_statement("BEGIN VARIABLES tmp INVARIANT bi: tmp : 0..3 tmp := 1; r := tmp END").unwrap();
        let img = Semantics::new(&i).image(&b, &sc, &st(&[("r", 0)])).unwrap();
        assert_eq!(img, BTreeSet::from([Terminal::State(st(&[("r", 1)]))]));
    }

    #[test]
    fn forgetful_sequence() {
        let i = Interpretation::new(0, 3);
        let sc = scope(&["x"], "x : 0..3", &i);
        let sem = Semantics::new(&i);
        let full = sem.interpret(&parse_statement("x := 3; ASSERT x < 2; x := x + 1").unwrap(), &sc).unwrap();
        let tail = sem.interpret(&parse_statement("ASSERT x < 2; x := x + 1").unwrap(), &sc).unwrap();
        assert_eq!(full, tail);
    }

    #[test]
    fn trm_cases() {
        let i = Interpretation::new(0, 4);
        let sc = scope(&["y1", "y2"], "y1 : 1..4 & y2 : 1..4", &i);
        let sem = Semantics::new(&i);
        let gcd = parse_statement(
            "WHILE y1 /= y2 INVARIANT li: y1 > 0 & y2 > 0 VARIANT y1 + y2 THEN IF y1 > y2 THEN y1 := y1 - y2 ELSE y2 := y2 - y1 END END",
        )
        .unwrap();
        assert_eq!(sem.trm_holds(&gcd, &sc).unwrap(), TrmResult::Discharged);
        let zero = parse_statement("WHILE y1 < y2 INVARIANT li: TRUE VARIANT 0 THEN y1 := y1 + 1 END").unwrap();
        assert!(matches!(sem.trm_holds(&zero, &sc).unwrap(), TrmResult::Violated { .. }));
        let bad = parse_statement("WHILE y1 < y2 INVARIANT li: TRUE VARIANT y1 THEN y2 := y2 - y1 END").unwrap();
        match sem.trm_holds(&bad, &sc).unwrap() {
            TrmResult::Violated { pre, post } => assert_eq!(pre.get("y1"), post.get("y1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn execute_stop_and_assert() {
        let i = Interpretation::new(0, 3);
        let sc = scope(&["x"], "x : 0..3", &i);
        let sem = Semantics::new(&i);
        let s = st(&[("x", 1)]);
        assert_eq!(
            sem.execute(&parse_statement("STOP").unwrap(), std::slice::from_ref(&s), &sc, 10, false).unwrap(),
            BTreeSet::from([Terminal::Done])
        );
        assert!(matches!(
            sem.execute(&parse_statement("ASSERT x = 0").unwrap(), &[s], &sc, 10, false),
            Err(SemError::AssertFailed(_))
        ));
    }
}
