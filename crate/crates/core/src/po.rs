//! Proof obligations: labeled sequents paired with a relational check form.

use crate::ast::{
    BinOp, Context, Event, Expr, InvariantKind, LabeledPred, ProcessDef, Quantifier, SlpModel, SourceSpan, Stmt,
    StmtKind,
};
use crate::ba::{eliminate, simplify, BaBuilder};
use crate::kernel::{EvalError, Interpretation};
use crate::relsem::{effective_guard, write_set, SemError, SemResult, Scoped};
use crate::render::render_expr;
use crate::scope::{invariant_conj, ScopeContext, Step, StmtPath, StmtPos};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Wd,
    Inv,
    Grt,
    Asn,
    FisRely,
    CloRelyRefl,
    CloRelyTrans,
    Var,
    Cmp,
    Thm,
    AxmSat,
    RefGrt,
}

impl Family {
    pub const ALL: [Family; 12] = [
        Family::Wd,
        Family::Inv,
        Family::Grt,
        Family::Asn,
        Family::FisRely,
        Family::CloRelyRefl,
        Family::CloRelyTrans,
        Family::Var,
        Family::Cmp,
        Family::Thm,
        Family::AxmSat,
        Family::RefGrt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Wd => "WD",
            Family::Inv => "INV",
            Family::Grt => "GRT",
            Family::Asn => "ASN",
            Family::FisRely => "FIS_RELY",
            Family::CloRelyRefl => "CLO_RELY_REFL",
            Family::CloRelyTrans => "CLO_RELY_TRANS",
            Family::Var => "VAR",
            Family::Cmp => "CMP",
            Family::Thm => "THM",
            Family::AxmSat => "AXM_SAT",
            Family::RefGrt => "REF_GRT",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A hypothesis; labeled ones print as their label.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyp {
    pub label: Option<String>,
    pub pred: Expr,
}

impl Hyp {
    fn named(label: &str, pred: Expr) -> Hyp {
        Hyp { label: Some(label.to_string()), pred }
    }

    fn plain(pred: Expr) -> Hyp {
        Hyp { label: None, pred }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Role {
    /// `x`
    Pre,
    /// `x'`
    Post,
    /// `x~k`
    Mid,
}

/// A free variable of a sequent and the state variable it stands for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeqVar {
    pub name: String,
    pub base: String,
    pub role: Role,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sequent {
    pub hyps: Vec<Hyp>,
    pub goal: Expr,
    pub vars: Vec<SeqVar>,
}

impl Sequent {
    /// Normalises (one-point elimination of defined post and intermediate
    /// values) and records the free state variables.
    pub fn new(hyps: Vec<Hyp>, goal: Expr, scope_vars: &[String]) -> Sequent {
        let mut parts: Vec<(Option<String>, Vec<Expr>)> = hyps
            .into_iter()
            .map(|h| match h.label {
                Some(l) => (Some(l), vec![h.pred]),
                None => (None, h.pred.conjuncts().into_iter().cloned().collect()),
            })
            .collect();
        let mut goal = goal;
        while let Some((i, j, target, def)) = find_definition(&parts) {
            parts[i].1.remove(j);
            for (_, es) in parts.iter_mut() {
                for e in es.iter_mut() {
                    *e = replace_one(e, &target, &def);
                }
            }
            goal = replace_one(&goal, &target, &def);
        }
        let hyps = parts
            .into_iter()
            .filter_map(|(label, es)| {
                let pred = simplify(&Expr::conjoin(es.iter().map(simplify)));
                (!pred.is_true()).then_some(Hyp { label, pred })
            })
            .collect::<Vec<_>>();
        let goal = simplify(&goal);
        let mut vars: Vec<SeqVar> = Vec::new();
        let mut note = |e: &Expr| {
            let free = e.free_names();
            for n in free.plain {
                let base = n.split('~').next().unwrap_or(&n).to_string();
                if scope_vars.contains(&base) {
                    let role = if n.contains('~') { Role::Mid } else { Role::Pre };
                    vars.push(SeqVar { name: n, base, role });
                }
            }
            for n in free.primed {
                vars.push(SeqVar { name: format!("{n}'"), base: n, role: Role::Post });
            }
        };
        for h in &hyps {
            note(&h.pred);
        }
        note(&goal);
        vars.sort_by(|a, b| (a.role, &a.name).cmp(&(b.role, &b.name)));
        vars.dedup();
        Sequent { hyps, goal, vars }
    }

    pub fn hypothesis(&self) -> Expr {
        Expr::conjoin(self.hyps.iter().map(|h| h.pred.clone()))
    }
}

fn find_definition(parts: &[(Option<String>, Vec<Expr>)]) -> Option<(usize, usize, Expr, Expr)> {
    for (i, (label, es)) in parts.iter().enumerate() {
        if label.is_some() {
            continue;
        }
        for (j, e) in es.iter().enumerate() {
            let Expr::Bin(BinOp::Eq, lhs, rhs) = e else { continue };
            let ok = match &**lhs {
                Expr::Primed(n) => !rhs.free_names().primed.contains(n),
                Expr::Var(n) if n.contains('~') => !rhs.free_names().plain.contains(n),
                _ => false,
            };
            if ok {
                return Some((i, j, (**lhs).clone(), (**rhs).clone()));
            }
        }
    }
    None
}

fn replace_one(e: &Expr, target: &Expr, def: &Expr) -> Expr {
    match target {
        Expr::Primed(n) => e.replace_primed(&[(n.clone(), def.clone())]),
        Expr::Var(n) => e.replace_vars(&[(n.clone(), def.clone())]),
        _ => e.clone(),
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hyps: Vec<String> = self
            .hyps
            .iter()
            .map(|h| h.label.clone().unwrap_or_else(|| render_expr(&h.pred)))
            .collect();
        if hyps.is_empty() {
            write!(f, "⊢ {}", render_expr(&self.goal))
        } else {
            write!(f, "{} ⊢ {}", hyps.join(", "), render_expr(&self.goal))
        }
    }
}

/// How an assertion's predecessor contributes to its obligation.
#[derive(Clone, Debug, PartialEq)]
pub enum AsnCase {
    /// (i) the previous statement is an assert with this predicate.
    AfterAssert(Expr),
    /// (ii) the previous statement is any other statement.
    AfterAction(Box<Stmt>),
    /// (iii) block head, with the context holding on entry.
    Head(Expr),
}

/// The decidable relational form of an obligation.
#[derive(Clone, Debug, PartialEq)]
pub enum CheckForm {
    /// Some (or, per state, every) context state has a raw successor.
    Wd { stmt: Box<Stmt>, ctx: Expr, per_state: bool },
    Inv { stmt: Box<Stmt>, ctx: Expr },
    Grt { stmt: Box<Stmt>, ctx: Expr, guarantee: Expr },
    Asn { case: AsnCase, rely: Option<Expr>, goal: Expr },
    Var { stmt: Box<Stmt> },
    FisRely { rely: Expr },
    CloRelyRefl { rely: Expr },
    CloRelyTrans { rely: Expr },
    /// `rely: None` is an absent rely, trivially discharged.
    Cmp { guarantee: Expr, rely: Option<Expr> },
    Thm { hyps: Expr, goal: Expr },
    AxmSat { context: Context },
    RefGrt { guarantee: Expr, events: Vec<Event>, vars: Vec<String>, union: bool },
    /// The obligation could not be formed within the resource limits.
    Unavailable(String),
}

#[derive(Clone, Debug)]
pub struct ProofObligation {
    pub id: String,
    pub family: Family,
    pub origin: SourceSpan,
    pub sequent: Sequent,
    pub form: CheckForm,
    pub scope: Arc<Scoped>,
    pub strict_paper: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GenOptions {
    pub strict_paper: bool,
    pub strict_feasibility: bool,
    /// Union instead of intersection of refined events in REF_GRT.
    pub ref_union: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum PoError {
    #[error("{id}: {source}")]
    At { id: String, source: SemError },
    #[error("no-machine: `{0}` refines events but the model has no MACHINE")]
    NoMachine(String),
    #[error("unknown-event: `{0}` is not an event of the machine")]
    UnknownEvent(String),
}

type Built = (Sequent, CheckForm);

struct Gen<'m> {
    model: &'m SlpModel,
    interp: &'m Interpretation,
    opts: GenOptions,
    out: Vec<ProofObligation>,
}

/// Every obligation of the model, in walk order with unique ids.
pub fn generate(
    model: &SlpModel,
    interp: &Interpretation,
    opts: &GenOptions,
) -> Result<Vec<ProofObligation>, PoError> {
    let mut g = Gen { model, interp, opts: *opts, out: Vec::new() };
    let global = g.scoped(&model.name, ScopeContext::model(model))?;
    g.axioms(&global);
    g.theorems(&global)?;
    for e in &model.environments {
        g.relies(&e.label.text, &e.relies, &global)?;
    }
    for p in &model.processes {
        g.relies(&p.label.text, &p.relies, &global)?;
    }
    for a in &model.processes {
        let others = model
            .processes
            .iter()
            .filter(|b| b.label.text != a.label.text)
            .map(|b| (&b.label.text, &b.relies))
            .chain(model.environments.iter().map(|e| (&e.label.text, &e.relies)));
        for (b, relies) in others {
            g.compat(a, b, relies, &global)?;
        }
    }
    for e in &model.environments {
        if !e.refines.is_empty() {
            let labels: Vec<&str> = e.refines.iter().map(|l| l.text.as_str()).collect();
            g.refinement(&e.label.text, &labels, &e.guarantee(), e.span, &global)?;
        }
    }
    for p in &model.processes {
        if !p.refines.is_empty() {
            let labels: Vec<&str> = p.refines.iter().map(|l| l.text.as_str()).collect();
            g.refinement(&p.label.text, &labels, &p.guarantee(), p.span, &global)?;
        }
        g.process(p)?;
    }
    Ok(uniquify(g.out))
}

fn uniquify(mut pos: Vec<ProofObligation>) -> Vec<ProofObligation> {
    let mut count: BTreeMap<String, usize> = BTreeMap::new();
    for p in &pos {
        *count.entry(p.id.clone()).or_default() += 1;
    }
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for p in pos.iter_mut() {
        if count[&p.id] > 1 {
            let n = seen.entry(p.id.clone()).or_default();
            *n += 1;
            p.id = format!("{}.{}", p.id, n);
        }
    }
    pos
}

/// REF_GRT for a unit whose guarantee must lie inside the refined events.
pub fn refinement_guarantee(
    model: &SlpModel,
    unit: &str,
    guarantee: &Expr,
    events: &[&str],
    interp: &Interpretation,
    ref_union: bool,
) -> Result<ProofObligation, PoError> {
    let opts = GenOptions { ref_union, ..GenOptions::default() };
    let mut g = Gen { model, interp, opts, out: Vec::new() };
    let global = g.scoped(&model.name, ScopeContext::model(model))?;
    g.refinement(unit, events, guarantee, SourceSpan::default(), &global)?;
    Ok(g.out.pop().expect("one obligation"))
}

/// The context `A` an action at `pos` is checked under.
pub fn assertion_context(model: &SlpModel, pos: &StmtPos) -> Option<Expr> {
    let body = model.process(&pos.process)?.body.as_ref()?;
    let mut found = None;
    contexts(body, &StmtPath::root(), &Expr::Bool(true), &mut |p, c| {
        if *p == pos.path {
            found = Some(c.clone());
        }
    });
    found
}

fn contexts(stmt: &Stmt, path: &StmtPath, entry: &Expr, visit: &mut dyn FnMut(&StmtPath, &Expr)) {
    let items = stmt.flatten_seq();
    let seq = matches!(stmt.kind, StmtKind::Seq(..));
    for (i, item) in items.iter().enumerate() {
        let at = if seq { path.child(Step::Item(i)) } else { path.clone() };
        let prev = if i > 0 { Some(items[i - 1]) } else { None };
        visit(&at, &context_after(prev, entry));
        for (step, inner, e) in children(item) {
            contexts(inner, &at.child(step), &e, visit);
        }
    }
}

/// Sub-blocks of a statement with the predicate holding on entry.
fn children(stmt: &Stmt) -> Vec<(Step, &Stmt, Expr)> {
    match &stmt.kind {
        StmtKind::If { branches, else_body } => {
            let mut out: Vec<(Step, &Stmt, Expr)> = branches
                .iter()
                .enumerate()
                .map(|(j, (_, b))| (Step::Branch(j), b, effective_guard(branches, j)))
                .collect();
            if let Some(e) = else_body {
                out.push((Step::Else, e, effective_guard(branches, branches.len())));
            }
            out
        }
        StmtKind::While { cond, body, .. } => vec![(Step::Body, body, cond.clone())],
        StmtKind::Begin { body, .. } => vec![(Step::Body, body, Expr::Bool(true))],
        _ => Vec::new(),
    }
}

fn context_after(prev: Option<&Stmt>, entry: &Expr) -> Expr {
    match prev.map(|s| &s.kind) {
        None => entry.clone(),
        Some(StmtKind::Assert(cs)) => Expr::conjoin(cs.iter().map(|c| c.predicate.clone())),
        Some(StmtKind::While { cond, invariants, .. }) => {
            Expr::and(Expr::not(cond.clone()), invariant_conj(invariants))
        }
        Some(_) => Expr::Bool(true),
    }
}

fn tag(stmt: &Stmt, path: &StmtPath) -> String {
    if let Some(l) = &stmt.label {
        return l.text.clone();
    }
    let inner = match &stmt.kind {
        StmtKind::Subst(sub) => sub.parts().into_iter().find_map(|(l, _)| l.map(|l| l.text.clone())),
        StmtKind::Assert(cs) => cs.iter().find_map(|c| c.label.as_ref().map(|l| l.text.clone())),
        _ => None,
    };
    inner.unwrap_or_else(|| path.to_string())
}

fn sigma(sc: &Scoped) -> Expr {
    Expr::and(sc.space.typing(false), sc.invariant.clone())
}

fn hyp_sigma(sc: &Scoped) -> Hyp {
    Hyp::named("HYP", sigma(sc))
}

/// Σ without the axioms, for goals and the copies of Σ over other states.
fn sigma_open(sc: &Scoped) -> Expr {
    Expr::and(sc.space.typing(false), sc.open.clone())
}

fn hyp_sigma_post(sc: &Scoped) -> Hyp {
    Hyp::named("HYP'", sigma_open(sc).prime_all(&sc.vars()))
}

fn hyp_typing_post(sc: &Scoped) -> Hyp {
    Hyp::named("TYP'", sc.space.typing(true))
}

fn disjuncts(e: &Expr) -> Vec<&Expr> {
    match e {
        Expr::Bin(BinOp::Or, a, b) => {
            let mut v = disjuncts(a);
            v.extend(disjuncts(b));
            v
        }
        other => vec![other],
    }
}

fn forall(vars: Vec<String>, body: Expr) -> Expr {
    if vars.is_empty() {
        body
    } else {
        Expr::Quant(Quantifier::ForAll, vars, Box::new(body))
    }
}

/// Pairs renaming every scope variable to a fresh intermediate.
fn mids(b: &BaBuilder<'_>) -> Vec<(String, Expr)> {
    b.vars().into_iter().map(|x| {
        let m = b.fresh(&x);
        (x, Expr::var(&m))
    }).collect()
}

impl<'m> Gen<'m> {
    fn scoped(&self, id: &str, ctx: ScopeContext) -> Result<Arc<Scoped>, PoError> {
        Scoped::uncapped(ctx, self.interp)
            .map(Arc::new)
            .map_err(|source| PoError::At { id: id.to_string(), source })
    }

    fn builder<'s>(&self, sc: &'s Scoped) -> BaBuilder<'s>
    where
        'm: 's,
    {
        BaBuilder::new(sc, self.interp, self.opts.strict_paper)
    }

    /// Record an obligation; resource failures while forming it make it
    /// unavailable rather than aborting generation.
    fn push(
        &mut self,
        id: String,
        family: Family,
        origin: SourceSpan,
        sc: &Arc<Scoped>,
        build: impl FnOnce(&Self) -> SemResult<Built>,
    ) -> Result<(), PoError> {
        let (sequent, form) = match build(self) {
            Ok(b) => b,
            Err(SemError::Eval(e @ EvalError::StateSpaceExceeded { .. })) => (
                Sequent { hyps: Vec::new(), goal: Expr::Bool(true), vars: Vec::new() },
                CheckForm::Unavailable(e.to_string()),
            ),
            Err(source) => return Err(PoError::At { id, source }),
        };
        self.out.push(ProofObligation {
            id,
            family,
            origin,
            sequent,
            form,
            scope: sc.clone(),
            strict_paper: self.opts.strict_paper,
        });
        Ok(())
    }

    fn axioms(&mut self, sc: &Arc<Scoped>) {
        let ctx = &self.model.context;
        let goal = Expr::conjoin(ctx.axioms.iter().map(|a| a.predicate.clone()));
        let origin = ctx.axioms.first().map(|a| a.span).unwrap_or_default();
        let id = format!("{}.axioms.AXM_SAT", self.model.name);
        let form = CheckForm::AxmSat { context: ctx.clone() };
        let sequent = Sequent::new(Vec::new(), goal, &[]);
        self.push(id, Family::AxmSat, origin, sc, |_| Ok((sequent, form))).expect("infallible");
    }

    fn theorems(&mut self, global: &Arc<Scoped>) -> Result<(), PoError> {
        let axioms = Expr::conjoin(self.model.context.axioms.iter().map(|a| a.predicate.clone()));
        let mut prior = Vec::new();
        for inv in &self.model.invariants {
            if inv.kind == InvariantKind::Theorem {
                let id = format!("{}.{}.THM", self.model.name, inv.label.text);
                let hyps = vec![
                    Hyp::named("TYP", global.space.typing(false)),
                    Hyp::named("AXM", axioms.clone()),
                    Hyp::named("PRIOR", Expr::conjoin(prior.iter().cloned())),
                ];
                let all = Expr::conjoin(hyps.iter().map(|h| h.pred.clone()));
                let goal = inv.predicate.clone();
                let vars = global.vars();
                self.push(id, Family::Thm, inv.span, global, |_| {
                    Ok((Sequent::new(hyps, goal.clone(), &vars), CheckForm::Thm { hyps: all, goal }))
                })?;
            }
            prior.push(inv.predicate.clone());
        }
        for p in &self.model.processes {
            if !p.invariants.iter().any(|i| i.kind == InvariantKind::Theorem) {
                continue;
            }
            let sc = self.scoped(&p.label.text, ScopeContext::model(self.model).push(
                p.locals.iter().map(|v| v.name.clone()).collect(),
                Expr::Bool(true),
            ))?;
            let mut prior = vec![global.invariant.clone()];
            for inv in &p.invariants {
                if inv.kind == InvariantKind::Theorem {
                    let id = format!("{}.{}.THM", p.label.text, inv.label.text);
                    let hyps = vec![
                        Hyp::named("TYP", sc.space.typing(false)),
                        Hyp::named("PRIOR", Expr::conjoin(prior.iter().cloned())),
                    ];
                    let all = Expr::conjoin(hyps.iter().map(|h| h.pred.clone()));
                    let goal = inv.predicate.clone();
                    let vars = sc.vars();
                    self.push(id, Family::Thm, inv.span, &sc, |_| {
                        Ok((Sequent::new(hyps, goal.clone(), &vars), CheckForm::Thm { hyps: all, goal }))
                    })?;
                }
                prior.push(inv.predicate.clone());
            }
        }
        Ok(())
    }

    fn relies(&mut self, unit: &str, relies: &[LabeledPred], sc: &Arc<Scoped>) -> Result<(), PoError> {
        let vars = sc.vars();
        for r in relies {
            let rely = r.predicate.clone();
            let base = format!("{unit}.{}", r.label.text);
            let inv_post = sc.open.prime_all(&vars);
            self.push(format!("{base}.FIS_RELY"), Family::FisRely, r.span, sc, |_| {
                let hyps = vec![hyp_sigma(sc), hyp_typing_post(sc), Hyp::plain(rely.clone())];
                Ok((Sequent::new(hyps, inv_post, &vars), CheckForm::FisRely { rely: rely.clone() }))
            })?;
            let refl = rely.replace_primed(&vars.iter().map(|x| (x.clone(), Expr::var(x))).collect::<Vec<_>>());
            self.push(format!("{base}.CLO_RELY_REFL"), Family::CloRelyRefl, r.span, sc, |_| {
                Ok((Sequent::new(vec![hyp_sigma(sc)], refl, &vars), CheckForm::CloRelyRefl { rely: rely.clone() }))
            })?;
            self.push(format!("{base}.CLO_RELY_TRANS"), Family::CloRelyTrans, r.span, sc, |g| {
                let b = g.builder(sc);
                let m = mids(&b);
                let hyps = vec![
                    hyp_sigma(sc),
                    Hyp::named("HYP~", sigma_open(sc).replace_vars(&m)),
                    hyp_sigma_post(sc),
                    Hyp::plain(rely.replace_primed(&m)),
                    Hyp::plain(rely.replace_vars(&m)),
                ];
                Ok((Sequent::new(hyps, rely.clone(), &vars), CheckForm::CloRelyTrans { rely: rely.clone() }))
            })?;
        }
        Ok(())
    }

    fn compat(&mut self, a: &ProcessDef, b: &str, relies: &[LabeledPred], sc: &Arc<Scoped>) -> Result<(), PoError> {
        let id = format!("{}.{}.CMP", a.label.text, b);
        let guarantee = a.guarantee();
        let vars = sc.vars();
        self.push(id, Family::Cmp, a.span, sc, |_| {
            if relies.is_empty() {
                return Ok((Sequent::new(Vec::new(), Expr::Bool(true), &vars), CheckForm::Cmp { guarantee, rely: None }));
            }
            let rely = Expr::conjoin(relies.iter().map(|r| r.predicate.clone()));
            let hyps = vec![hyp_sigma(sc), hyp_typing_post(sc), Hyp::plain(guarantee.clone())];
            Ok((Sequent::new(hyps, rely.clone(), &vars), CheckForm::Cmp { guarantee, rely: Some(rely) }))
        })
    }

    fn refinement(
        &mut self,
        unit: &str,
        labels: &[&str],
        guarantee: &Expr,
        origin: SourceSpan,
        sc: &Arc<Scoped>,
    ) -> Result<(), PoError> {
        let machine = self.model.machine.as_ref().ok_or_else(|| PoError::NoMachine(unit.to_string()))?;
        let mut events = Vec::new();
        for l in labels {
            events.push(machine.event(l).cloned().ok_or_else(|| PoError::UnknownEvent(l.to_string()))?);
        }
        let vars = sc.vars();
        let mvars: Vec<String> = machine
            .variables
            .iter()
            .map(|v| v.name.clone())
            .filter(|v| vars.contains(v))
            .collect();
        let union = self.opts.ref_union;
        let guarantee = guarantee.clone();
        self.push(format!("{unit}.refines.REF_GRT"), Family::RefGrt, origin, sc, |g| {
            let b = g.builder(sc);
            let evs = events.iter().map(|e| b.event(e, &mvars));
            let goal = if union { Expr::disjoin(evs) } else { Expr::conjoin(evs) };
            let hyps = vec![hyp_sigma(sc), hyp_typing_post(sc), Hyp::plain(guarantee.clone())];
            Ok((
                Sequent::new(hyps, goal, &vars),
                CheckForm::RefGrt { guarantee, events, vars: mvars.clone(), union },
            ))
        })
    }

    fn process(&mut self, p: &ProcessDef) -> Result<(), PoError> {
        let Some(body) = &p.body else { return Ok(()) };
        let sc = self.scoped(&p.label.text, ScopeContext::process(self.model, p))?;
        self.block(p, body, &sc, &StmtPath::root(), &Expr::Bool(true))
    }

    fn block(
        &mut self,
        p: &ProcessDef,
        stmt: &Stmt,
        sc: &Arc<Scoped>,
        path: &StmtPath,
        entry: &Expr,
    ) -> Result<(), PoError> {
        let items = stmt.flatten_seq();
        let seq = matches!(stmt.kind, StmtKind::Seq(..));
        for (i, item) in items.iter().enumerate() {
            let at = if seq { path.child(Step::Item(i)) } else { path.clone() };
            let prev = if i > 0 { Some(items[i - 1]) } else { None };
            let ctx = context_after(prev, entry);
            let case = match prev {
                Some(s) => match s.assert_predicate() {
                    Some(a) => AsnCase::AfterAssert(a),
                    None => AsnCase::AfterAction(Box::new(s.clone())),
                },
                None => AsnCase::Head(entry.clone()),
            };
            self.statement(p, item, sc, &at, ctx, case)?;
            let inner = match &item.kind {
                StmtKind::While { .. } | StmtKind::Begin { .. } => self.scoped(
                    &format!("{}.{}", p.label.text, tag(item, &at)),
                    sc.enter(item, self.interp).map(|s| s.ctx).unwrap_or_else(|_| sc.ctx.clone()),
                )?,
                _ => sc.clone(),
            };
            for (step, b, e) in children(item) {
                self.block(p, b, &inner, &at.child(step), &e)?;
            }
        }
        Ok(())
    }

    fn statement(
        &mut self,
        p: &ProcessDef,
        stmt: &Stmt,
        sc: &Arc<Scoped>,
        path: &StmtPath,
        ctx: Expr,
        case: AsnCase,
    ) -> Result<(), PoError> {
        let base = format!("{}.{}", p.label.text, tag(stmt, path));
        let rely = (!p.relies.is_empty()).then(|| {
            let globals = self.model.global_names();
            Expr::and(
                p.rely(),
                Expr::conjoin(
                    sc.vars()
                        .into_iter()
                        .filter(|x| !globals.contains(x))
                        .map(|x| Expr::eq(Expr::primed(&x), Expr::var(&x))),
                ),
            )
        });
        match &stmt.kind {
            StmtKind::Subst(_) | StmtKind::Stop | StmtKind::If { .. } | StmtKind::Begin { .. } => {
                self.wd(&base, stmt, sc, &ctx)?;
                self.inv(&base, stmt, sc, &ctx)?;
                let atomic = matches!(stmt.kind, StmtKind::Subst(_) | StmtKind::Stop);
                if atomic && !p.guarantees.is_empty() {
                    self.grt(&base, stmt, sc, &ctx, &p.guarantee())?;
                }
            }
            StmtKind::While { invariants, .. } => {
                self.var(&base, stmt, sc)?;
                self.asn(&base, stmt.span, sc, case, rely, invariant_conj(invariants))?;
            }
            StmtKind::Assert(cs) => {
                let goal = Expr::conjoin(cs.iter().map(|c| c.predicate.clone()));
                self.asn(&base, stmt.span, sc, case, rely, goal)?;
            }
            StmtKind::Seq(..) => unreachable!("sequences are flattened"),
        }
        Ok(())
    }

    fn wd(&mut self, base: &str, stmt: &Stmt, sc: &Arc<Scoped>, ctx: &Expr) -> Result<(), PoError> {
        let per_state = self.opts.strict_feasibility;
        self.push(format!("{base}.WD"), Family::Wd, stmt.span, sc, |g| {
            let b = g.builder(sc);
            let raw = b.raw(stmt)?;
            let feas = b.feasible(&raw, &write_set(stmt));
            let vars = sc.vars();
            let sequent = if per_state {
                Sequent::new(vec![hyp_sigma(sc), Hyp::plain(ctx.clone())], feas, &vars)
            } else {
                let mut names: Vec<String> = sc.space.vars.iter().map(|(n, _, _)| n.to_string()).collect();
                names.sort();
                let body = Expr::conjoin([sigma_open(sc), ctx.clone(), feas]);
                let axioms = if sc.closed.is_true() { Vec::new() } else { vec![Hyp::named("AXM", sc.closed.clone())] };
                Sequent::new(axioms, Expr::exists(names, body), &vars)
            };
            Ok((sequent, CheckForm::Wd { stmt: Box::new(stmt.clone()), ctx: ctx.clone(), per_state }))
        })
    }

    fn inv(&mut self, base: &str, stmt: &Stmt, sc: &Arc<Scoped>, ctx: &Expr) -> Result<(), PoError> {
        self.push(format!("{base}.INV"), Family::Inv, stmt.span, sc, |g| {
            let ba = g.builder(sc).ba(stmt)?;
            let vars = sc.vars();
            let hyps = vec![hyp_sigma(sc), Hyp::plain(ctx.clone()), Hyp::plain(ba.rel)];
            let goal = sigma_open(sc).prime_all(&vars);
            Ok((Sequent::new(hyps, goal, &vars), CheckForm::Inv { stmt: Box::new(stmt.clone()), ctx: ctx.clone() }))
        })
    }

    fn grt(&mut self, base: &str, stmt: &Stmt, sc: &Arc<Scoped>, ctx: &Expr, g_: &Expr) -> Result<(), PoError> {
        self.push(format!("{base}.GRT"), Family::Grt, stmt.span, sc, |g| {
            let ba = g.builder(sc).ba(stmt)?;
            let hyps = vec![hyp_sigma(sc), Hyp::plain(ctx.clone()), Hyp::plain(ba.rel)];
            Ok((
                Sequent::new(hyps, g_.clone(), &sc.vars()),
                CheckForm::Grt { stmt: Box::new(stmt.clone()), ctx: ctx.clone(), guarantee: g_.clone() },
            ))
        })
    }

    fn var(&mut self, base: &str, stmt: &Stmt, sc: &Arc<Scoped>) -> Result<(), PoError> {
        let StmtKind::While { cond, variant, body, .. } = &stmt.kind else { return Ok(()) };
        self.push(format!("{base}.VAR"), Family::Var, stmt.span, sc, |g| {
            let inner = sc.enter(stmt, g.interp)?;
            let b = g.builder(&inner);
            let rel = b.ba(body)?.rel;
            let m = mids(&b);
            let names: Vec<String> = m.iter().map(|(_, e)| render_expr(e)).collect();
            let ante = simplify(&rel.replace_primed(&m));
            let cons = Expr::bin(BinOp::Lt, variant.replace_vars(&m), variant.clone());
            let decrease = Expr::conjoin(disjuncts(&ante).into_iter().map(|d| {
                let (bound, d, cons) = eliminate(names.clone(), d.clone(), cons.clone());
                forall(bound, Expr::implies(d, cons))
            }));
            let goal = Expr::and(Expr::bin(BinOp::Ge, variant.clone(), Expr::Int(0)), decrease);
            let hyps = vec![Hyp::named("HYP", sigma(&inner)), Hyp::plain(cond.clone())];
            Ok((Sequent::new(hyps, goal, &sc.vars()), CheckForm::Var { stmt: Box::new(stmt.clone()) }))
        })
    }

    fn asn(
        &mut self,
        base: &str,
        origin: SourceSpan,
        sc: &Arc<Scoped>,
        case: AsnCase,
        rely: Option<Expr>,
        goal: Expr,
    ) -> Result<(), PoError> {
        self.push(format!("{base}.ASN"), Family::Asn, origin, sc, |g| {
            let vars = sc.vars();
            let post = goal.prime_all(&vars);
            let sequent = match (&case, &rely) {
                (AsnCase::AfterAssert(a) | AsnCase::Head(a), None) => {
                    Sequent::new(vec![hyp_sigma(sc), Hyp::plain(a.clone())], goal.clone(), &vars)
                }
                (AsnCase::AfterAssert(a) | AsnCase::Head(a), Some(r)) => Sequent::new(
                    vec![hyp_sigma(sc), Hyp::plain(a.clone()), Hyp::plain(r.clone()), hyp_sigma_post(sc)],
                    post,
                    &vars,
                ),
                (AsnCase::AfterAction(s), None) => {
                    let ba = g.builder(sc).ba(s)?;
                    Sequent::new(vec![hyp_sigma(sc), Hyp::plain(ba.rel)], post, &vars)
                }
                (AsnCase::AfterAction(s), Some(r)) => {
                    let b = g.builder(sc);
                    let ba = b.ba(s)?;
                    let m = mids(&b);
                    let hyps = vec![
                        hyp_sigma(sc),
                        Hyp::plain(ba.rel.replace_primed(&m)),
                        Hyp::plain(r.replace_vars(&m)),
                        hyp_sigma_post(sc),
                    ];
                    Sequent::new(hyps, post, &vars)
                }
            };
            Ok((sequent, CheckForm::Asn { case: case.clone(), rely: rely.clone(), goal: goal.clone() }))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_model, parse_predicate};

    fn appendix(body: &str) -> SlpModel {
        parse_model(&format!(
            "MODEL app SETS ELEM VARIABLES s e g t
             INVARIANTS i1: s <: ELEM & e : ELEM & g : ELEM & t : ELEM
             PROCESS p BODY {body} END
             CHECK SET ELEM = {{a, b}} END"
        ))
        .unwrap()
    }

    fn asn(m: &SlpModel) -> Vec<ProofObligation> {
        let i = Interpretation::from_model(m).unwrap();
        generate(m, &i, &GenOptions::default())
            .unwrap()
            .into_iter()
            .filter(|p| p.family == Family::Asn)
            .collect()
    }

    #[test]
    fn chained_asserts() {
        let pos = asn(&appendix("s := s \\/ {e}; ASSERT e : s; ASSERT s /= {}"));
        assert_eq!(pos.len(), 2);
        assert_eq!(pos[0].sequent.goal, parse_predicate("e : s \\/ {e}").unwrap());
        assert_eq!(pos[0].sequent.hyps.len(), 1);
        assert_eq!(pos[1].sequent.hyps[1].pred, parse_predicate("e : s").unwrap());
        assert_eq!(pos[1].sequent.to_string(), "HYP, e : s ⊢ s /= {}");
    }

    #[test]
    fn composite_assert_is_one_obligation() {
        let pos = asn(&appendix("s := s \\/ {e}; ASSERT e : s &&& s /= {}"));
        assert_eq!(pos.len(), 1);
        assert_eq!(pos[0].sequent.goal, parse_predicate("e : s \\/ {e} & s \\/ {e} /= {}").unwrap());
    }

    #[test]
    fn context_after_assert_and_loop() {
        let m = appendix("s := s \\/ {e}; ASSERT s /= {}; t :: s");
        let pos = StmtPos { process: "p".into(), path: StmtPath(vec![Step::Item(2)]) };
        assert_eq!(assertion_context(&m, &pos), Some(parse_predicate("s /= {}").unwrap()));
        let first = StmtPos { process: "p".into(), path: StmtPath(vec![Step::Item(0)]) };
        assert_eq!(assertion_context(&m, &first), Some(Expr::Bool(true)));
    }

    #[test]
    fn compatibility_count() {
        let m = parse_model(
            "MODEL m VARIABLES x INVARIANTS i: x : 0..2
             ENVIRONMENT e RELY r: x' = x END
             PROCESS p RELY r: x' : 0..2 END
             PROCESS q RELY r: x' : 0..2 END",
        )
        .unwrap();
        let pos = generate(&m, &Interpretation::from_model(&m).unwrap(), &GenOptions::default()).unwrap();
        assert_eq!(pos.iter().filter(|p| p.family == Family::Cmp).count(), 4);
        let ids: Vec<&str> = pos.iter().map(|p| p.id.as_str()).collect();
        let mut uniq = ids.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), ids.len());
    }

    #[test]
    fn loops_get_variant_and_entry() {
        let m = parse_model(
            "MODEL m VARIABLES x INVARIANTS i: x : 0..4
             PROCESS p BODY x := 3; loop: WHILE x > 0 INVARIANT li: x >= 0 VARIANT x THEN x := x - 1 END END",
        )
        .unwrap();
        let pos = generate(&m, &Interpretation::from_model(&m).unwrap(), &GenOptions::default()).unwrap();
        let ids: Vec<&str> = pos.iter().map(|p| p.id.as_str()).collect();
        assert!(ids.contains(&"p.loop.VAR"));
        assert!(ids.contains(&"p.loop.ASN"));
        assert!(ids.contains(&"p.body_s1_do.INV"));
    }

    #[test]
    fn missing_machine() {
        let m = parse_model("MODEL m VARIABLES x INVARIANTS i: x : 0..2 PROCESS p REFINES ev GUARANTEE g: x' = x END")
            .unwrap();
        let r = generate(&m, &Interpretation::from_model(&m).unwrap(), &GenOptions::default());
        assert!(matches!(r, Err(PoError::NoMachine(_))));
    }
}
