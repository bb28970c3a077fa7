//! Finite-domain discharge of proof obligations and the check report.

use crate::ast::{Expr, SlpModel};
use crate::kernel::{check_interpretation, EvalError, Evaluator, Interpretation, Name, Space, State, Value};
use crate::po::{generate, AsnCase, CheckForm, Family, GenOptions, PoError, ProofObligation, Role, Sequent};
use crate::relsem::{SemError, SemResult, Semantics, Terminal};
use rayon::prelude::*;
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

pub type Witness = Vec<(String, Value)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Discharged,
    /// Bindings of the sequent's free variables refuting it.
    Violated(Witness),
    Skipped(String),
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Discharged => "discharged",
            Verdict::Violated(_) => "violated",
            Verdict::Skipped(_) => "skipped",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckResult {
    pub id: String,
    pub family: Family,
    pub verdict: Verdict,
    pub ms: u64,
}

/// Decide an obligation by enumerating its relational form.
pub fn check(po: &ProofObligation, interp: &Interpretation) -> CheckResult {
    let start = Instant::now();
    let verdict = match relational(po, interp) {
        Ok(v) => v,
        Err(e) => Verdict::Skipped(e.to_string()),
    };
    CheckResult { id: po.id.clone(), family: po.family, verdict, ms: start.elapsed().as_millis() as u64 }
}

fn witness(sequent: &Sequent, pre: &State, mid: Option<&State>, post: Option<&State>) -> Witness {
    sequent
        .vars
        .iter()
        .filter_map(|v| {
            let st = match v.role {
                Role::Pre => Some(pre),
                Role::Mid => mid,
                Role::Post => post,
            }?;
            st.get(&v.base).map(|x| (v.name.clone(), x.clone()))
        })
        .collect()
}

/// States of `space` related to `pre` by `pred`; each conjunct is tested
/// once the post values it reads are bound.
pub fn posts(space: &Space, pred: &Expr, pre: &State, interp: &Interpretation) -> SemResult<Vec<State>> {
    let mut levels: Vec<Vec<&Expr>> = vec![Vec::new(); space.vars.len() + 1];
    for c in pred.conjuncts() {
        let primed = c.free_names().primed;
        let level = space.vars.iter().rposition(|(n, _, _)| primed.iter().any(|p| **p == **n)).map_or(0, |i| i + 1);
        levels[level].push(c);
    }
    let mut out = Vec::new();
    let mut post = pre.clone();
    fill_posts(space, &levels, 0, pre, &mut post, interp, &mut out)?;
    Ok(out)
}

fn fill_posts(
    space: &Space,
    levels: &[Vec<&Expr>],
    k: usize,
    pre: &State,
    post: &mut State,
    interp: &Interpretation,
    out: &mut Vec<State>,
) -> SemResult<()> {
    {
        let ev = Evaluator::on_pair(interp, pre, post);
        for c in &levels[k] {
            if !ev.holds(c)? {
                return Ok(());
            }
        }
    }
    let Some((name, _, vals)) = space.vars.get(k) else {
        out.push(post.clone());
        return Ok(());
    };
    for v in vals {
        post.set(name, v.clone());
        fill_posts(space, levels, k + 1, pre, post, interp, out)?;
    }
    post.set(name, pre.get(name).cloned().expect("pre binds every variable"));
    Ok(())
}

fn relational(po: &ProofObligation, interp: &Interpretation) -> SemResult<Verdict> {
    if let CheckForm::Unavailable(reason) = &po.form {
        return Ok(Verdict::Skipped(reason.clone()));
    }
    let sc = &*po.scope;
    sc.space.check_cap(interp)?;
    let sem = Semantics::new(interp).strict(po.strict_paper);
    let seq = &po.sequent;
    let holds = |e: &Expr, s: &State| -> SemResult<bool> { Ok(Evaluator::on(interp, s).holds(e)?) };
    let holds2 = |e: &Expr, s: &State, t: &State| -> SemResult<bool> { Ok(Evaluator::on_pair(interp, s, t).holds(e)?) };
    let violated = |s: &State, u: Option<&State>, t: Option<&State>| Ok(Verdict::Violated(witness(seq, s, u, t)));
    match &po.form {
        CheckForm::Wd { stmt, ctx, per_state } => {
            let mut any = false;
            for s in sc.states(interp)? {
                if !holds(ctx, &s)? {
                    continue;
                }
                let empty = sem.raw_image(stmt, sc, &s)?.is_empty();
                if *per_state && empty {
                    return violated(&s, None, None);
                }
                any |= !empty;
                if any && !per_state {
                    break;
                }
            }
            if *per_state || any {
                Ok(Verdict::Discharged)
            } else {
                Ok(Verdict::Violated(Vec::new()))
            }
        }
        CheckForm::Inv { stmt, ctx } => {
            for s in sc.states(interp)? {
                if !holds(ctx, &s)? {
                    continue;
                }
                for t in sem.image(stmt, sc, &s)? {
                    if let Terminal::State(t) = t {
                        if !sc.contains(&t, interp)? {
                            return violated(&s, None, Some(&t));
                        }
                    }
                }
            }
            Ok(Verdict::Discharged)
        }
        CheckForm::Grt { stmt, ctx, guarantee } => {
            for s in sc.states(interp)? {
                if !holds(ctx, &s)? {
                    continue;
                }
                for t in sem.image(stmt, sc, &s)? {
                    if let Terminal::State(t) = t {
                        if !holds2(guarantee, &s, &t)? {
                            return violated(&s, None, Some(&t));
                        }
                    }
                }
            }
            Ok(Verdict::Discharged)
        }
        CheckForm::Asn { case, rely, goal } => {
            for s in sc.states(interp)? {
                let mids: Vec<State> = match case {
                    AsnCase::AfterAssert(a) | AsnCase::Head(a) => {
                        if !holds(a, &s)? {
                            continue;
                        }
                        vec![s.clone()]
                    }
                    AsnCase::AfterAction(a) => sem
                        .image(a, sc, &s)?
                        .into_iter()
                        .filter_map(|t| t.state().cloned())
                        .collect(),
                };
                for u in &mids {
                    match rely {
                        None => {
                            if !holds(goal, u)? {
                                let post = matches!(case, AsnCase::AfterAction(_)).then_some(u);
                                return violated(&s, None, post);
                            }
                        }
                        Some(r) => {
                            for t in posts(&sc.space, r, u, interp)? {
                                if sc.contains(&t, interp)? && !holds(goal, &t)? {
                                    return violated(&s, Some(u), Some(&t));
                                }
                            }
                        }
                    }
                }
            }
            Ok(Verdict::Discharged)
        }
        CheckForm::Var { stmt } => match sem.trm_holds(stmt, sc)? {
            crate::relsem::TrmResult::Discharged => Ok(Verdict::Discharged),
            crate::relsem::TrmResult::Violated { pre, post } => violated(&pre, None, Some(&post)),
        },
        CheckForm::FisRely { rely } => {
            for s in sc.states(interp)? {
                for t in posts(&sc.space, rely, &s, interp)? {
                    if !holds(&sc.invariant, &t)? {
                        return violated(&s, None, Some(&t));
                    }
                }
            }
            Ok(Verdict::Discharged)
        }
        CheckForm::CloRelyRefl { rely } => {
            for s in sc.states(interp)? {
                if !holds2(rely, &s, &s)? {
                    return violated(&s, None, None);
                }
            }
            Ok(Verdict::Discharged)
        }
        CheckForm::CloRelyTrans { rely } => {
            let states = sc.states(interp)?;
            let index: BTreeMap<&State, u32> = states.iter().zip(0..).collect();
            // successor sets are shared by many states; keep each once
            let mut sets: Vec<Vec<u32>> = Vec::new();
            let mut ids: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
            let mut set_of = Vec::with_capacity(states.len());
            for s in &states {
                let next: Vec<u32> = posts(&sc.space, rely, s, interp)?.iter().filter_map(|t| index.get(t).copied()).collect();
                let id = *ids.entry(next).or_insert_with_key(|k| {
                    sets.push(k.clone());
                    sets.len() - 1
                });
                set_of.push(id);
            }
            let mut closed = BTreeSet::new();
            let mut reach = vec![false; states.len()];
            for (i, &a) in set_of.iter().enumerate() {
                sets[a].iter().for_each(|&u| reach[u as usize] = true);
                for &u in &sets[a] {
                    let b = set_of[u as usize];
                    if closed.contains(&(a, b)) {
                        continue;
                    }
                    if let Some(&t) = sets[b].iter().find(|&&t| !reach[t as usize]) {
                        return violated(&states[i], Some(&states[u as usize]), Some(&states[t as usize]));
                    }
                    closed.insert((a, b));
                }
                sets[a].iter().for_each(|&u| reach[u as usize] = false);
            }
            Ok(Verdict::Discharged)
        }
        CheckForm::Cmp { guarantee, rely } => {
            let Some(rely) = rely else { return Ok(Verdict::Discharged) };
            for s in sc.states(interp)? {
                for t in posts(&sc.space, guarantee, &s, interp)? {
                    if !holds2(rely, &s, &t)? {
                        return violated(&s, None, Some(&t));
                    }
                }
            }
            Ok(Verdict::Discharged)
        }
        CheckForm::Thm { hyps, goal } => {
            for s in sc.space.filter(hyps, interp)? {
                if !holds(goal, &s)? {
                    return violated(&s, None, None);
                }
            }
            Ok(Verdict::Discharged)
        }
        CheckForm::AxmSat { context } => {
            let bad = check_interpretation(context, interp);
            match bad.first() {
                None => Ok(Verdict::Discharged),
                Some(v) => Ok(Verdict::Violated(v.witness.clone())),
            }
        }
        CheckForm::RefGrt { guarantee, events, vars, union } => {
            let project = |s: &State| -> Vec<Option<Value>> { vars.iter().map(|v| s.get(v).cloned()).collect() };
            for s in sc.states(interp)? {
                let mut images = Vec::new();
                for e in events {
                    let img: Vec<Vec<Option<Value>>> =
                        sem.event_image(e, Some(&sc.space), &s)?.iter().map(project).collect();
                    images.push(img);
                }
                for t in posts(&sc.space, guarantee, &s, interp)? {
                    let pt = project(&t);
                    let ok = if *union {
                        images.iter().any(|img| img.contains(&pt))
                    } else {
                        images.iter().all(|img| img.contains(&pt))
                    };
                    if !ok {
                        return violated(&s, None, Some(&t));
                    }
                }
            }
            Ok(Verdict::Discharged)
        }
        CheckForm::Unavailable(_) => unreachable!("handled above"),
    }
}

/// Candidate values for bound intermediates: the variable's domain, widened
/// by the integer bound when it holds integers.
pub fn fallback_domains(space: &Space, interp: &Interpretation) -> BTreeMap<String, Vec<Value>> {
    space
        .vars
        .iter()
        .map(|(n, _, vals)| {
            let mut vs = vals.clone();
            if vs.iter().all(|v| matches!(v, Value::Int(_))) {
                vs.extend(interp.int_range().map(Value::Int));
                vs.sort();
                vs.dedup();
            }
            (n.to_string(), vs)
        })
        .collect()
}

/// Second, deliberately plain evaluator: enumerate the sequent's free
/// variables and look for a binding with true hypotheses and false goal.
pub fn naive_check(po: &ProofObligation, interp: &Interpretation) -> Verdict {
    if let CheckForm::Unavailable(reason) = &po.form {
        return Verdict::Skipped(reason.clone());
    }
    match naive(&po.sequent, &po.scope.space, interp) {
        Ok(None) => Verdict::Discharged,
        Ok(Some(w)) => Verdict::Violated(w),
        Err(e) => Verdict::Skipped(e.to_string()),
    }
}

fn naive(seq: &Sequent, space: &Space, interp: &Interpretation) -> Result<Option<Witness>, EvalError> {
    let fb = fallback_domains(space, interp);
    let ev = Evaluator::new(interp).with_fallback(&fb);
    let names: Vec<&str> = seq.vars.iter().map(|v| v.name.as_str()).collect();
    let hyps = seq.hypothesis();
    let mut levels: Vec<Vec<&Expr>> = vec![Vec::new(); names.len() + 1];
    for c in hyps.conjuncts() {
        let level = reads(c).iter().filter_map(|n| names.iter().position(|m| m == n)).max().map_or(0, |i| i + 1);
        levels[level].push(c);
    }
    let mut search = Naive { seq, space, interp, ev, fb: &fb, levels, names, visited: 0 };
    let mut binding = Vec::new();
    search.go(0, &mut binding)
}

/// Variable names read by `e`, primed ones with their quote.
fn reads(e: &Expr) -> Vec<String> {
    let f = e.free_names();
    let mut out = f.plain;
    out.extend(f.primed.into_iter().map(|p| format!("{p}'")));
    out
}

struct Naive<'a> {
    seq: &'a Sequent,
    space: &'a Space,
    interp: &'a Interpretation,
    ev: Evaluator<'a>,
    fb: &'a BTreeMap<String, Vec<Value>>,
    levels: Vec<Vec<&'a Expr>>,
    names: Vec<&'a str>,
    visited: u64,
}

impl Naive<'_> {
    fn go(&mut self, k: usize, binding: &mut Vec<(Name, Value)>) -> Result<Option<Witness>, EvalError> {
        for c in &self.levels[k] {
            if !self.ev.holds_with(c, binding)? {
                return Ok(None);
            }
        }
        let Some(var) = self.seq.vars.get(k) else {
            self.visited += 1;
            if self.visited > self.interp.state_cap {
                return Err(EvalError::StateSpaceExceeded { needed: self.visited as u128, cap: self.interp.state_cap });
            }
            if self.ev.holds_with(&self.seq.goal, binding)? {
                return Ok(None);
            }
            return Ok(Some(binding.iter().map(|(n, v)| (n.to_string(), v.clone())).collect()));
        };
        let cands = self.candidates(k, binding)?;
        for v in cands {
            binding.push((Name::from(var.name.as_str()), v));
            let r = self.go(k + 1, binding)?;
            binding.pop();
            if r.is_some() {
                return Ok(r);
            }
        }
        Ok(None)
    }

    fn candidates(&self, k: usize, binding: &[(Name, Value)]) -> Result<Vec<Value>, EvalError> {
        let var = &self.seq.vars[k];
        if var.role == Role::Pre {
            return Ok(self.space.values(&var.base).map(|v| v.to_vec()).unwrap_or_else(|| self.ints()));
        }
        let bound: Vec<&str> = self.names[..k].to_vec();
        for h in &self.seq.hyps {
            for c in h.pred.conjuncts() {
                if let Some(vals) = self.defined(c, &var.name, &bound, binding)? {
                    return Ok(vals.into_iter().collect());
                }
            }
        }
        Ok(self.fb.get(&var.base).cloned().unwrap_or_else(|| self.ints()))
    }

    /// Values `c` allows for `name` when it pins it down by `=` or `:`
    /// from bound names, taking the union over disjunctions.
    fn defined(
        &self,
        c: &Expr,
        name: &str,
        bound: &[&str],
        binding: &[(Name, Value)],
    ) -> Result<Option<BTreeSet<Value>>, EvalError> {
        use crate::ast::BinOp;
        match c {
            Expr::Bin(BinOp::And, ..) => {
                for d in c.conjuncts() {
                    if let Some(vals) = self.defined(d, name, bound, binding)? {
                        return Ok(Some(vals));
                    }
                }
                Ok(None)
            }
            Expr::Bin(BinOp::Or, a, b) => {
                let (Some(mut x), Some(y)) =
                    (self.defined(a, name, bound, binding)?, self.defined(b, name, bound, binding)?)
                else {
                    return Ok(None);
                };
                x.extend(y);
                Ok(Some(x))
            }
            Expr::Bin(op @ (BinOp::Eq | BinOp::In), lhs, rhs) => {
                let named = match &**lhs {
                    Expr::Primed(n) => format!("{n}'") == name,
                    Expr::Var(n) => *n == name,
                    _ => false,
                };
                if !named || !reads(rhs).iter().all(|n| bound.contains(&n.as_str()) || !self.names.contains(&n.as_str())) {
                    return Ok(None);
                }
                let val = match self.ev.eval_with(rhs, binding) {
                    Ok(v) => v,
                    Err(_) => return Ok(None),
                };
                Ok(Some(match (op, val) {
                    (BinOp::Eq, v) => BTreeSet::from([v]),
                    (_, Value::Set(s)) => s.iter().cloned().collect(),
                    (_, v) => return Err(EvalError::Type(format!("{v} is not a set"))),
                }))
            }
            _ => Ok(None),
        }
    }

    fn ints(&self) -> Vec<Value> {
        self.interp.int_range().map(Value::Int).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DischargeError {
    #[error(transparent)]
    Po(#[from] PoError),
    #[error("bad PO pattern: {0}")]
    Pattern(#[from] globset::Error),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub discharged: usize,
    pub violated: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub model: String,
    pub results: Vec<CheckResult>,
}

impl Report {
    pub fn summary(&self) -> Summary {
        let mut s = Summary { total: self.results.len(), ..Summary::default() };
        for r in &self.results {
            match r.verdict {
                Verdict::Discharged => s.discharged += 1,
                Verdict::Violated(_) => s.violated += 1,
                Verdict::Skipped(_) => s.skipped += 1,
            }
        }
        s
    }

    /// 0 all discharged, 1 some violated, 3 some skipped and none violated.
    pub fn exit_code(&self) -> i32 {
        let s = self.summary();
        if s.violated > 0 {
            1
        } else if s.skipped > 0 {
            3
        } else {
            0
        }
    }

    /// The JSON report; `ms` is zero unless `timings` is set.
    pub fn to_json(&self, timings: bool) -> String {
        let pos: Vec<JsonPo<'_>> = self
            .results
            .iter()
            .map(|r| JsonPo {
                id: &r.id,
                family: r.family.as_str(),
                verdict: r.verdict.name(),
                witness: match &r.verdict {
                    Verdict::Violated(w) if !w.is_empty() => Some(JsonWitness(w)),
                    _ => None,
                },
                ms: if timings { r.ms } else { 0 },
            })
            .collect();
        let doc = JsonReport { model: &self.model, pos, summary: self.summary() };
        let mut text = serde_json::to_string_pretty(&doc).expect("report serialises");
        text.push('\n');
        text
    }

    pub fn table(&self) -> String {
        let width = self.results.iter().map(|r| r.id.len()).max().unwrap_or(2).max(2);
        let mut out = format!("{:<width$}  {:<14}  verdict\n", "id", "family");
        for r in &self.results {
            let extra = match &r.verdict {
                Verdict::Discharged => String::new(),
                Verdict::Violated(w) => {
                    let b: Vec<String> = w.iter().map(|(n, v)| format!("{n}={v}")).collect();
                    format!("  [{}]", b.join(", "))
                }
                Verdict::Skipped(reason) => format!("  ({reason})"),
            };
            out.push_str(&format!("{:<width$}  {:<14}  {}{}\n", r.id, r.family.as_str(), r.verdict.name(), extra));
        }
        let s = self.summary();
        out.push_str(&format!(
            "total: {}, discharged: {}, violated: {}, skipped: {}\n",
            s.total, s.discharged, s.violated, s.skipped
        ));
        out
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    model: &'a str,
    pos: Vec<JsonPo<'a>>,
    summary: Summary,
}

#[derive(Serialize)]
struct JsonPo<'a> {
    id: &'a str,
    family: &'a str,
    verdict: &'a str,
    witness: Option<JsonWitness<'a>>,
    ms: u64,
}

struct JsonWitness<'a>(&'a Witness);

impl Serialize for JsonWitness<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(self.0.len()))?;
        for (n, v) in self.0 {
            m.serialize_entry(n, &v.to_string())?;
        }
        m.end()
    }
}

#[derive(Clone, Debug, Default)]
pub struct CheckOptions {
    pub gen: GenOptions,
    /// Glob over PO ids; `None` keeps all.
    pub filter: Option<String>,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
}

/// Obligations selected by the filter pattern.
pub fn select(
    model: &SlpModel,
    interp: &Interpretation,
    opts: &CheckOptions,
) -> Result<Vec<ProofObligation>, DischargeError> {
    let pos = generate(model, interp, &opts.gen)?;
    Ok(match &opts.filter {
        Some(p) => {
            let m = globset::Glob::new(p)?.compile_matcher();
            pos.into_iter().filter(|po| m.is_match(&po.id)).collect()
        }
        None => pos,
    })
}

/// Generate, filter and check; results are sorted by id whatever the
/// number of workers.
pub fn check_all(model: &SlpModel, interp: &Interpretation, opts: &CheckOptions) -> Result<Report, DischargeError> {
    let pos = select(model, interp, opts)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.workers).build()?;
    let mut results: Vec<CheckResult> = pool.install(|| pos.par_iter().map(|po| check(po, interp)).collect());
    results.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Report { model: model.name.clone(), results })
}

/// Re-evaluate a witness against the sequent: true when the hypotheses
/// hold and the goal fails.
pub fn refutes(po: &ProofObligation, w: &Witness, interp: &Interpretation) -> Result<bool, SemError> {
    let fb = fallback_domains(&po.scope.space, interp);
    let ev = Evaluator::new(interp).with_fallback(&fb);
    let b: Vec<(Name, Value)> = w.iter().map(|(n, v)| (Name::from(n.as_str()), v.clone())).collect();
    Ok(ev.holds_with(&po.sequent.hypothesis(), &b)? && !ev.holds_with(&po.sequent.goal, &b)?)
}
