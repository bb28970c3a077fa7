//! Bounded trace refinement between a process and the machine it refines.

use crate::ast::{Event, EventBMachine, Expr, InvariantKind, Label, ProcessDef, SlpModel, Stmt, StmtKind};
use crate::discharge::{check, Verdict};
use crate::kernel::{Evaluator, Interpretation, Name, Space, State, Value};
use crate::po::{generate, Family, GenOptions, PoError};
use crate::relsem::{effective_guard, SemError, Semantics, Scoped, Terminal};
use crate::scope::ScopeContext;
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// One process step: the labels of the parts it executes.
pub type Element = Vec<String>;
pub type Trace = Vec<String>;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error(transparent)]
    Sem(#[from] SemError),
    #[error(transparent)]
    Po(#[from] PoError),
    #[error("unlabeled-substitution: {0}")]
    UnlabeledSubstitution(String),
    #[error("no MACHINE section")]
    NoMachine,
    #[error("no process `{0}`")]
    UnknownProcess(String),
    #[error("no REFMAP for process `{0}`")]
    NoRefMap(String),
    #[error("label `{0}` has no image under the REFMAP")]
    Unmapped(String),
    #[error("REFMAP names unknown event `{0}`")]
    UnknownEvent(String),
}

pub type TraceResult<T> = Result<T, TraceError>;

/// Process trace, its mapped machine trace and the initial state.
type Counter = (Vec<Element>, Trace, State);

/// How a parallel step is matched against machine events.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ParallelMode {
    /// Part labels as consecutive events in written order.
    #[default]
    Serial,
    /// Part labels as consecutive events in any order.
    Atomic,
}

/// Machine side: variables, invariant space and events.
pub struct MachineRun<'a> {
    pub machine: &'a EventBMachine,
    pub space: Space,
    sem: Semantics<'a>,
}

impl<'a> MachineRun<'a> {
    pub fn new(model: &'a SlpModel, interp: &'a Interpretation) -> TraceResult<MachineRun<'a>> {
        let machine = model.machine.as_ref().ok_or(TraceError::NoMachine)?;
        let vars: Vec<String> = machine.variables.iter().map(|v| v.name.clone()).collect();
        let mut parts: Vec<Expr> = machine
            .invariants
            .iter()
            .filter(|i| i.kind == InvariantKind::Invariant)
            .map(|i| i.predicate.clone())
            .collect();
        for i in model.invariants.iter().filter(|i| i.kind == InvariantKind::Invariant) {
            for c in i.predicate.conjuncts() {
                if c.free_names().plain.iter().all(|n| vars.contains(n)) {
                    parts.push(c.clone());
                }
            }
        }
        let space = Space::uncapped(&vars, &Expr::conjoin(parts), interp).map_err(SemError::from)?;
        Ok(MachineRun { machine, space, sem: Semantics::new(interp) })
    }

    pub fn vars(&self) -> Vec<String> {
        self.space.vars.iter().map(|(n, _, _)| n.to_string()).collect()
    }

    /// Initial states: variables the initialisation leaves alone take
    /// `shared`'s value when given, else range over their domain.
    pub fn starts(&self, shared: Option<&State>) -> TraceResult<Vec<State>> {
        let assigned = self.machine.initialisation.as_ref().map(|i| i.targets()).unwrap_or_default();
        let mut seeds = vec![State::new()];
        for (n, _, vals) in &self.space.vars {
            let choices: Vec<Value> = match shared.and_then(|s| s.get(n)) {
                Some(v) if !assigned.iter().any(|a| **a == **n) => vec![v.clone()],
                _ if assigned.iter().any(|a| **a == **n) => vals.first().cloned().into_iter().collect(),
                _ => vals.clone(),
            };
            let mut next = Vec::new();
            for s in &seeds {
                for v in &choices {
                    next.push(s.clone().with(n, v.clone()));
                }
            }
            seeds = next;
        }
        let Some(init) = &self.machine.initialisation else { return Ok(seeds) };
        let ev = Event { label: Label::new("INITIALISATION"), guard: Expr::Bool(true), action: init.clone(), span: Default::default() };
        let mut out = BTreeSet::new();
        for s in &seeds {
            out.extend(self.sem.event_image(&ev, Some(&self.space), s)?);
        }
        Ok(out.into_iter().collect())
    }

    fn event(&self, label: &str) -> TraceResult<&'a Event> {
        self.machine.event(label).ok_or_else(|| TraceError::UnknownEvent(label.to_string()))
    }

    pub fn step(&self, event: &Event, s: &State) -> TraceResult<Vec<State>> {
        Ok(self.sem.event_image(event, Some(&self.space), s)?)
    }

    /// States reachable through at most `budget` events outside `visible`,
    /// each paired with the budget left.
    fn hidden_closure(
        &self,
        frontier: BTreeMap<State, usize>,
        visible: &BTreeSet<String>,
    ) -> TraceResult<BTreeMap<State, usize>> {
        let mut best = frontier.clone();
        let mut work: Vec<(State, usize)> = frontier.into_iter().collect();
        while let Some((s, left)) = work.pop() {
            if left == 0 {
                continue;
            }
            for e in self.machine.events.iter().filter(|e| !visible.contains(&e.label.text)) {
                for t in self.step(e, &s)? {
                    if best.get(&t).is_none_or(|b| *b < left - 1) {
                        best.insert(t.clone(), left - 1);
                        work.push((t, left - 1));
                    }
                }
            }
        }
        Ok(best)
    }

    /// Length of the longest prefix of `trace` the machine can produce from
    /// `starts` using at most `budget` events in total.
    pub fn accepted_prefix(
        &self,
        starts: &[State],
        trace: &[Vec<String>],
        visible: &BTreeSet<String>,
        budget: usize,
        mode: ParallelMode,
    ) -> TraceResult<usize> {
        let mut frontier: BTreeMap<State, usize> = starts.iter().map(|s| (s.clone(), budget)).collect();
        for (k, element) in trace.iter().enumerate() {
            frontier = self.hidden_closure(frontier, visible)?;
            let orders: Vec<Vec<&String>> = match mode {
                ParallelMode::Serial => vec![element.iter().collect()],
                ParallelMode::Atomic => permutations(element),
            };
            let mut next: BTreeMap<State, usize> = BTreeMap::new();
            for order in &orders {
                let mut cur = frontier.clone();
                for (i, label) in order.iter().enumerate() {
                    if i > 0 {
                        cur = self.hidden_closure(cur, visible)?;
                    }
                    let ev = self.event(label)?;
                    let mut moved = BTreeMap::new();
                    for (s, left) in &cur {
                        if *left == 0 {
                            continue;
                        }
                        for t in self.step(ev, s)? {
                            let e = moved.entry(t).or_insert(0);
                            *e = (*e).max(left - 1);
                        }
                    }
                    cur = moved;
                }
                for (s, left) in cur {
                    let e = next.entry(s).or_insert(0);
                    *e = (*e).max(left);
                }
            }
            if next.is_empty() {
                return Ok(k);
            }
            frontier = next;
        }
        Ok(trace.len())
    }

    /// Machine traces from `starts` of at most `depth` events, keeping only
    /// the labels in `visible`.
    pub fn traces_from(&self, starts: &[State], visible: &BTreeSet<String>, depth: usize) -> TraceResult<BTreeSet<Trace>> {
        let mut out = BTreeSet::from([Vec::new()]);
        let mut level: BTreeSet<(State, Trace)> = starts.iter().map(|s| (s.clone(), Vec::new())).collect();
        for _ in 0..depth {
            let mut next = BTreeSet::new();
            for (s, tr) in &level {
                for e in &self.machine.events {
                    for t in self.step(e, s)? {
                        let mut tr = tr.clone();
                        if visible.contains(&e.label.text) {
                            tr.push(e.label.text.clone());
                        }
                        out.insert(tr.clone());
                        next.insert((t, tr));
                    }
                }
            }
            level = next;
        }
        Ok(out)
    }
}

fn permutations(items: &[String]) -> Vec<Vec<&String>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..items.len()).collect();
    permute(&mut idx, 0, &mut |p| out.push(p.iter().map(|&i| &items[i]).collect()));
    out
}

fn permute(idx: &mut Vec<usize>, k: usize, emit: &mut dyn FnMut(&[usize])) {
    if k + 1 >= idx.len() {
        emit(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, emit);
        idx.swap(k, i);
    }
}

/// Machine traces restricted to `events`, from every initial state.
pub fn machine_traces(
    model: &SlpModel,
    events: &BTreeSet<String>,
    depth: usize,
    interp: &Interpretation,
) -> TraceResult<BTreeSet<Trace>> {
    let m = MachineRun::new(model, interp)?;
    let starts = m.starts(None)?;
    m.traces_from(&starts, events, depth)
}

/// Labels of a substitution statement as one trace element.
pub fn step_labels(stmt: &Stmt) -> TraceResult<Element> {
    let StmtKind::Subst(sub) = &stmt.kind else { return Ok(Vec::new()) };
    let parts = sub.parts();
    let own: Vec<Option<&Label>> = parts.iter().map(|(l, _)| *l).collect();
    if parts.len() > 1 && own.iter().all(Option::is_some) {
        return Ok(own.into_iter().flatten().map(|l| l.text.clone()).collect());
    }
    if let Some(l) = &stmt.label {
        return Ok(vec![l.text.clone()]);
    }
    match own.as_slice() {
        [Some(l)] => Ok(vec![l.text.clone()]),
        _ => Err(TraceError::UnlabeledSubstitution(crate::render::render_substitution(sub))),
    }
}

/// Operational runs of a process body, recording trace elements.
pub struct ProcessRun<'a> {
    pub process: &'a ProcessDef,
    pub scope: Scoped,
    sem: Semantics<'a>,
    interp: &'a Interpretation,
    model: &'a SlpModel,
}

const SILENT_LOOP_LIMIT: usize = 100_000;

impl<'a> ProcessRun<'a> {
    pub fn new(model: &'a SlpModel, process: &str, interp: &'a Interpretation) -> TraceResult<ProcessRun<'a>> {
        let p = model.process(process).ok_or_else(|| TraceError::UnknownProcess(process.to_string()))?;
        let scope = Scoped::new(ScopeContext::process(model, p), interp)?;
        Ok(ProcessRun { process: p, scope, sem: Semantics::new(interp), interp, model })
    }

    /// Σ states with the model initialisation applied.
    pub fn starts(&self) -> TraceResult<Vec<State>> {
        let states = self.scope.states(self.interp)?;
        let Some(init) = &self.model.initialisation else { return Ok(states) };
        let ev = Event { label: Label::new("INITIALISATION"), guard: Expr::Bool(true), action: init.clone(), span: Default::default() };
        let mut out = BTreeSet::new();
        for s in &states {
            out.extend(self.sem.event_image(&ev, Some(&self.scope.space), s)?);
        }
        Ok(out.into_iter().collect())
    }

    /// Traces of at most `depth` elements from `s`; prefix-closed.
    pub fn traces_from(&self, s: &State, depth: usize) -> TraceResult<BTreeSet<Vec<Element>>> {
        let mut seen = BTreeSet::from([Vec::new()]);
        if let Some(body) = &self.process.body {
            check_labels(body)?;
            self.run(body, &self.scope, s.clone(), Vec::new(), depth, &mut seen)?;
        }
        Ok(seen)
    }

    fn run(
        &self,
        stmt: &Stmt,
        sc: &Scoped,
        s: State,
        trace: Vec<Element>,
        depth: usize,
        seen: &mut BTreeSet<Vec<Element>>,
    ) -> TraceResult<Vec<(State, Vec<Element>)>> {
        match &stmt.kind {
            StmtKind::Stop => Ok(Vec::new()),
            StmtKind::Assert(cs) => {
                let ev = Evaluator::on(self.interp, &s);
                for c in cs {
                    if !ev.holds(&c.predicate).map_err(SemError::from)? {
                        return Ok(Vec::new());
                    }
                }
                Ok(vec![(s, trace)])
            }
            StmtKind::Subst(_) => {
                if trace.len() >= depth {
                    return Ok(Vec::new());
                }
                let element = step_labels(stmt)?;
                let mut out = Vec::new();
                for t in self.sem.raw_image(stmt, sc, &s)? {
                    let mut tr = trace.clone();
                    tr.push(element.clone());
                    seen.insert(tr.clone());
                    if let Terminal::State(t) = t {
                        out.push((t, tr));
                    }
                }
                Ok(out)
            }
            StmtKind::Seq(..) => {
                let mut frontier = vec![(s, trace)];
                for item in stmt.flatten_seq() {
                    let mut next = Vec::new();
                    for (st, tr) in frontier {
                        next.extend(self.run(item, sc, st, tr, depth, seen)?);
                    }
                    frontier = next;
                }
                Ok(frontier)
            }
            StmtKind::If { branches, else_body } => {
                let ev = Evaluator::on(self.interp, &s);
                for k in 0..branches.len() {
                    if ev.holds(&effective_guard(branches, k)).map_err(SemError::from)? {
                        return self.run(&branches[k].1, sc, s, trace, depth, seen);
                    }
                }
                match else_body {
                    Some(e) => self.run(e, sc, s, trace, depth, seen),
                    None => Ok(vec![(s, trace)]),
                }
            }
            StmtKind::While { cond, body, .. } => {
                let inner = sc.enter(stmt, self.interp)?;
                let mut out = Vec::new();
                let mut frontier = vec![(s, trace)];
                let mut rounds = 0;
                while !frontier.is_empty() {
                    rounds += 1;
                    if rounds > SILENT_LOOP_LIMIT {
                        return Err(SemError::FuelExhausted.into());
                    }
                    let mut next = Vec::new();
                    for (st, tr) in frontier {
                        if !Evaluator::on(self.interp, &st).holds(cond).map_err(SemError::from)? {
                            out.push((st, tr));
                            continue;
                        }
                        next.extend(self.run(body, &inner, st, tr, depth, seen)?);
                    }
                    next.sort();
                    next.dedup();
                    frontier = next;
                }
                Ok(out)
            }
            StmtKind::Begin { body, .. } => {
                let inner = sc.enter(stmt, self.interp)?;
                let outer: Vec<Name> = s.names().map(Name::from).collect();
                let mut out = Vec::new();
                for entry in self.sem.block_entries(stmt, &inner, &s)? {
                    for (t, tr) in self.run(body, &inner, entry, trace.clone(), depth, seen)? {
                        out.push((t.project(&outer), tr));
                    }
                }
                Ok(out)
            }
        }
    }
}

fn check_labels(stmt: &Stmt) -> TraceResult<()> {
    match &stmt.kind {
        StmtKind::Subst(_) => step_labels(stmt).map(|_| ()),
        StmtKind::Seq(a, b) => {
            check_labels(a)?;
            check_labels(b)
        }
        StmtKind::If { branches, else_body } => {
            for (_, b) in branches {
                check_labels(b)?;
            }
            else_body.as_deref().map_or(Ok(()), check_labels)
        }
        StmtKind::While { body, .. } | StmtKind::Begin { body, .. } => check_labels(body),
        StmtKind::Assert(_) | StmtKind::Stop => Ok(()),
    }
}

/// All traces of a process up to `depth` elements, over every start state.
pub fn process_traces(
    model: &SlpModel,
    process: &str,
    depth: usize,
    interp: &Interpretation,
) -> TraceResult<BTreeSet<Vec<Element>>> {
    let run = ProcessRun::new(model, process, interp)?;
    let mut out = BTreeSet::new();
    for s in run.starts()? {
        out.extend(run.traces_from(&s, depth)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Inclusion {
    Discharged,
    Violated {
        /// Process start state the counter-trace runs from.
        initial: State,
        process_trace: Vec<Element>,
        /// The offending trace after mapping through the REFMAP.
        mapped: Trace,
    },
}

impl fmt::Display for Inclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Inclusion::Discharged => f.write_str("discharged"),
            Inclusion::Violated { initial, mapped, .. } => {
                write!(f, "violated: <{}> from {initial}", mapped.join(", "))
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TraceOptions {
    pub depth: usize,
    pub mode: ParallelMode,
    pub workers: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { depth: 18, mode: ParallelMode::Serial, workers: 0 }
    }
}

fn map_element(element: &Element, f: &BTreeMap<&str, &str>) -> TraceResult<Vec<String>> {
    element
        .iter()
        .map(|l| f.get(l.as_str()).map(|e| e.to_string()).ok_or_else(|| TraceError::Unmapped(l.clone())))
        .collect()
}

/// Check that every mapped process trace is a machine trace restricted to
/// the mapped events; returns the shortest violation.
pub fn check_inclusion(
    model: &SlpModel,
    process: &str,
    interp: &Interpretation,
    opts: &TraceOptions,
) -> TraceResult<Inclusion> {
    let refmap = model.refmap(process).ok_or_else(|| TraceError::NoRefMap(process.to_string()))?;
    let f: BTreeMap<&str, &str> = refmap.pairs.iter().map(|(a, b)| (a.text.as_str(), b.text.as_str())).collect();
    let visible: BTreeSet<String> = f.values().map(|e| e.to_string()).collect();
    let machine = MachineRun::new(model, interp)?;
    for e in &visible {
        machine.event(e)?;
    }
    let run = ProcessRun::new(model, process, interp)?;
    let starts = run.starts()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .expect("thread pool");
    let per_start: Vec<TraceResult<Option<Counter>>> = pool.install(|| {
        starts
            .par_iter()
            .map(|s| {
                let mstarts = machine.starts(Some(s))?;
                let mut worst: Option<(Vec<Element>, Trace)> = None;
                for tr in run.traces_from(s, opts.depth)? {
                    let mapped: Vec<Vec<String>> = tr.iter().map(|e| map_element(e, &f)).collect::<TraceResult<_>>()?;
                    let extra: usize = mapped.iter().map(|e| e.len().saturating_sub(1)).sum();
                    let k = machine.accepted_prefix(&mstarts, &mapped, &visible, opts.depth + extra, opts.mode)?;
                    if k < tr.len() {
                        let ptr = tr[..=k].to_vec();
                        let flat: Trace = mapped[..=k].iter().flatten().cloned().collect();
                        if worst.as_ref().is_none_or(|(_, w)| (flat.len(), &flat) < (w.len(), w)) {
                            worst = Some((ptr, flat));
                        }
                    }
                }
                Ok(worst.map(|(p, m)| (p, m, s.clone())))
            })
            .collect()
    });
    let mut best: Option<Counter> = None;
    for r in per_start {
        if let Some((p, m, s)) = r? {
            if best.as_ref().is_none_or(|(_, bm, _)| m.len() < bm.len()) {
                best = Some((p, m, s));
            }
        }
    }
    Ok(match best {
        None => Inclusion::Discharged,
        Some((process_trace, mapped, initial)) => Inclusion::Violated { initial, process_trace, mapped },
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Divergence {
    Discharged,
    Violated(String),
    Skipped(String),
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Divergence::Discharged => f.write_str("discharged"),
            Divergence::Violated(r) => write!(f, "violated: {r}"),
            Divergence::Skipped(r) => write!(f, "skipped: {r}"),
        }
    }
}

/// No new divergence: every loop of the process has its variant
/// obligation discharged. WHILE is the only cycle construct.
pub fn check_divergence(model: &SlpModel, process: &str, interp: &Interpretation) -> TraceResult<Divergence> {
    if model.process(process).is_none() {
        return Err(TraceError::UnknownProcess(process.to_string()));
    }
    let prefix = format!("{process}.");
    let pos = generate(model, interp, &GenOptions::default())?;
    for po in pos.iter().filter(|p| p.family == Family::Var && p.id.starts_with(&prefix)) {
        match check(po, interp).verdict {
            Verdict::Discharged => {}
            Verdict::Violated(w) => {
                let b: Vec<String> = w.iter().map(|(n, v)| format!("{n}={v}")).collect();
                return Ok(Divergence::Violated(format!("{} [{}]", po.id, b.join(", "))));
            }
            Verdict::Skipped(r) => return Ok(Divergence::Skipped(format!("{}: {r}", po.id))),
        }
    }
    Ok(Divergence::Discharged)
}

/// Substitution labels in the body, in textual order.
pub fn body_labels(stmt: &Stmt) -> Vec<String> {
    let mut out = Vec::new();
    collect_labels(stmt, &mut out);
    out
}

fn collect_labels(stmt: &Stmt, out: &mut Vec<String>) {
    match &stmt.kind {
        StmtKind::Subst(_) => out.extend(step_labels(stmt).unwrap_or_default()),
        StmtKind::Seq(a, b) => {
            collect_labels(a, out);
            collect_labels(b, out);
        }
        StmtKind::If { branches, else_body } => {
            branches.iter().for_each(|(_, b)| collect_labels(b, out));
            if let Some(e) = else_body {
                collect_labels(e, out);
            }
        }
        StmtKind::While { body, .. } | StmtKind::Begin { body, .. } => collect_labels(body, out),
        _ => {}
    }
}
