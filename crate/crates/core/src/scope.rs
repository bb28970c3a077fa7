//! Statement positions and the layered name spaces they live in.

use crate::ast::{Expr, InvariantDef, InvariantKind, ProcessDef, SlpModel, Stmt, StmtKind};
use std::fmt;

/// One step from a statement to a sub-statement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Step {
    /// Element of a (flattened) sequence.
    Item(usize),
    /// Body of the n-th IF/ELSIF branch.
    Branch(usize),
    Else,
    /// Body of a WHILE or BEGIN.
    Body,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StmtPath(pub Vec<Step>);

impl StmtPath {
    pub fn root() -> StmtPath {
        StmtPath(Vec::new())
    }

    pub fn child(&self, step: Step) -> StmtPath {
        let mut v = self.0.clone();
        v.push(step);
        StmtPath(v)
    }
}

impl fmt::Display for StmtPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("body");
        }
        f.write_str("body")?;
        for s in &self.0 {
            f.write_str("_")?;
            match s {
                Step::Item(n) => write!(f, "s{n}")?,
                Step::Branch(n) => write!(f, "b{n}")?,
                Step::Else => f.write_str("else")?,
                Step::Body => f.write_str("do")?,
            }
        }
        Ok(())
    }
}

/// A statement position: the process and the path inside its body.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StmtPos {
    pub process: String,
    pub path: StmtPath,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ScopeError {
    #[error("no-such-position: {0}")]
    NoSuchPosition(String),
}

/// Ordered variable layers with the invariant accumulated down the tree.
#[derive(Clone, Debug, PartialEq)]
pub struct ScopeContext {
    pub process: Option<String>,
    pub layers: Vec<Vec<String>>,
    pub layer_invariants: Vec<Expr>,
}

pub(crate) fn invariant_conj(defs: &[InvariantDef]) -> Expr {
    Expr::conjoin(
        defs.iter()
            .filter(|d| d.kind == InvariantKind::Invariant)
            .map(|d| d.predicate.clone()),
    )
}

impl ScopeContext {
    /// Top level: globals under axioms and model invariants.
    pub fn model(model: &SlpModel) -> ScopeContext {
        let p = Expr::conjoin(model.context.axioms.iter().map(|a| a.predicate.clone()));
        ScopeContext {
            process: None,
            layers: vec![model.global_names()],
            layer_invariants: vec![Expr::and(p, invariant_conj(&model.invariants))],
        }
    }

    pub fn process(model: &SlpModel, process: &ProcessDef) -> ScopeContext {
        ScopeContext::model(model).push(
            process.locals.iter().map(|v| v.name.clone()).collect(),
            invariant_conj(&process.invariants),
        )
        .named(&process.label.text)
    }

    fn named(mut self, process: &str) -> ScopeContext {
        self.process = Some(process.to_string());
        self
    }

    pub fn push(&self, vars: Vec<String>, invariant: Expr) -> ScopeContext {
        let mut s = self.clone();
        s.layers.push(vars);
        s.layer_invariants.push(invariant);
        s
    }

    pub fn invariant(&self) -> Expr {
        Expr::conjoin(self.layer_invariants.iter().cloned())
    }

    pub fn vars(&self) -> Vec<String> {
        self.layers.iter().flatten().cloned().collect()
    }

    pub fn globals(&self) -> &[String] {
        &self.layers[0]
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.layers.iter().flatten().any(|v| v == name)
    }

    /// Variables declared by layers beyond `depth`.
    pub fn vars_from(&self, depth: usize) -> Vec<String> {
        self.layers[depth.min(self.layers.len())..].iter().flatten().cloned().collect()
    }
}

/// Scope at a statement position.
pub fn scope_chain(model: &SlpModel, pos: &StmtPos) -> Result<ScopeContext, ScopeError> {
    let missing = || ScopeError::NoSuchPosition(format!("{}.{}", pos.process, pos.path));
    let process = model.process(&pos.process).ok_or_else(missing)?;
    let body = process.body.as_ref().ok_or_else(missing)?;
    let mut scope = ScopeContext::process(model, process);
    let mut cur = body;
    for step in &pos.path.0 {
        let (next, entered) = descend(cur, *step).ok_or_else(missing)?;
        if let Some((vars, inv)) = entered {
            scope = scope.push(vars, inv);
        }
        cur = next;
    }
    Ok(scope)
}

type Entered = Option<(Vec<String>, Expr)>;

/// One step down; reports a new block layer when the step enters one.
pub fn descend(stmt: &Stmt, step: Step) -> Option<(&Stmt, Entered)> {
    match (&stmt.kind, step) {
        (StmtKind::Seq(..), Step::Item(i)) => stmt.flatten_seq().get(i).map(|s| (*s, None)),
        (_, Step::Item(0)) => Some((stmt, None)),
        (StmtKind::If { branches, .. }, Step::Branch(i)) => branches.get(i).map(|(_, b)| (b, None)),
        (StmtKind::If { else_body: Some(e), .. }, Step::Else) => Some((e, None)),
        (StmtKind::While { invariants, body, .. }, Step::Body) => {
            Some((body, Some((Vec::new(), invariant_conj(invariants)))))
        }
        (StmtKind::Begin { locals, invariants, body }, Step::Body) => Some((
            body,
            Some((locals.iter().map(|v| v.name.clone()).collect(), invariant_conj(invariants))),
        )),
        _ => None,
    }
}

/// Statement at a path inside a body.
pub fn resolve<'a>(body: &'a Stmt, path: &StmtPath) -> Option<&'a Stmt> {
    let mut cur = body;
    for step in &path.0 {
        cur = descend(cur, *step)?.0;
    }
    Some(cur)
}

/// Every non-sequence statement in a body with its path, in pre-order.
pub fn positions(body: &Stmt) -> Vec<(StmtPath, &Stmt)> {
    let mut out = Vec::new();
    walk(body, &StmtPath::root(), &mut out);
    out
}

fn walk<'a>(stmt: &'a Stmt, path: &StmtPath, out: &mut Vec<(StmtPath, &'a Stmt)>) {
    if let StmtKind::Seq(..) = stmt.kind {
        for (i, s) in stmt.flatten_seq().into_iter().enumerate() {
            walk_single(s, &path.child(Step::Item(i)), out);
        }
    } else {
        walk_single(stmt, path, out);
    }
}

fn walk_single<'a>(stmt: &'a Stmt, path: &StmtPath, out: &mut Vec<(StmtPath, &'a Stmt)>) {
    out.push((path.clone(), stmt));
    match &stmt.kind {
        StmtKind::If { branches, else_body } => {
            for (i, (_, b)) in branches.iter().enumerate() {
                walk(b, &path.child(Step::Branch(i)), out);
            }
            if let Some(e) = else_body {
                walk(e, &path.child(Step::Else), out);
            }
        }
        StmtKind::While { body, .. } | StmtKind::Begin { body, .. } => {
            walk(body, &path.child(Step::Body), out)
        }
        _ => {}
    }
}

/// Path of the statement carrying `label` (statement labels and labels of
/// parallel parts both count).
pub fn find_label(body: &Stmt, label: &str) -> Option<StmtPath> {
    positions(body).into_iter().find_map(|(p, s)| {
        let own = s.label.as_ref().is_some_and(|l| l.text == label);
        let part = match &s.kind {
            StmtKind::Subst(sub) => sub.parts().iter().any(|(l, _)| l.is_some_and(|l| l.text == label)),
            _ => false,
        };
        (own || part).then_some(p)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_model;

    const GCD: &str = "MODEL m
        VARIABLES r x1 x2 y1 y2
        INVARIANTS t1: r : NAT
        PROCESS main
          BODY y1 := x1;
            WHILE y1 /= y2 INVARIANT li: y1 > 0 VARIANT y1 + y2
            THEN IF y1 > y2 THEN s1: y1 := y1 - y2 ELSE s2: y2 := y2 - y1 END END;
            fin: r := y1
        END";

    #[test]
    fn top_level_layer() {
        let m = parse_model(GCD).unwrap();
        let pos = StmtPos { process: "main".into(), path: find_label(m.processes[0].body.as_ref().unwrap(), "fin").unwrap() };
        let s = scope_chain(&m, &pos).unwrap();
        assert_eq!(s.layers[0], vec!["r", "x1", "x2", "y1", "y2"]);
        assert!(s.layers[1].is_empty());
        assert_eq!(s.invariant().conjuncts().len(), 1);
    }

    #[test]
    fn while_body_adds_loop_invariant() {
        let m = parse_model(GCD).unwrap();
        let body = m.processes[0].body.as_ref().unwrap();
        let p = find_label(body, "s1").unwrap();
        assert_eq!(p, StmtPath(vec![Step::Item(1), Step::Body, Step::Branch(0)]));
        let s = scope_chain(&m, &StmtPos { process: "main".into(), path: p }).unwrap();
        let all = s.invariant();
        assert_eq!(all.conjuncts().len(), 2);
        let outer = ScopeContext::process(&m, &m.processes[0]).invariant();
        for c in outer.conjuncts() {
            assert!(all.conjuncts().contains(&c));
        }
    }

    #[test]
    fn bad_position() {
        let m = parse_model(GCD).unwrap();
        let pos = StmtPos { process: "main".into(), path: StmtPath(vec![Step::Item(9)]) };
        assert!(matches!(scope_chain(&m, &pos), Err(ScopeError::NoSuchPosition(_))));
        let pos = StmtPos { process: "nope".into(), path: StmtPath::root() };
        assert!(scope_chain(&m, &pos).is_err());
    }
}
