//! Syntax tree for SLP models: context, globals, environments, processes,
//! process bodies and the mathematical subset used in predicates.

use std::fmt;

/// Location of a syntax node in its source text.
///
/// Spans always compare equal, so that structural equality of trees
/// ignores layout (a rendered and re-parsed model equals the original).
#[derive(Clone, Copy, Debug, Default, Eq)]
pub struct SourceSpan {
    pub begin: usize,
    pub end: usize,
    pub begin_line: u32,
    pub begin_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl PartialEq for SourceSpan {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl std::hash::Hash for SourceSpan {
    fn hash<H: std::hash::Hasher>(&self, _state: &mut H) {}
}

impl SourceSpan {
    pub fn join(self, other: SourceSpan) -> SourceSpan {
        SourceSpan {
            begin: self.begin,
            end: other.end,
            begin_line: self.begin_line,
            begin_col: self.begin_col,
            end_line: other.end_line,
            end_col: other.end_col,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}-{}:{}",
            self.begin_line, self.begin_col, self.end_line, self.end_col
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Union,
    Inter,
    Diff,
    Interval,
    Maplet,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    In,
    NotIn,
    Subset,
    And,
    Or,
    Implies,
    Equiv,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "mod",
            BinOp::Union => "\\/",
            BinOp::Inter => "/\\",
            BinOp::Diff => "\\",
            BinOp::Interval => "..",
            BinOp::Maplet => "|->",
            BinOp::Eq => "=",
            BinOp::Neq => "/=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::In => ":",
            BinOp::NotIn => "/:",
            BinOp::Subset => "<:",
            BinOp::And => "&",
            BinOp::Or => "or",
            BinOp::Implies => "=>",
            BinOp::Equiv => "<=>",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Equiv => 1,
            BinOp::Implies => 2,
            BinOp::Or => 3,
            BinOp::And => 4,
            BinOp::Eq
            | BinOp::Neq
            | BinOp::Lt
            | BinOp::Le
            | BinOp::Gt
            | BinOp::Ge
            | BinOp::In
            | BinOp::NotIn
            | BinOp::Subset => 6,
            BinOp::Maplet => 7,
            BinOp::Union | BinOp::Inter | BinOp::Diff => 8,
            BinOp::Interval => 9,
            BinOp::Add | BinOp::Sub => 10,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 11,
        }
    }

    pub fn is_connective(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or | BinOp::Implies | BinOp::Equiv)
    }

    pub fn is_relational(self) -> bool {
        self.precedence() == 6
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantifier {
    ForAll,
    Exists,
}

/// Expressions and predicates share one tree; predicates are the
/// boolean-valued forms.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(String),
    Primed(String),
    IntSet,
    NatSet,
    Nat1Set,
    BoolSet,
    EmptySet,
    SetLit(Vec<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    BoolOf(Box<Expr>),
    Apply(Box<Expr>, Box<Expr>),
    Quant(Quantifier, Vec<String>, Box<Expr>),
    /// Parsed but outside the supported mathematical subset
    /// (`POW`, `card`, `dom`, `ran`, set comprehension).
    Unsupported(String, Vec<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn primed(name: &str) -> Expr {
        Expr::Primed(name.to_string())
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn eq(lhs: Expr, rhs: Expr) -> Expr {
        Expr::bin(BinOp::Eq, lhs, rhs)
    }

    pub fn member(lhs: Expr, rhs: Expr) -> Expr {
        Expr::bin(BinOp::In, lhs, rhs)
    }

    pub fn implies(lhs: Expr, rhs: Expr) -> Expr {
        Expr::bin(BinOp::Implies, lhs, rhs)
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Expr::Bool(true))
    }

    /// Conjunction that drops `TRUE` operands.
    pub fn and(lhs: Expr, rhs: Expr) -> Expr {
        match (lhs.is_true(), rhs.is_true()) {
            (true, _) => rhs,
            (_, true) => lhs,
            _ => Expr::bin(BinOp::And, lhs, rhs),
        }
    }

    pub fn or(lhs: Expr, rhs: Expr) -> Expr {
        match (&lhs, &rhs) {
            (Expr::Bool(false), _) => rhs,
            (_, Expr::Bool(false)) => lhs,
            _ => Expr::bin(BinOp::Or, lhs, rhs),
        }
    }

    pub fn conjoin<I: IntoIterator<Item = Expr>>(parts: I) -> Expr {
        parts.into_iter().fold(Expr::Bool(true), Expr::and)
    }

    pub fn disjoin<I: IntoIterator<Item = Expr>>(parts: I) -> Expr {
        parts.into_iter().fold(Expr::Bool(false), Expr::or)
    }

    pub fn exists(vars: Vec<String>, body: Expr) -> Expr {
        if vars.is_empty() {
            body
        } else {
            Expr::Quant(Quantifier::Exists, vars, Box::new(body))
        }
    }

    /// Top-level conjuncts, left to right.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
            match e {
                Expr::Bin(BinOp::And, l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                _ => out.push(e),
            }
        }
        walk(self, &mut out);
        out
    }

    /// Whether the node is a predicate form (as opposed to a value).
    pub fn is_predicate(&self) -> bool {
        match self {
            Expr::Bool(_) | Expr::Not(_) | Expr::Quant(..) => true,
            Expr::Bin(op, _, _) => op.is_connective() || op.is_relational(),
            _ => false,
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::SetLit(items) | Expr::Unsupported(_, items) => items.iter().collect(),
            Expr::Bin(_, l, r) | Expr::Apply(l, r) => vec![l, r],
            Expr::Not(e) | Expr::Neg(e) | Expr::BoolOf(e) | Expr::Quant(_, _, e) => vec![e],
            _ => Vec::new(),
        }
    }

    /// Free plain and primed identifiers (plain names first-seen order).
    pub fn free_names(&self) -> FreeNames {
        let mut out = FreeNames::default();
        let mut bound = Vec::new();
        self.collect_free(&mut bound, &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut FreeNames) {
        match self {
            Expr::Var(n) => {
                if !bound.contains(n) && !out.plain.contains(n) {
                    out.plain.push(n.clone());
                }
            }
            Expr::Primed(n) => {
                if !out.primed.contains(n) {
                    out.primed.push(n.clone());
                }
            }
            Expr::Quant(_, vars, body) => {
                let depth = bound.len();
                bound.extend(vars.iter().cloned());
                body.collect_free(bound, out);
                bound.truncate(depth);
            }
            Expr::Unsupported(name, args) if name == "comprehension" => {
                // first argument lists the bound variables as a set literal
                let depth = bound.len();
                if let Some(Expr::SetLit(vars)) = args.first() {
                    for v in vars {
                        if let Expr::Var(n) = v {
                            bound.push(n.clone());
                        }
                    }
                }
                for a in &args[1..] {
                    a.collect_free(bound, out);
                }
                bound.truncate(depth);
            }
            _ => {
                for c in self.children() {
                    c.collect_free(bound, out);
                }
            }
        }
    }

    pub fn mentions_primed(&self) -> bool {
        !self.free_names().primed.is_empty()
    }

    /// Simultaneous capture-avoiding-enough substitution of plain and primed
    /// variable occurrences. Bound variables shadow the mapping.
    pub fn substitute(&self, map: &dyn Fn(&Expr) -> Option<Expr>) -> Expr {
        self.subst_inner(map, &mut Vec::new())
    }

    fn subst_inner(&self, map: &dyn Fn(&Expr) -> Option<Expr>, bound: &mut Vec<String>) -> Expr {
        match self {
            Expr::Var(n) if bound.contains(n) => self.clone(),
            Expr::Var(_) | Expr::Primed(_) => map(self).unwrap_or_else(|| self.clone()),
            Expr::Quant(q, vars, body) => {
                let depth = bound.len();
                bound.extend(vars.iter().cloned());
                let body = body.subst_inner(map, bound);
                bound.truncate(depth);
                Expr::Quant(*q, vars.clone(), Box::new(body))
            }
            Expr::SetLit(items) => {
                Expr::SetLit(items.iter().map(|e| e.subst_inner(map, bound)).collect())
            }
            Expr::Unsupported(n, items) => Expr::Unsupported(
                n.clone(),
                items.iter().map(|e| e.subst_inner(map, bound)).collect(),
            ),
            Expr::Bin(op, l, r) => Expr::Bin(
                *op,
                Box::new(l.subst_inner(map, bound)),
                Box::new(r.subst_inner(map, bound)),
            ),
            Expr::Apply(l, r) => Expr::Apply(
                Box::new(l.subst_inner(map, bound)),
                Box::new(r.subst_inner(map, bound)),
            ),
            Expr::Not(e) => Expr::Not(Box::new(e.subst_inner(map, bound))),
            Expr::Neg(e) => Expr::Neg(Box::new(e.subst_inner(map, bound))),
            Expr::BoolOf(e) => Expr::BoolOf(Box::new(e.subst_inner(map, bound))),
            _ => self.clone(),
        }
    }

    /// Replace every plain `x` by `x'`.
    pub fn prime_all(&self, names: &[String]) -> Expr {
        self.substitute(&|e| match e {
            Expr::Var(n) if names.contains(n) => Some(Expr::Primed(n.clone())),
            _ => None,
        })
    }

    /// Replace plain occurrences of variables by expressions.
    pub fn replace_vars(&self, pairs: &[(String, Expr)]) -> Expr {
        self.substitute(&|e| match e {
            Expr::Var(n) => pairs.iter().find(|(k, _)| k == n).map(|(_, v)| v.clone()),
            _ => None,
        })
    }

    /// Replace primed occurrences of variables by expressions.
    pub fn replace_primed(&self, pairs: &[(String, Expr)]) -> Expr {
        self.substitute(&|e| match e {
            Expr::Primed(n) => pairs.iter().find(|(k, _)| k == n).map(|(_, v)| v.clone()),
            _ => None,
        })
    }

    pub fn contains_unsupported(&self) -> Option<&str> {
        if let Expr::Unsupported(n, _) = self {
            return Some(n);
        }
        self.children().into_iter().find_map(|c| c.contains_unsupported())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FreeNames {
    pub plain: Vec<String>,
    pub primed: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Label {
    pub text: String,
    pub span: SourceSpan,
}

impl Label {
    pub fn new(text: &str) -> Label {
        Label {
            text: text.to_string(),
            span: SourceSpan::default(),
        }
    }

    pub fn is_valid(text: &str) -> bool {
        let mut chars = text.chars();
        match chars.next() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return false,
        }
        chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub span: SourceSpan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InvariantKind {
    Invariant,
    Theorem,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvariantDef {
    pub kind: InvariantKind,
    pub label: Label,
    pub predicate: Expr,
    pub span: SourceSpan,
}

/// Labeled predicate (axiom, rely, guarantee).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledPred {
    pub label: Label,
    pub predicate: Expr,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Context {
    pub sets: Vec<VarDecl>,
    pub constants: Vec<VarDecl>,
    pub axioms: Vec<LabeledPred>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvironmentDef {
    pub label: Label,
    pub refines: Vec<Label>,
    pub relies: Vec<LabeledPred>,
    pub guarantees: Vec<LabeledPred>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessDef {
    pub label: Label,
    pub refines: Vec<Label>,
    pub locals: Vec<VarDecl>,
    pub relies: Vec<LabeledPred>,
    pub guarantees: Vec<LabeledPred>,
    pub invariants: Vec<InvariantDef>,
    pub body: Option<Stmt>,
    pub span: SourceSpan,
}

impl ProcessDef {
    pub fn rely(&self) -> Expr {
        Expr::conjoin(self.relies.iter().map(|r| r.predicate.clone()))
    }

    pub fn guarantee(&self) -> Expr {
        Expr::conjoin(self.guarantees.iter().map(|g| g.predicate.clone()))
    }
}

impl EnvironmentDef {
    pub fn rely(&self) -> Expr {
        Expr::conjoin(self.relies.iter().map(|r| r.predicate.clone()))
    }

    pub fn guarantee(&self) -> Expr {
        Expr::conjoin(self.guarantees.iter().map(|g| g.predicate.clone()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Substitution {
    BecomesEqual { target: String, expr: Expr },
    BecomesIn { target: String, set: Expr },
    BecomesSuchThat { targets: Vec<String>, pred: Expr },
    Parallel(Vec<(Option<Label>, Substitution)>),
}

impl Substitution {
    pub fn targets(&self) -> Vec<String> {
        match self {
            Substitution::BecomesEqual { target, .. } | Substitution::BecomesIn { target, .. } => {
                vec![target.clone()]
            }
            Substitution::BecomesSuchThat { targets, .. } => targets.clone(),
            Substitution::Parallel(parts) => parts.iter().flat_map(|(_, p)| p.targets()).collect(),
        }
    }

    /// Non-parallel parts with their labels, flattening nested parallels.
    pub fn parts(&self) -> Vec<(Option<&Label>, &Substitution)> {
        match self {
            Substitution::Parallel(parts) => parts
                .iter()
                .flat_map(|(l, p)| {
                    let inner = p.parts();
                    if inner.len() == 1 {
                        vec![(l.as_ref().or(inner[0].0), inner[0].1)]
                    } else {
                        inner
                    }
                })
                .collect(),
            other => vec![(None, other)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssertConjunct {
    pub label: Option<Label>,
    pub predicate: Expr,
}

/// Trailing refinement annotations; recorded, no semantics.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Annotations {
    pub atomic: bool,
    pub refines: Vec<Label>,
    pub with: Option<Expr>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub label: Option<Label>,
    pub annotations: Annotations,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    Subst(Substitution),
    Seq(Box<Stmt>, Box<Stmt>),
    If {
        branches: Vec<(Expr, Stmt)>,
        else_body: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        invariants: Vec<InvariantDef>,
        variant: Expr,
        body: Box<Stmt>,
    },
    Begin {
        locals: Vec<VarDecl>,
        invariants: Vec<InvariantDef>,
        body: Box<Stmt>,
    },
    Assert(Vec<AssertConjunct>),
    Stop,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Stmt {
        Stmt {
            kind,
            label: None,
            annotations: Annotations::default(),
            span: SourceSpan::default(),
        }
    }

    pub fn labeled(mut self, label: &str) -> Stmt {
        self.label = Some(Label::new(label));
        self
    }

    pub fn seq(first: Stmt, second: Stmt) -> Stmt {
        let span = first.span.join(second.span);
        Stmt {
            kind: StmtKind::Seq(Box::new(first), Box::new(second)),
            label: None,
            annotations: Annotations::default(),
            span,
        }
    }

    /// Right-nested sequence of a non-empty list.
    pub fn seq_of(mut items: Vec<Stmt>) -> Stmt {
        let mut acc = items.pop().expect("non-empty sequence");
        while let Some(prev) = items.pop() {
            acc = Stmt::seq(prev, acc);
        }
        acc
    }

    /// The flattened list of sequence elements.
    pub fn flatten_seq(&self) -> Vec<&Stmt> {
        match &self.kind {
            StmtKind::Seq(a, b) => {
                let mut v = a.flatten_seq();
                v.extend(b.flatten_seq());
                v
            }
            _ => vec![self],
        }
    }

    pub fn is_assert(&self) -> bool {
        matches!(self.kind, StmtKind::Assert(_))
    }

    pub fn assert_predicate(&self) -> Option<Expr> {
        match &self.kind {
            StmtKind::Assert(cs) => Some(Expr::conjoin(cs.iter().map(|c| c.predicate.clone()))),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Event {
    pub label: Label,
    pub guard: Expr,
    pub action: Substitution,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventBMachine {
    pub name: Label,
    pub variables: Vec<VarDecl>,
    pub invariants: Vec<InvariantDef>,
    pub initialisation: Option<Substitution>,
    pub events: Vec<Event>,
    pub span: SourceSpan,
}

impl EventBMachine {
    pub fn event(&self, label: &str) -> Option<&Event> {
        self.events.iter().find(|e| e.label.text == label)
    }
}

/// Alphabet map from process substitution labels to machine events.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefMap {
    pub process: Label,
    pub pairs: Vec<(Label, Label)>,
    pub span: SourceSpan,
}

/// Finite bounds used for exhaustive checking.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CheckSection {
    pub bound: Option<(i64, i64)>,
    pub sets: Vec<(String, Vec<String>)>,
    pub consts: Vec<(String, Expr)>,
    pub domains: Vec<(String, Expr)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlpModel {
    pub name: String,
    pub context: Context,
    pub globals: Vec<VarDecl>,
    pub invariants: Vec<InvariantDef>,
    pub initialisation: Option<Substitution>,
    pub environments: Vec<EnvironmentDef>,
    pub processes: Vec<ProcessDef>,
    pub machine: Option<EventBMachine>,
    pub refmaps: Vec<RefMap>,
    pub check: Option<CheckSection>,
}

impl SlpModel {
    pub fn process(&self, label: &str) -> Option<&ProcessDef> {
        self.processes.iter().find(|p| p.label.text == label)
    }

    pub fn global_names(&self) -> Vec<String> {
        self.globals.iter().map(|v| v.name.clone()).collect()
    }

    pub fn refmap(&self, process: &str) -> Option<&RefMap> {
        self.refmaps.iter().find(|r| r.process.text == process)
    }
}
