//! Recursive-descent parser for `.slp` model files.

use crate::ast::*;
use crate::lexer::{tokenize, Tok, Token};
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub message: String,
}

impl std::error::Error for ParseError {}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

pub const KEYWORDS: &[&str] = &[
    "MODEL",
    "SETS",
    "CONSTANTS",
    "AXIOMS",
    "VARIABLES",
    "INVARIANTS",
    "INVARIANT",
    "THEOREM",
    "INITIALISATION",
    "ENVIRONMENT",
    "PROCESS",
    "RELY",
    "GUARANTEE",
    "BODY",
    "IF",
    "THEN",
    "ELSIF",
    "ELSE",
    "END",
    "WHILE",
    "VARIANT",
    "BEGIN",
    "ASSERT",
    "STOP",
    "MACHINE",
    "EVENT",
    "WHEN",
    "CHECK",
    "REFMAP",
    "ATOMIC",
    "REFINES",
    "WITH",
    "TRUE",
    "FALSE",
    "INT",
    "NAT",
    "NAT1",
    "BOOL",
    "POW",
    "card",
    "dom",
    "ran",
    "bool",
    "not",
    "or",
    "mod",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

pub fn parse_model(text: &str) -> Result<SlpModel, ParseError> {
    let mut p = Parser::new(text)?;
    let model = p.model()?;
    p.expect_eof()?;
    Ok(model)
}

pub fn parse_predicate(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(text)?;
    let e = p.pred()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    parse_predicate(text)
}

/// Parse a statement block (used by tests and tools).
pub fn parse_statement(text: &str) -> Result<Stmt, ParseError> {
    let mut p = Parser::new(text)?;
    let s = p.block()?;
    p.expect_eof()?;
    Ok(s)
}

pub fn parse_substitution(text: &str) -> Result<Substitution, ParseError> {
    let mut p = Parser::new(text)?;
    let s = p.substitution(None)?;
    p.expect_eof()?;
    Ok(s)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(text: &str) -> PResult<Parser> {
        Ok(Parser {
            toks: tokenize(text)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> SourceSpan {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Ident(s) => s.clone(),
            Tok::Primed(s) => format!("{s}'"),
            Tok::Int(i) => i.to_string(),
            Tok::Sym(s) => s.to_string(),
            Tok::Eof => "end of input".into(),
        }
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        let found = Self::describe(self.peek());
        let message = if expected.len() == 1 {
            format!("expected {}, found {}", expected[0], found)
        } else {
            format!("expected one of {}, found {}", expected.join(", "), found)
        };
        Err(ParseError {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            message,
        })
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == kw)
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.is_sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.error(&[kw])
        }
    }

    fn expect_sym(&mut self, sym: &str) -> PResult<()> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.error(&[sym])
        }
    }

    fn expect_eof(&mut self) -> PResult<()> {
        if matches!(self.peek(), Tok::Eof) {
            Ok(())
        } else {
            self.error(&["end of input"])
        }
    }

    fn at_name(&self) -> bool {
        matches!(self.peek(), Tok::Ident(w) if !is_keyword(w))
    }

    fn name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(w) if !is_keyword(&w) => {
                self.bump();
                Ok(w)
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn label(&mut self) -> PResult<Label> {
        let span = self.span();
        let text = self.name()?;
        Ok(Label { text, span })
    }

    fn at_labeled_item(&self) -> bool {
        self.at_name() && matches!(self.peek_at(1), Tok::Sym(":"))
    }

    fn decls(&mut self) -> PResult<Vec<VarDecl>> {
        let mut out = Vec::new();
        while self.at_name() {
            let span = self.span();
            out.push(VarDecl {
                name: self.name()?,
                span,
            });
        }
        Ok(out)
    }

    fn labeled_pred(&mut self) -> PResult<LabeledPred> {
        let start = self.span();
        let label = self.label()?;
        self.expect_sym(":")?;
        let predicate = self.pred()?;
        Ok(LabeledPred {
            label,
            predicate,
            span: start.join(self.prev_span()),
        })
    }

    /// `label: pred` or `THEOREM label: pred` items of an INVARIANTS section.
    fn invariant_section(&mut self) -> PResult<Vec<InvariantDef>> {
        let mut out = Vec::new();
        loop {
            let start = self.span();
            let kind = if self.eat_kw("THEOREM") {
                InvariantKind::Theorem
            } else if self.at_labeled_item() {
                InvariantKind::Invariant
            } else {
                break;
            };
            let lp = self.labeled_pred()?;
            out.push(InvariantDef {
                kind,
                label: lp.label,
                predicate: lp.predicate,
                span: start.join(self.prev_span()),
            });
        }
        Ok(out)
    }

    /// Keyword-per-item invariants: `INVARIANT l: p` / `THEOREM l: p`.
    fn invariant_items(&mut self) -> PResult<Vec<InvariantDef>> {
        let mut out = Vec::new();
        loop {
            let start = self.span();
            let kind = if self.eat_kw("INVARIANT") || self.eat_kw("INVARIANTS") {
                InvariantKind::Invariant
            } else if self.eat_kw("THEOREM") {
                InvariantKind::Theorem
            } else {
                break;
            };
            let lp = self.labeled_pred()?;
            out.push(InvariantDef {
                kind,
                label: lp.label,
                predicate: lp.predicate,
                span: start.join(self.prev_span()),
            });
        }
        Ok(out)
    }

    fn model(&mut self) -> PResult<SlpModel> {
        self.expect_kw("MODEL")?;
        let name = self.name()?;
        let mut model = SlpModel {
            name,
            context: Context::default(),
            globals: Vec::new(),
            invariants: Vec::new(),
            initialisation: None,
            environments: Vec::new(),
            processes: Vec::new(),
            machine: None,
            refmaps: Vec::new(),
            check: None,
        };
        loop {
            if self.eat_kw("SETS") {
                model.context.sets.extend(self.decls()?);
            } else if self.eat_kw("CONSTANTS") {
                model.context.constants.extend(self.decls()?);
            } else if self.eat_kw("AXIOMS") {
                while self.at_labeled_item() {
                    model.context.axioms.push(self.labeled_pred()?);
                }
            } else if self.eat_kw("VARIABLES") {
                model.globals.extend(self.decls()?);
            } else if self.eat_kw("INVARIANTS") {
                model.invariants.extend(self.invariant_section()?);
            } else if self.eat_kw("INITIALISATION") {
                model.initialisation = Some(self.substitution(None)?);
            } else if self.is_kw("ENVIRONMENT") {
                model.environments.push(self.environment()?);
            } else if self.is_kw("PROCESS") {
                model.processes.push(self.process()?);
            } else if self.is_kw("MACHINE") {
                if model.machine.is_some() {
                    return Err(ParseError {
                        span: self.span(),
                        expected: Vec::new(),
                        message: "only one MACHINE may be given".into(),
                    });
                }
                model.machine = Some(self.machine()?);
            } else if self.is_kw("REFMAP") {
                model.refmaps.push(self.refmap()?);
            } else if self.is_kw("CHECK") {
                model.check = Some(self.check_section()?);
            } else {
                break;
            }
        }
        Ok(model)
    }

    fn refines_clause(&mut self) -> PResult<Vec<Label>> {
        let mut out = Vec::new();
        if self.eat_kw("REFINES") {
            out.push(self.label()?);
            while self.at_name() && !matches!(self.peek_at(1), Tok::Sym(":")) {
                out.push(self.label()?);
            }
        }
        Ok(out)
    }

    fn environment(&mut self) -> PResult<EnvironmentDef> {
        let start = self.span();
        self.expect_kw("ENVIRONMENT")?;
        let label = self.label()?;
        let refines = self.refines_clause()?;
        let mut relies = Vec::new();
        let mut guarantees = Vec::new();
        loop {
            if self.eat_kw("RELY") {
                relies.push(self.labeled_pred()?);
                while self.at_labeled_item() {
                    relies.push(self.labeled_pred()?);
                }
            } else if self.eat_kw("GUARANTEE") {
                guarantees.push(self.labeled_pred()?);
                while self.at_labeled_item() {
                    guarantees.push(self.labeled_pred()?);
                }
            } else {
                break;
            }
        }
        if !self.eat_kw("END") {
            return self.error(&["RELY", "GUARANTEE", "END"]);
        }
        Ok(EnvironmentDef {
            label,
            refines,
            relies,
            guarantees,
            span: start.join(self.prev_span()),
        })
    }

    fn process(&mut self) -> PResult<ProcessDef> {
        let start = self.span();
        self.expect_kw("PROCESS")?;
        let label = self.label()?;
        let refines = self.refines_clause()?;
        let mut locals = Vec::new();
        let mut relies = Vec::new();
        let mut guarantees = Vec::new();
        let mut invariants = Vec::new();
        let mut body = None;
        loop {
            if self.eat_kw("VARIABLES") {
                locals.extend(self.decls()?);
            } else if self.eat_kw("RELY") {
                relies.push(self.labeled_pred()?);
                while self.at_labeled_item() {
                    relies.push(self.labeled_pred()?);
                }
            } else if self.eat_kw("GUARANTEE") {
                guarantees.push(self.labeled_pred()?);
                while self.at_labeled_item() {
                    guarantees.push(self.labeled_pred()?);
                }
            } else if self.is_kw("INVARIANT")
                || self.is_kw("INVARIANTS")
                || self.is_kw("THEOREM")
            {
                invariants.extend(self.invariant_items()?);
            } else if self.eat_kw("BODY") {
                body = Some(self.block()?);
            } else {
                break;
            }
        }
        if !self.eat_kw("END") {
            return self.error(&["VARIABLES", "RELY", "GUARANTEE", "INVARIANT", "BODY", "END"]);
        }
        Ok(ProcessDef {
            label,
            refines,
            locals,
            relies,
            guarantees,
            invariants,
            body,
            span: start.join(self.prev_span()),
        })
    }

    fn machine(&mut self) -> PResult<EventBMachine> {
        let start = self.span();
        self.expect_kw("MACHINE")?;
        let name = self.label()?;
        let mut variables = Vec::new();
        let mut invariants = Vec::new();
        let mut initialisation = None;
        let mut events = Vec::new();
        loop {
            if self.eat_kw("VARIABLES") {
                variables.extend(self.decls()?);
            } else if self.eat_kw("INVARIANTS") {
                invariants.extend(self.invariant_section()?);
            } else if self.eat_kw("INITIALISATION") {
                initialisation = Some(self.substitution(None)?);
            } else if self.is_kw("EVENT") {
                let estart = self.span();
                self.bump();
                let label = self.label()?;
                let guard = if self.eat_kw("WHEN") {
                    self.pred()?
                } else {
                    Expr::Bool(true)
                };
                self.expect_kw("THEN")?;
                let action = self.substitution(None)?;
                self.expect_kw("END")?;
                events.push(Event {
                    label,
                    guard,
                    action,
                    span: estart.join(self.prev_span()),
                });
            } else {
                break;
            }
        }
        if !self.eat_kw("END") {
            return self.error(&["VARIABLES", "INVARIANTS", "INITIALISATION", "EVENT", "END"]);
        }
        Ok(EventBMachine {
            name,
            variables,
            invariants,
            initialisation,
            events,
            span: start.join(self.prev_span()),
        })
    }

    fn refmap(&mut self) -> PResult<RefMap> {
        let start = self.span();
        self.expect_kw("REFMAP")?;
        let process = self.label()?;
        self.expect_sym("{")?;
        let mut pairs = Vec::new();
        while !self.is_sym("}") {
            let from = self.label()?;
            self.expect_sym("->")?;
            let to = self.label()?;
            pairs.push((from, to));
            if !self.eat_sym(";") {
                break;
            }
        }
        self.expect_sym("}")?;
        Ok(RefMap {
            process,
            pairs,
            span: start.join(self.prev_span()),
        })
    }

    fn int_literal(&mut self) -> PResult<i64> {
        let neg = self.eat_sym("-");
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(if neg { -i } else { i })
            }
            _ => self.error(&["integer literal"]),
        }
    }

    fn check_section(&mut self) -> PResult<CheckSection> {
        self.expect_kw("CHECK")?;
        let mut sec = CheckSection::default();
        loop {
            if self.eat_kw("BOUND") {
                self.expect_kw("INT")?;
                self.expect_sym("=")?;
                let lo = self.int_literal()?;
                self.expect_sym("..")?;
                let hi = self.int_literal()?;
                sec.bound = Some((lo, hi));
            } else if self.eat_kw("SET") {
                let name = self.name()?;
                self.expect_sym("=")?;
                self.expect_sym("{")?;
                let mut atoms = Vec::new();
                while self.at_name() {
                    atoms.push(self.name()?);
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym("}")?;
                sec.sets.push((name, atoms));
            } else if self.eat_kw("CONST") {
                let name = self.name()?;
                self.expect_sym("=")?;
                sec.consts.push((name, self.pred()?));
            } else if self.eat_kw("DOMAIN") {
                let name = self.name()?;
                self.expect_sym("=")?;
                sec.domains.push((name, self.pred()?));
            } else if self.eat_kw("END") {
                break;
            } else {
                return self.error(&["BOUND", "SET", "CONST", "DOMAIN", "END"]);
            }
            if !self.eat_sym(";") {
                self.expect_kw("END")?;
                break;
            }
        }
        Ok(sec)
    }

    // ---- statements ----

    fn block(&mut self) -> PResult<Stmt> {
        let mut items = vec![self.action()?];
        while self.eat_sym(";") {
            items.push(self.action()?);
        }
        Ok(Stmt::seq_of(items))
    }

    fn action(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let label = if self.at_labeled_item() {
            let l = self.label()?;
            self.bump();
            Some(l)
        } else {
            None
        };
        let (kind, label) = if self.eat_kw("IF") {
            (self.if_rest()?, label)
        } else if self.eat_kw("WHILE") {
            (self.while_rest()?, label)
        } else if self.eat_kw("BEGIN") {
            let locals = if self.eat_kw("VARIABLES") {
                self.decls()?
            } else {
                Vec::new()
            };
            let invariants = self.invariant_items()?;
            let body = self.block()?;
            self.expect_kw("END")?;
            (
                StmtKind::Begin {
                    locals,
                    invariants,
                    body: Box::new(body),
                },
                label,
            )
        } else if self.eat_kw("ASSERT") {
            (self.assert_rest()?, label)
        } else if self.eat_kw("STOP") {
            (StmtKind::Stop, label)
        } else if self.at_name() {
            let mut sub = self.substitution(None)?;
            // a leading label on a parallel substitution belongs to its first part
            let mut label = label;
            if let Substitution::Parallel(parts) = &mut sub {
                if parts[0].0.is_none() {
                    parts[0].0 = label.take();
                }
            }
            (StmtKind::Subst(sub), label)
        } else {
            return self.error(&["IF", "WHILE", "BEGIN", "ASSERT", "STOP", "substitution"]);
        };
        let annotations = self.annotations()?;
        Ok(Stmt {
            kind,
            label,
            annotations,
            span: start.join(self.prev_span()),
        })
    }

    fn annotations(&mut self) -> PResult<Annotations> {
        let mut ann = Annotations::default();
        if self.eat_kw("ATOMIC") {
            ann.atomic = true;
        }
        if self.eat_kw("REFINES") {
            ann.refines.push(self.label()?);
            while self.at_name() {
                ann.refines.push(self.label()?);
            }
        }
        if self.eat_kw("WITH") {
            ann.with = Some(self.pred()?);
        }
        Ok(ann)
    }

    fn if_rest(&mut self) -> PResult<StmtKind> {
        let mut branches = Vec::new();
        let cond = self.pred()?;
        self.expect_kw("THEN")?;
        branches.push((cond, self.block()?));
        let mut else_body = None;
        loop {
            if self.eat_kw("ELSIF") {
                let c = self.pred()?;
                self.expect_kw("THEN")?;
                branches.push((c, self.block()?));
            } else if self.eat_kw("ELSE") {
                else_body = Some(Box::new(self.block()?));
                self.expect_kw("END")?;
                break;
            } else if self.eat_kw("END") {
                break;
            } else {
                return self.error(&["ELSIF", "ELSE", "END"]);
            }
        }
        Ok(StmtKind::If {
            branches,
            else_body,
        })
    }

    fn while_rest(&mut self) -> PResult<StmtKind> {
        let cond = self.pred()?;
        let invariants = self.invariant_items()?;
        if !self.eat_kw("VARIANT") {
            return self.error(&["VARIANT"]);
        }
        let variant = self.pred()?;
        self.expect_kw("THEN")?;
        let body = self.block()?;
        self.expect_kw("END")?;
        Ok(StmtKind::While {
            cond,
            invariants,
            variant,
            body: Box::new(body),
        })
    }

    fn assert_rest(&mut self) -> PResult<StmtKind> {
        let mut conjuncts = vec![self.assert_conjunct()?];
        while self.eat_sym("&&&") || self.eat_kw("ASSERT") {
            conjuncts.push(self.assert_conjunct()?);
        }
        Ok(StmtKind::Assert(conjuncts))
    }

    fn assert_conjunct(&mut self) -> PResult<AssertConjunct> {
        if self.at_labeled_item() {
            // `l: p` or a membership predicate `e : s`; try the labeled reading first
            let save = self.pos;
            let label = self.label()?;
            self.bump();
            match self.pred() {
                Ok(p) if p.is_predicate() => {
                    return Ok(AssertConjunct {
                        label: Some(label),
                        predicate: p,
                    })
                }
                _ => self.pos = save,
            }
        }
        Ok(AssertConjunct {
            label: None,
            predicate: self.pred()?,
        })
    }

    /// Parallel substitution; `first_label` is a label already consumed
    /// before the first part.
    fn substitution(&mut self, first_label: Option<Label>) -> PResult<Substitution> {
        let first_label = if first_label.is_none() && self.at_labeled_item() {
            let l = self.label()?;
            self.bump();
            Some(l)
        } else {
            first_label
        };
        let mut parts = vec![(first_label, self.simple_substitution()?)];
        while self.eat_sym("||") {
            let label = if self.at_labeled_item() {
                let l = self.label()?;
                self.bump();
                Some(l)
            } else {
                None
            };
            parts.push((label, self.simple_substitution()?));
        }
        if parts.len() == 1 {
            let (label, sub) = parts.pop().unwrap();
            if label.is_none() {
                return Ok(sub);
            }
            // a single labeled part at top level of INITIALISATION/EVENT actions
            return Ok(Substitution::Parallel(vec![(label, sub)]));
        }
        Ok(Substitution::Parallel(parts))
    }

    fn simple_substitution(&mut self) -> PResult<Substitution> {
        let first = self.name()?;
        if self.eat_sym(":=") {
            return Ok(Substitution::BecomesEqual {
                target: first,
                expr: self.pred()?,
            });
        }
        if self.eat_sym("::") {
            return Ok(Substitution::BecomesIn {
                target: first,
                set: self.pred()?,
            });
        }
        let mut targets = vec![first];
        while self.eat_sym(",") {
            targets.push(self.name()?);
        }
        if self.eat_sym(":|") {
            return Ok(Substitution::BecomesSuchThat {
                targets,
                pred: self.pred()?,
            });
        }
        if targets.len() == 1 {
            self.error(&[":=", "::", ":|"])
        } else {
            self.error(&[":|"])
        }
    }

    // ---- predicates and expressions ----

    fn pred(&mut self) -> PResult<Expr> {
        self.equiv()
    }

    fn equiv(&mut self) -> PResult<Expr> {
        let mut lhs = self.implies()?;
        while self.eat_sym("<=>") {
            let rhs = self.implies()?;
            lhs = Expr::bin(BinOp::Equiv, lhs, rhs);
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> PResult<Expr> {
        let lhs = self.disj()?;
        if self.eat_sym("=>") {
            let rhs = self.implies()?;
            return Ok(Expr::bin(BinOp::Implies, lhs, rhs));
        }
        Ok(lhs)
    }

    fn disj(&mut self) -> PResult<Expr> {
        let mut lhs = self.conj()?;
        while self.eat_kw("or") {
            let rhs = self.conj()?;
            lhs = Expr::bin(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> PResult<Expr> {
        let mut lhs = self.negation()?;
        while self.eat_sym("&") {
            let rhs = self.negation()?;
            lhs = Expr::bin(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn negation(&mut self) -> PResult<Expr> {
        if self.eat_kw("not") {
            return Ok(Expr::not(self.negation()?));
        }
        self.relation()
    }

    fn relation(&mut self) -> PResult<Expr> {
        let lhs = self.maplet()?;
        let op = match self.peek() {
            Tok::Sym("=") => BinOp::Eq,
            Tok::Sym("/=") => BinOp::Neq,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym(">=") => BinOp::Ge,
            Tok::Sym(":") => BinOp::In,
            Tok::Sym("/:") => BinOp::NotIn,
            Tok::Sym("<:") => BinOp::Subset,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.maplet()?;
        Ok(Expr::bin(op, lhs, rhs))
    }

    fn maplet(&mut self) -> PResult<Expr> {
        let mut lhs = self.setop()?;
        while self.eat_sym("|->") {
            let rhs = self.setop()?;
            lhs = Expr::bin(BinOp::Maplet, lhs, rhs);
        }
        Ok(lhs)
    }

    fn setop(&mut self) -> PResult<Expr> {
        let mut lhs = self.interval()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("\\/") => BinOp::Union,
                Tok::Sym("/\\") => BinOp::Inter,
                Tok::Sym("\\") | Tok::Sym("\\\\") => BinOp::Diff,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.interval()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn interval(&mut self) -> PResult<Expr> {
        let lhs = self.additive()?;
        if self.eat_sym("..") {
            let rhs = self.additive()?;
            return Ok(Expr::bin(BinOp::Interval, lhs, rhs));
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => BinOp::Mul,
                Tok::Sym("/") => BinOp::Div,
                Tok::Ident(w) if w == "mod" => BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_sym("-") {
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Int(i) => Expr::Int(-i),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.atom()?;
        while matches!(e, Expr::Var(_) | Expr::Apply(..)) && self.is_sym("(") {
            self.bump();
            let arg = self.pred()?;
            self.expect_sym(")")?;
            e = Expr::Apply(Box::new(e), Box::new(arg));
        }
        Ok(e)
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::Int(i))
            }
            Tok::Primed(n) => {
                if is_keyword(&n) {
                    return self.error(&["expression"]);
                }
                self.bump();
                Ok(Expr::Primed(n))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.pred()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("{") => self.set_expr(),
            Tok::Sym("!") | Tok::Sym("#") => {
                let q = if self.is_sym("!") {
                    Quantifier::ForAll
                } else {
                    Quantifier::Exists
                };
                self.bump();
                let mut vars = vec![self.name()?];
                while self.eat_sym(",") {
                    vars.push(self.name()?);
                }
                self.expect_sym(".")?;
                self.expect_sym("(")?;
                let body = self.pred()?;
                self.expect_sym(")")?;
                Ok(Expr::Quant(q, vars, Box::new(body)))
            }
            Tok::Ident(w) => match w.as_str() {
                "TRUE" => {
                    self.bump();
                    Ok(Expr::Bool(true))
                }
                "FALSE" => {
                    self.bump();
                    Ok(Expr::Bool(false))
                }
                "INT" => {
                    self.bump();
                    Ok(Expr::IntSet)
                }
                "NAT" => {
                    self.bump();
                    Ok(Expr::NatSet)
                }
                "NAT1" => {
                    self.bump();
                    Ok(Expr::Nat1Set)
                }
                "BOOL" => {
                    self.bump();
                    Ok(Expr::BoolSet)
                }
                "bool" => {
                    self.bump();
                    self.expect_sym("(")?;
                    let p = self.pred()?;
                    self.expect_sym(")")?;
                    Ok(Expr::BoolOf(Box::new(p)))
                }
                "POW" | "card" | "dom" | "ran" => {
                    self.bump();
                    self.expect_sym("(")?;
                    let e = self.pred()?;
                    self.expect_sym(")")?;
                    Ok(Expr::Unsupported(w, vec![e]))
                }
                _ if is_keyword(&w) => self.error(&["expression"]),
                _ => {
                    self.bump();
                    Ok(Expr::Var(w))
                }
            },
            _ => self.error(&["expression"]),
        }
    }

    fn set_expr(&mut self) -> PResult<Expr> {
        self.expect_sym("{")?;
        if self.eat_sym("}") {
            return Ok(Expr::EmptySet);
        }
        // comprehension `{ x, y | P }`
        let save = self.pos;
        if self.at_name() {
            let mut vars = vec![Expr::Var(self.name()?)];
            while self.eat_sym(",") && self.at_name() {
                vars.push(Expr::Var(self.name()?));
            }
            if self.eat_sym("|") {
                let body = self.pred()?;
                self.expect_sym("}")?;
                return Ok(Expr::Unsupported(
                    "comprehension".into(),
                    vec![Expr::SetLit(vars), body],
                ));
            }
            self.pos = save;
        }
        let mut items = vec![self.pred()?];
        while self.eat_sym(",") {
            items.push(self.pred()?);
        }
        self.expect_sym("}")?;
        Ok(Expr::SetLit(items))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn environment_with_one_guarantee() {
        let m = parse_model(
            "MODEL m VARIABLES t CONSTANTS delta \
             ENVIRONMENT temp_sensor GUARANTEE guar1: t' : (t - delta) .. (t + delta) END \
             PROCESS p END",
        )
        .unwrap();
        let env = &m.environments[0];
        assert_eq!(env.label.text, "temp_sensor");
        assert!(env.relies.is_empty());
        assert_eq!(env.guarantees.len(), 1);
        assert_eq!(
            env.guarantees[0].predicate,
            parse_predicate("t' : (t - delta)..(t + delta)").unwrap()
        );
    }

    #[test]
    fn solipsistic_process() {
        let m = parse_model("MODEL m PROCESS p END").unwrap();
        let p = &m.processes[0];
        assert!(p.relies.is_empty() && p.guarantees.is_empty() && p.body.is_none());
    }

    #[test]
    fn while_requires_variant() {
        let e = parse_statement("WHILE y1 /= y2 THEN y1 := y1 - y2 END").unwrap_err();
        assert_eq!(e.expected, vec!["VARIANT".to_string()]);
        assert!(e.message.starts_with("expected VARIANT"));
    }

    #[test]
    fn gcd_invariant_has_three_conjuncts() {
        let p = parse_predicate("gcd(x1 |-> x2) = gcd(y1 |-> y2) & y1 > 0 & y2 > 0").unwrap();
        assert_eq!(p.conjuncts().len(), 3);
        assert!(matches!(p.conjuncts()[0], Expr::Bin(BinOp::Eq, l, _) if matches!(**l, Expr::Apply(..))));
    }

    #[test]
    fn negation_and_precedence() {
        assert_eq!(
            parse_predicate("not TRUE").unwrap(),
            Expr::not(Expr::Bool(true))
        );
        let p = parse_predicate("a = 1 & b = 2 => c = 3").unwrap();
        match p {
            Expr::Bin(BinOp::Implies, l, _) => {
                assert!(matches!(*l, Expr::Bin(BinOp::And, _, _)))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn arithmetic_binds_tighter_than_interval() {
        let p = parse_expression("t - d .. t + d").unwrap();
        assert!(matches!(p, Expr::Bin(BinOp::Interval, _, _)));
    }

    #[test]
    fn labeled_actions_and_parallel_parts() {
        let s = parse_statement("cp1: y1 := x1 || cp2: y2 := x2; act: r := y1").unwrap();
        let items = s.flatten_seq();
        assert_eq!(items.len(), 2);
        match &items[0].kind {
            StmtKind::Subst(Substitution::Parallel(parts)) => {
                assert_eq!(parts[0].0.as_ref().unwrap().text, "cp1");
                assert_eq!(parts[1].0.as_ref().unwrap().text, "cp2");
            }
            k => panic!("{k:?}"),
        }
        assert_eq!(items[1].label.as_ref().unwrap().text, "act");
    }

    #[test]
    fn assert_membership_is_not_a_label() {
        let s = parse_statement("ASSERT e : s").unwrap();
        match &s.kind {
            StmtKind::Assert(cs) => {
                assert!(cs[0].label.is_none());
                assert_eq!(cs[0].predicate, parse_predicate("e : s").unwrap());
            }
            k => panic!("{k:?}"),
        }
        let s = parse_statement("ASSERT a1: e : s &&& s /= {}").unwrap();
        match &s.kind {
            StmtKind::Assert(cs) => {
                assert_eq!(cs.len(), 2);
                assert_eq!(cs[0].label.as_ref().unwrap().text, "a1");
            }
            k => panic!("{k:?}"),
        }
    }

    #[test]
    fn chained_and_composite_asserts_differ() {
        let chained = parse_statement("ASSERT p = 1; ASSERT q = 1").unwrap();
        assert_eq!(chained.flatten_seq().len(), 2);
        let composite = parse_statement("ASSERT p = 1 ASSERT q = 1").unwrap();
        assert_eq!(composite.flatten_seq().len(), 1);
    }

    #[test]
    fn annotations_are_recorded() {
        let s = parse_statement("x := 1 ATOMIC REFINES e1 e2 WITH x = 1").unwrap();
        assert!(s.annotations.atomic);
        assert_eq!(s.annotations.refines.len(), 2);
        assert!(s.annotations.with.is_some());
    }

    #[test]
    fn unsupported_constructs_parse() {
        let e = parse_expression("{ x | x > 1 }").unwrap();
        assert!(matches!(e, Expr::Unsupported(ref n, _) if n == "comprehension"));
        assert!(parse_expression("POW(S)").unwrap().contains_unsupported().is_some());
    }

    #[test]
    fn error_span_within_input() {
        let text = "MODEL m PROCESS p BODY x := END";
        let e = parse_model(text).unwrap_err();
        assert!(e.span.end <= text.len());
    }

    #[test]
    fn check_section() {
        let m = parse_model(
            "MODEL m CONSTANTS c PROCESS p END CHECK BOUND INT = -10..50 ; SET S = {a, b} ; \
             CONST c = {1 |-> 2, 2 |-> 1} ; DOMAIN x = 1..3 END",
        )
        .unwrap();
        let c = m.check.unwrap();
        assert_eq!(c.bound, Some((-10, 50)));
        assert_eq!(c.sets[0].1, vec!["a".to_string(), "b".to_string()]);
        assert_eq!(c.consts.len(), 1);
        assert_eq!(c.domains.len(), 1);
    }
}
