use crate::common::model_of;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use slp::ast::{Stmt, StmtKind};
use slp::discharge::{check, naive_check};
use slp::kernel::{Evaluator, Interpretation, State};
use slp::parser::{parse_predicate, parse_statement};
use slp::po::{generate, GenOptions};
use slp::relsem::{diamond, effective_guard, write_set, Image, ScopedRelation, Scoped, Semantics, Terminal};
use slp::scope::ScopeContext;
use slp::trace::process_traces;
use std::collections::BTreeSet;

const VARS: [&str; 3] = ["x", "y", "z"];
const TYPING: &str = "x : 0..3 & y : 0..3 & z : 0..3";

fn interp() -> Interpretation {
    Interpretation::new(0, 3)
}

fn scope(i: &Interpretation) -> Scoped {
    let ctx = ScopeContext {
        process: None,
        layers: vec![VARS.iter().map(|s| s.to_string()).collect()],
        layer_invariants: vec![parse_predicate(TYPING).unwrap()],
    };
    Scoped::new(ctx, i).unwrap()
}

fn var() -> impl Strategy<Value = &'static str> {
    prop::sample::select(&VARS[..])
}

/// Expressions that stay inside 0..3.
fn expr() -> impl Strategy<Value = String> {
    prop_oneof![
        (0..4i64).prop_map(|k| k.to_string()),
        var().prop_map(str::to_string),
        var().prop_map(|v| format!("({v} + 1) mod 4")),
        (var(), var()).prop_map(|(a, b)| format!("({a} + {b}) mod 4")),
        var().prop_map(|v| format!("3 - {v}")),
    ]
}

fn pred() -> impl Strategy<Value = String> {
    let atom = prop_oneof![
        (var(), var()).prop_map(|(a, b)| format!("{a} < {b}")),
        (var(), 0..4i64).prop_map(|(a, k)| format!("{a} = {k}")),
        (var(), 0..4i64).prop_map(|(a, k)| format!("{a} /= {k}")),
        (var(), var()).prop_map(|(a, b)| format!("{a} + {b} <= 3")),
        Just("TRUE".to_string()),
    ];
    prop_oneof![
        atom.clone(),
        (atom.clone(), atom.clone()).prop_map(|(a, b)| format!("{a} & {b}")),
        (atom.clone(), atom.clone()).prop_map(|(a, b)| format!("({a} or {b})")),
        atom.prop_map(|a| format!("not({a})")),
    ]
}

/// `@` marks where a label goes; see `label`.
fn substitution() -> impl Strategy<Value = String> {
    prop_oneof![
        (var(), expr()).prop_map(|(v, e)| format!("@ {v} := {e}")),
        (var(), 0..4i64, 0..4i64).prop_map(|(v, a, b)| format!("@ {v} :: {{{a}, {b}}}")),
        (var(), var()).prop_map(|(v, w)| format!("@ {v} :| {v}' : 0..3 & {v}' >= {w}")),
        (var(), expr(), expr()).prop_map(|(v, e, f)| {
            let w = VARS.iter().find(|w| **w != v).unwrap();
            format!("@ {v} := {e} || @ {w} := {f}")
        }),
    ]
}

#[derive(Clone, Copy)]
struct Allow {
    asserts: bool,
    stop: bool,
}

fn statement(allow: Allow) -> BoxedStrategy<String> {
    let mut leaves: Vec<BoxedStrategy<String>> = vec![substitution().boxed()];
    if allow.asserts {
        leaves.push(pred().prop_map(|p| format!("ASSERT {p}")).boxed());
    }
    if allow.stop {
        leaves.push(Just("STOP".to_string()).boxed());
    }
    let leaf = prop::strategy::Union::new(leaves);
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(|v| v.join("; ")),
            (pred(), inner.clone(), prop::option::of((pred(), inner.clone())), prop::option::of(inner.clone())).prop_map(
                |(g, a, elsif, els)| {
                    let mut s = format!("IF {g} THEN {a}");
                    if let Some((h, b)) = elsif {
                        s.push_str(&format!(" ELSIF {h} THEN {b}"));
                    }
                    if let Some(e) = els {
                        s.push_str(&format!(" ELSE {e}"));
                    }
                    s.push_str(" END");
                    s
                }
            ),
        ]
    })
    .boxed()
}

/// Give every `@` a fresh label.
fn label(text: &str) -> String {
    let mut out = String::new();
    for (k, part) in text.split('@').enumerate() {
        if k > 0 {
            out.push_str(&format!("a{k}:"));
        }
        out.push_str(part);
    }
    out
}

fn stmt(text: &str) -> Stmt {
    parse_statement(&label(text)).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn image(sem: &Semantics, st: &Stmt, sc: &Scoped, s: &State) -> Image {
    sem.image(st, sc, s).unwrap()
}

fn plain() -> Allow {
    Allow { asserts: false, stop: false }
}

/// Run `test` on `cases` inputs from `strategy`; the error names the
/// minimal failing input.
fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

pub fn write_set_soundness(cases: u32) -> Result<(), String> {
    run(cases, statement(Allow { asserts: true, stop: true }), |text| {
        let i = interp();
        let sc = scope(&i);
        let st = stmt(&text);
        let ws = write_set(&st);
        let rel = Semantics::new(&i).interpret(&st, &sc).unwrap();
        for (s, t) in &rel.pairs {
            if let Terminal::State(t) = t {
                for v in VARS.iter().filter(|v| !ws.contains(**v)) {
                    prop_assert_eq!(s.get(v), t.get(v), "{} changed by {}", v, text);
                }
            }
        }
        Ok(())
    })
}

pub fn diamond_totality(cases: u32) -> Result<(), String> {
    run(cases, statement(Allow { asserts: true, stop: true }), |text| {
        let i = interp();
        let sc = scope(&i);
        let st = stmt(&text);
        let sigma = sc.states(&i).unwrap();
        let sem = Semantics::new(&i);
        let rel = sem.interpret(&st, &sc).unwrap();
        let d = diamond(&rel, &sigma);
        prop_assert_eq!(d.domain().len(), sigma.len());
        for (s, t) in &rel.pairs {
            prop_assert!(d.pairs.contains(&(s.clone(), t.clone())));
        }
        if matches!(st.kind, StmtKind::Subst(_) | StmtKind::If { .. }) {
            for s in &sigma {
                prop_assert!(!image(&sem, &st, &sc, s).is_empty(), "{}", text);
            }
        }
        Ok(())
    })
}

pub fn if_guards_partition(cases: u32) -> Result<(), String> {
    run(cases, prop::collection::vec(pred(), 1..4), |guards| {
        let i = interp();
        let sc = scope(&i);
        let skip = parse_statement("x := x").unwrap();
        let branches: Vec<_> = guards.iter().map(|g| (parse_predicate(g).unwrap(), skip.clone())).collect();
        let effective: Vec<_> = (0..=branches.len()).map(|k| effective_guard(&branches, k)).collect();
        for s in sc.states(&i).unwrap() {
            let ev = Evaluator::on(&i, &s);
            let hits = effective.iter().filter(|g| ev.holds(g).unwrap()).count();
            prop_assert_eq!(hits, 1, "{:?} at {}", guards, s);
        }
        Ok(())
    })
}

pub fn sequential_associativity(cases: u32) -> Result<(), String> {
    run(cases, (statement(plain()), statement(plain()), statement(plain())), |(a, b, c)| {
        let i = interp();
        let sc = scope(&i);
        let sem = Semantics::new(&i);
        let (a, b, c) = (stmt(&a), stmt(&b), stmt(&c));
        let left = Stmt::seq(Stmt::seq(a.clone(), b.clone()), c.clone());
        let right = Stmt::seq(a.clone(), Stmt::seq(b.clone(), c));
        prop_assert_eq!(sem.interpret(&left, &sc).unwrap(), sem.interpret(&right, &sc).unwrap());
        let ab = Stmt::seq(a.clone(), b.clone());
        for s in sc.states(&i).unwrap() {
            let mut composed = BTreeSet::new();
            for t in image(&sem, &a, &sc, &s) {
                match t {
                    Terminal::Done => {
                        composed.insert(Terminal::Done);
                    }
                    Terminal::State(t) => composed.extend(image(&sem, &b, &sc, &t)),
                }
            }
            prop_assert_eq!(image(&sem, &ab, &sc, &s), composed);
        }
        Ok(())
    })
}

pub fn forgetful_law(cases: u32) -> Result<(), String> {
    let inputs = (statement(Allow { asserts: true, stop: false }), pred(), statement(plain()));
    run(cases, inputs, |(a, p, b)| {
        let i = interp();
        let sc = scope(&i);
        let sem = Semantics::new(&i);
        let full = stmt(&format!("{a}; ASSERT {p}; {b}"));
        let b = stmt(&b);
        let p = parse_predicate(&p).unwrap();
        let sigma = sc.states(&i).unwrap();
        let tail = sem.interpret(&b, &sc).unwrap();
        let restricted = ScopedRelation {
            pairs: tail.pairs.into_iter().filter(|(s, _)| Evaluator::on(&i, s).holds(&p).unwrap()).collect(),
        };
        prop_assert_eq!(sem.interpret(&full, &sc).unwrap(), diamond(&restricted, &sigma));
        Ok(())
    })
}

pub fn operational_matches_relational(cases: u32) -> Result<(), String> {
    run(cases, statement(Allow { asserts: false, stop: true }), |text| {
        let i = interp();
        let sc = scope(&i);
        let sem = Semantics::new(&i);
        let st = stmt(&text);
        for s in sc.states(&i).unwrap() {
            let out = sem.execute(&st, std::slice::from_ref(&s), &sc, 10_000, false).unwrap();
            prop_assert_eq!(out, image(&sem, &st, &sc, &s), "{} at {}", text, s);
        }
        Ok(())
    })
}

pub fn traces_prefix_closed_and_monotone(cases: u32) -> Result<(), String> {
    run(cases, (statement(plain()), 1usize..5), |(text, depth)| {
        let (m, i) = process_model(&text, "");
        let short = process_traces(&m, "p", depth, &i).unwrap();
        let long = process_traces(&m, "p", depth + 1, &i).unwrap();
        prop_assert!(short.is_subset(&long));
        for t in &long {
            prop_assert!(t.len() <= depth + 1);
            for k in 0..t.len() {
                prop_assert!(long.iter().any(|l| l[..] == t[..k]));
            }
        }
        let cut: BTreeSet<_> = long.iter().filter(|t| t.len() <= depth).cloned().collect();
        prop_assert_eq!(cut, short);
        Ok(())
    })
}

pub fn evaluators_agree(cases: u32) -> Result<(), String> {
    let guarantee = prop_oneof![Just(String::new()), pred().prop_map(|p| format!("GUARANTEE g1: {p} => x' >= x"))];
    run(cases, (statement(Allow { asserts: true, stop: true }), guarantee), |(text, guarantee)| {
        let (m, i) = process_model(&text, &guarantee);
        for po in generate(&m, &i, &GenOptions::default()).unwrap() {
            let fast = check(&po, &i).verdict;
            let slow = naive_check(&po, &i);
            prop_assert_eq!(fast.name(), slow.name(), "{} {}\n{}", po.id, po.sequent, text);
        }
        Ok(())
    })
}

fn process_model(body: &str, decls: &str) -> (slp::ast::SlpModel, Interpretation) {
    let text = format!(
        "MODEL m VARIABLES x y z INVARIANTS i: {TYPING} PROCESS p {decls} BODY {} END CHECK BOUND INT = 0..3 END",
        label(body)
    );
    model_of(&text)
}
