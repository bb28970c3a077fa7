mod common;

use common::{corpus, corpus_text, expr, model_of};
use slp::kernel::Interpretation;
use slp::trace::{
    check_divergence, check_inclusion, machine_traces, process_traces, Divergence, Inclusion, ParallelMode,
    TraceOptions,
};
use std::collections::BTreeSet;

fn small(interp: Interpretation, x1: &str, x2: &str) -> Interpretation {
    interp.with_domain("x1", expr(x1)).with_domain("x2", expr(x2))
}

fn all_events() -> BTreeSet<String> {
    ["copy1", "copy2", "sub1", "sub2", "gcd"].iter().map(|s| s.to_string()).collect()
}

fn traces(list: &[&[&str]]) -> BTreeSet<Vec<String>> {
    list.iter().map(|t| t.iter().map(|s| s.to_string()).collect()).collect()
}

#[test]
fn gcd1a_equal_inputs_skip_the_loop() {
    let (m, i) = corpus("gcd1a.slp");
    let i = small(i, "1..1", "1..1");
    let got = machine_traces(&m, &all_events(), 6, &i).unwrap();
    assert_eq!(got, traces(&[&[], &["copy1"], &["copy1", "copy2"], &["copy1", "copy2", "gcd"]]));
}

#[test]
fn gcd1a_subtracts_once() {
    let (m, i) = corpus("gcd1a.slp");
    let i = small(i, "2..2", "1..1");
    let got = machine_traces(&m, &all_events(), 8, &i).unwrap();
    assert!(got.contains(&vec!["copy1".into(), "copy2".into(), "sub1".into(), "gcd".into()]));
    assert!(!got.iter().any(|t| t.contains(&"sub2".to_string())));
}

#[test]
fn machine_traces_restrict_to_visible_events() {
    let (m, i) = corpus("gcd1a.slp");
    let i = small(i, "2..2", "1..1");
    let visible: BTreeSet<String> = ["copy1", "gcd"].iter().map(|s| s.to_string()).collect();
    let got = machine_traces(&m, &visible, 8, &i).unwrap();
    assert_eq!(got, traces(&[&[], &["copy1"], &["copy1", "gcd"]]));
}

#[test]
fn gcd1b_deterministic_run() {
    let (m, i) = corpus("gcd1b.slp");
    let i = small(i, "2..2", "1..1");
    let got = process_traces(&m, "main", 8, &i).unwrap();
    let full: Vec<Vec<String>> = vec![vec!["cp1".into(), "cp2".into()], vec!["s1".into()], vec!["fin".into()]];
    let want: BTreeSet<Vec<Vec<String>>> = (0..=full.len()).map(|k| full[..k].to_vec()).collect();
    assert_eq!(got, want);
}

#[test]
fn process_traces_are_prefix_closed() {
    let (m, i) = corpus("gcd1b.slp");
    let i = small(i, "1..3", "1..3");
    let got = process_traces(&m, "main", 6, &i).unwrap();
    for t in &got {
        for k in 0..t.len() {
            assert!(got.iter().any(|g| g[..] == t[..k]), "missing prefix of {t:?}");
        }
    }
}

#[test]
fn gcd1b_refines_gcd1a() {
    let (m, i) = corpus("gcd1b.slp");
    let i = small(i, "1..5", "1..5");
    let opts = TraceOptions { depth: 18, ..TraceOptions::default() };
    assert_eq!(check_inclusion(&m, "main", &i, &opts).unwrap(), Inclusion::Discharged);
    assert_eq!(check_divergence(&m, "main", &i).unwrap(), Divergence::Discharged);
}

#[test]
fn additive_mutation_breaks_inclusion() {
    let text = corpus_text("gcd1b.slp").replace("s1: y1 := y1 - y2", "s1: y1 := y1 + y2");
    let (m, i) = model_of(&text);
    let i = small(i, "1..5", "1..5");
    match check_inclusion(&m, "main", &i, &TraceOptions::default()).unwrap() {
        Inclusion::Violated { mapped, process_trace, .. } => {
            assert!(mapped.len() <= 4, "{mapped:?}");
            assert_eq!(mapped.last().map(String::as_str), Some("sub1"));
            assert!(!process_trace.is_empty());
        }
        Inclusion::Discharged => panic!("mutation not detected"),
    }
}

#[test]
fn atomic_mode_accepts_the_serial_abstraction_too() {
    let (m, i) = corpus("gcd1b.slp");
    let i = small(i, "1..3", "1..3");
    let opts = TraceOptions { depth: 10, mode: ParallelMode::Atomic, workers: 1 };
    assert_eq!(check_inclusion(&m, "main", &i, &opts).unwrap(), Inclusion::Discharged);
}

#[test]
fn worker_count_does_not_change_the_verdict() {
    let text = corpus_text("gcd1b.slp").replace("s1: y1 := y1 - y2", "s1: y1 := y1 + y2");
    let (m, i) = model_of(&text);
    let i = small(i, "1..4", "1..4");
    let one = check_inclusion(&m, "main", &i, &TraceOptions { workers: 1, ..TraceOptions::default() }).unwrap();
    let many = check_inclusion(&m, "main", &i, &TraceOptions { workers: 8, ..TraceOptions::default() }).unwrap();
    assert_eq!(one, many);
}

#[test]
fn missing_refmap_is_an_error() {
    let (m, i) = corpus("gcd0.slp");
    assert!(check_inclusion(&m, "main", &i, &TraceOptions::default()).is_err());
}
