mod common;

use common::{corpus, corpus_text, model_of};
use slp::discharge::{check, check_all, naive_check, refutes, CheckOptions, Verdict};
use slp::po::{generate, Family, GenOptions, ProofObligation};

fn pos_of(m: &slp::ast::SlpModel, i: &slp::kernel::Interpretation) -> Vec<ProofObligation> {
    generate(m, i, &GenOptions::default()).unwrap()
}

fn asn_shapes(pos: &[ProofObligation], process: &str) -> Vec<String> {
    let prefix = format!("{process}.");
    pos.iter()
        .filter(|p| p.family == Family::Asn && p.id.starts_with(&prefix))
        .map(|p| p.sequent.to_string())
        .collect()
}

#[test]
fn assert_listings_yield_zero_to_three_obligations() {
    let (m, i) = corpus("asserts.slp");
    let pos = pos_of(&m, &i);
    let counts: Vec<usize> = (1..=4).map(|k| asn_shapes(&pos, &format!("listing{k}")).len()).collect();
    assert_eq!(counts, vec![0, 1, 2, 3]);
}

#[test]
fn chained_asserts_give_two_sequents() {
    let (m, i) = corpus("asserts.slp");
    let pos = pos_of(&m, &i);
    assert_eq!(asn_shapes(&pos, "chained"), vec!["HYP ⊢ e : s \\/ {e}", "HYP, e : s ⊢ s /= {}"]);
}

#[test]
fn composite_assert_gives_one_conjoined_sequent() {
    let (m, i) = corpus("asserts.slp");
    let pos = pos_of(&m, &i);
    let shapes = asn_shapes(&pos, "composite");
    assert_eq!(shapes.len(), 1);
    assert!(shapes[0].starts_with("HYP ⊢ e : s \\/ {e} & "), "{}", shapes[0]);
}

#[test]
fn chained_asserts_discharge() {
    let (m, i) = corpus("asserts.slp");
    for po in pos_of(&m, &i).iter().filter(|p| p.id.starts_with("chained.") || p.id.starts_with("composite.")) {
        assert_eq!(check(po, &i).verdict, Verdict::Discharged, "{}", po.id);
    }
}

#[test]
fn heater_covers_the_catalogue() {
    let (m, i) = corpus("heater.slp");
    let report = check_all(&m, &i, &CheckOptions::default()).unwrap();
    for fam in ["WD", "INV", "GRT", "FIS_RELY", "CLO_RELY_REFL", "CLO_RELY_TRANS", "CMP", "AXM_SAT"] {
        let of: Vec<_> = report.results.iter().filter(|r| r.family.as_str() == fam).collect();
        assert!(!of.is_empty(), "no {fam}");
        assert!(of.iter().all(|r| r.verdict == Verdict::Discharged), "{fam}");
    }
    assert_eq!(report.exit_code(), 0);
}

#[test]
fn widened_sensor_is_caught_with_a_real_witness() {
    let text = corpus_text("heater.slp").replace("t + Delta & h'", "t + Delta + 100 & h'");
    let (m, i) = model_of(&text);
    let pos = pos_of(&m, &i);
    let mut violated = 0;
    for po in &pos {
        if let Verdict::Violated(w) = check(po, &i).verdict {
            violated += 1;
            assert!(refutes(po, &w, &i).unwrap(), "{}", po.id);
        }
    }
    assert!(violated >= 1);
}

#[test]
fn gcd1b_discharges_everything() {
    let (m, i) = corpus("gcd1b.slp");
    let report = check_all(&m, &i, &CheckOptions::default()).unwrap();
    let s = report.summary();
    assert_eq!((s.violated, s.skipped), (0, 0), "{}", report.table());
    assert_eq!(s.discharged, s.total);
}

#[test]
fn gcd1b_needs_positive_loop_values() {
    let text = corpus_text("gcd1b.slp").replace(" & y1 > 0 & y2 > 0", " & y2 > 0");
    assert_ne!(text, corpus_text("gcd1b.slp"));
    let (m, i) = model_of(&text);
    let report = check_all(&m, &i, &CheckOptions::default()).unwrap();
    assert!(report.summary().violated >= 1, "{}", report.table());
}

#[test]
fn gcd0_refines_its_machine() {
    let (m, i) = corpus("gcd0.slp");
    let report = check_all(&m, &i, &CheckOptions::default()).unwrap();
    let r = report.results.iter().find(|r| r.family == Family::RefGrt).unwrap();
    assert_eq!(r.verdict, Verdict::Discharged);
    let union = CheckOptions { gen: GenOptions { ref_union: true, ..GenOptions::default() }, ..CheckOptions::default() };
    assert_eq!(check_all(&m, &i, &union).unwrap().exit_code(), 0);
}

#[test]
fn negated_invariant_conjuncts_are_noticed() {
    let base = corpus_text("heater.slp");
    for (from, to) in [
        ("temp: t : INT", "temp: not(t : INT)"),
        ("heater: h : BOOL", "heater: not(h : BOOL)"),
        ("alarm: alarm : BOOL", "alarm: not(alarm : BOOL)"),
    ] {
        let (m, i) = model_of(&base.replace(from, to));
        let mut pos = pos_of(&m, &i);
        pos.sort_by_key(|p| matches!(p.family, Family::FisRely | Family::CloRelyTrans));
        let hit = pos.iter().find(|po| matches!(check(po, &i).verdict, Verdict::Violated(_)));
        assert!(hit.is_some(), "{to}");
    }
}

#[test]
fn evaluators_agree_on_every_corpus_obligation() {
    for path in common::corpus_files() {
        let (m, i) = model_of(&std::fs::read_to_string(&path).unwrap());
        for po in pos_of(&m, &i) {
            let fast = check(&po, &i).verdict;
            let slow = naive_check(&po, &i);
            assert_eq!(fast.name(), slow.name(), "{}: {}", path.display(), po.id);
        }
    }
}
