#![allow(dead_code)]

use slp::ast::{Expr, SlpModel};
use slp::kernel::Interpretation;
use slp::parser::{parse_expression, parse_model};
use std::path::PathBuf;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus_text(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn model_of(text: &str) -> (SlpModel, Interpretation) {
    let model = parse_model(text).expect("parse");
    let interp = Interpretation::from_model(&model).expect("interpretation");
    (model, interp)
}

pub fn corpus(name: &str) -> (SlpModel, Interpretation) {
    model_of(&corpus_text(name))
}

pub fn expr(src: &str) -> Expr {
    parse_expression(src).expect("expression")
}

pub fn corpus_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus dir")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "slp"))
        .collect();
    files.sort();
    files
}

/// Euclid, with gcd(a, 0) = a.
pub fn euclid(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn corpus_path_str(name: &str) -> String {
    corpus_dir().join(name).display().to_string()
}
