use super::eval::{EvalError, Evaluator};
use super::value::{Name, Value};
use crate::ast::{CheckSection, Context, Expr, Quantifier, SlpModel};
use std::collections::BTreeMap;

pub const DEFAULT_STATE_CAP: u64 = 10_000_000;
pub const DEFAULT_INT_BOUND: (i64, i64) = (-8, 8);

/// Finite interpretation of the context: carrier sets, constants and the
/// integer interval standing in for INT/NAT during enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct Interpretation {
    pub int_lo: i64,
    pub int_hi: i64,
    pub sets: BTreeMap<String, Value>,
    pub atoms: BTreeMap<String, Value>,
    pub constants: BTreeMap<String, Value>,
    /// Per-variable enumeration domains overriding typing inference.
    pub domains: BTreeMap<String, Expr>,
    pub state_cap: u64,
}

impl Default for Interpretation {
    fn default() -> Self {
        Interpretation::new(DEFAULT_INT_BOUND.0, DEFAULT_INT_BOUND.1)
    }
}

impl Interpretation {
    pub fn new(lo: i64, hi: i64) -> Interpretation {
        Interpretation {
            int_lo: lo,
            int_hi: hi,
            sets: BTreeMap::new(),
            atoms: BTreeMap::new(),
            constants: BTreeMap::new(),
            domains: BTreeMap::new(),
            state_cap: DEFAULT_STATE_CAP,
        }
    }

    pub fn nat_lo(&self) -> i64 {
        self.int_lo.max(0)
    }

    pub fn with_constant(mut self, name: &str, value: Value) -> Interpretation {
        self.constants.insert(name.to_string(), value);
        self
    }

    pub fn with_set(mut self, name: &str, atoms: &[&str]) -> Interpretation {
        let vals: Vec<Value> = atoms.iter().map(|a| Value::Atom(Name::from(*a))).collect();
        for (a, v) in atoms.iter().zip(&vals) {
            self.atoms.insert(a.to_string(), v.clone());
        }
        self.sets.insert(name.to_string(), Value::set(vals));
        self
    }

    pub fn with_domain(mut self, var: &str, domain: Expr) -> Interpretation {
        self.domains.insert(var.to_string(), domain);
        self
    }

    /// Build from a model's CHECK section; a model without one gets the
    /// default integer bound and no constants.
    pub fn from_model(model: &SlpModel) -> Result<Interpretation, EvalError> {
        match &model.check {
            Some(c) => Interpretation::from_check(c),
            None => Ok(Interpretation::default()),
        }
    }

    pub fn from_check(check: &CheckSection) -> Result<Interpretation, EvalError> {
        let (lo, hi) = check.bound.unwrap_or(DEFAULT_INT_BOUND);
        let mut interp = Interpretation::new(lo, hi);
        for (name, atoms) in &check.sets {
            let refs: Vec<&str> = atoms.iter().map(String::as_str).collect();
            interp = interp.with_set(name, &refs);
        }
        for (name, expr) in &check.consts {
            let v = Evaluator::new(&interp).eval(expr)?;
            interp.constants.insert(name.clone(), v);
        }
        for (name, expr) in &check.domains {
            interp.domains.insert(name.clone(), expr.clone());
        }
        Ok(interp)
    }

    pub fn int_range(&self) -> impl Iterator<Item = i64> {
        self.int_lo..=self.int_hi
    }
}

/// An axiom that the finite interpretation fails to satisfy.
#[derive(Clone, Debug, PartialEq)]
pub struct AxiomViolation {
    pub label: String,
    pub reason: String,
    pub witness: Vec<(String, Value)>,
}

/// Check every axiom (and that every set and constant is bound).
pub fn check_interpretation(context: &Context, interp: &Interpretation) -> Vec<AxiomViolation> {
    let mut out = Vec::new();
    for s in &context.sets {
        if !interp.sets.contains_key(&s.name) {
            out.push(AxiomViolation {
                label: s.name.clone(),
                reason: "carrier set has no interpretation".into(),
                witness: Vec::new(),
            });
        }
    }
    for c in &context.constants {
        if !interp.constants.contains_key(&c.name) {
            out.push(AxiomViolation {
                label: c.name.clone(),
                reason: "constant has no interpretation".into(),
                witness: Vec::new(),
            });
        }
    }
    let ev = Evaluator::new(interp);
    for ax in &context.axioms {
        let label = ax.label.text.clone();
        match &ax.predicate {
            Expr::Quant(Quantifier::ForAll, vars, body) => {
                match ev.find_binding(vars, body, Quantifier::ForAll, &[], false) {
                    Ok(None) => {}
                    Ok(Some(binding)) => out.push(AxiomViolation {
                        label,
                        reason: "axiom is false".into(),
                        witness: binding,
                    }),
                    Err(e) => out.push(AxiomViolation {
                        label,
                        reason: e.to_string(),
                        witness: Vec::new(),
                    }),
                }
            }
            p => match ev.holds(p) {
                Ok(true) => {}
                Ok(false) => out.push(AxiomViolation {
                    label,
                    reason: "axiom is false".into(),
                    witness: Vec::new(),
                }),
                Err(e) => out.push(AxiomViolation {
                    label,
                    reason: e.to_string(),
                    witness: Vec::new(),
                }),
            },
        }
    }
    out
}
