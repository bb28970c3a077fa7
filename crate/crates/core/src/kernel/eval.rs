use super::interp::Interpretation;
use super::value::{Name, State, Value};
use crate::ast::{BinOp, Expr, Quantifier};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound-name: `{0}`")]
    UnboundName(String),
    #[error("partial-application: `{0}` is not defined at {1}")]
    PartialApplication(String, String),
    #[error("div-by-zero")]
    DivByZero,
    #[error("overflow: integer result out of range")]
    Overflow,
    #[error("unsupported-construct: {0}")]
    Unsupported(String),
    #[error("type-error: {0}")]
    Type(String),
    #[error("state-space-exceeded: {needed} candidates over cap {cap}")]
    StateSpaceExceeded { needed: u128, cap: u64 },
}

pub type EvalResult<T> = Result<T, EvalError>;

const POWERSET_LIMIT: usize = 16;

/// The part of a quantifier body restricting its bound names.
fn range_of(q: Quantifier, body: &Expr) -> Option<&Expr> {
    match (q, body) {
        (Quantifier::ForAll, Expr::Bin(BinOp::Implies, ante, _)) => Some(ante),
        (Quantifier::Exists, b) => Some(b),
        _ => None,
    }
}

/// Evaluator over an optional pre-state and post-state. Names are looked
/// up in bound variables first, then the state, then constants, carrier
/// sets and atoms. Primed names read the post-state; a bound name `x'`
/// also satisfies them, which the sequent checker relies on.
#[derive(Clone, Copy)]
pub struct Evaluator<'a> {
    pub interp: &'a Interpretation,
    pub state: Option<&'a State>,
    pub post: Option<&'a State>,
    /// Domains for bound names without a typing conjunct, keyed by the
    /// variable a generated name (`x~1`) stands for.
    pub fallback: Option<&'a BTreeMap<String, Vec<Value>>>,
}

type Env = Vec<(Name, Value)>;

impl<'a> Evaluator<'a> {
    pub fn new(interp: &'a Interpretation) -> Evaluator<'a> {
        Evaluator { interp, state: None, post: None, fallback: None }
    }

    pub fn on(interp: &'a Interpretation, state: &'a State) -> Evaluator<'a> {
        Evaluator { interp, state: Some(state), post: None, fallback: None }
    }

    pub fn on_pair(interp: &'a Interpretation, pre: &'a State, post: &'a State) -> Evaluator<'a> {
        Evaluator { interp, state: Some(pre), post: Some(post), fallback: None }
    }

    pub fn with_fallback(mut self, f: &'a BTreeMap<String, Vec<Value>>) -> Evaluator<'a> {
        self.fallback = Some(f);
        self
    }

    pub fn eval(&self, e: &Expr) -> EvalResult<Value> {
        self.ev(e, &mut Vec::new())
    }

    pub fn holds(&self, e: &Expr) -> EvalResult<bool> {
        self.truth(e, &mut Vec::new())
    }

    pub fn eval_with(&self, e: &Expr, bound: &[(Name, Value)]) -> EvalResult<Value> {
        self.ev(e, &mut bound.to_vec())
    }

    pub fn holds_with(&self, e: &Expr, bound: &[(Name, Value)]) -> EvalResult<bool> {
        self.truth(e, &mut bound.to_vec())
    }

    /// First binding of `vars` (in domain order) under which `body`
    /// evaluates to `want`. Domains are inferred as for quantifiers.
    pub fn find_binding(
        &self,
        vars: &[String],
        body: &Expr,
        q: Quantifier,
        outer: &[(Name, Value)],
        want: bool,
    ) -> EvalResult<Option<Vec<(String, Value)>>> {
        let mut env = outer.to_vec();
        let names: Vec<Name> = vars.iter().map(|v| Name::from(v.as_str())).collect();
        let mut found = None;
        self.search(&names, body, q, &mut env, &mut |ev, env| {
            if ev.truth(body, env)? == want {
                let n = env.len();
                found = Some(
                    env[n - names.len()..]
                        .iter()
                        .map(|(k, v)| (k.to_string(), v.clone()))
                        .collect(),
                );
                return Ok(true);
            }
            Ok(false)
        })?;
        Ok(found)
    }

    /// Enumerate bindings for `names` (pushed onto `env`), stopping when
    /// `visit` returns true. Returns whether it stopped early. Bindings
    /// falsifying a conjunct of the quantifier's range are skipped as soon
    /// as that conjunct's bound names are all bound.
    fn search(
        &self,
        names: &[Name],
        body: &Expr,
        q: Quantifier,
        env: &mut Env,
        visit: &mut dyn FnMut(&Self, &mut Env) -> EvalResult<bool>,
    ) -> EvalResult<bool> {
        let mut levels: Vec<Vec<&Expr>> = vec![Vec::new(); names.len()];
        if let Some(scope) = range_of(q, body) {
            for c in scope.conjuncts() {
                let free = c.free_names().plain;
                if let Some(k) = names.iter().rposition(|n| free.iter().any(|f| **f == **n)) {
                    levels[k].push(c);
                }
            }
        }
        self.search_at(names, 0, &levels, body, q, env, visit)
    }

    #[allow(clippy::too_many_arguments)]
    fn search_at(
        &self,
        names: &[Name],
        k: usize,
        levels: &[Vec<&Expr>],
        body: &Expr,
        q: Quantifier,
        env: &mut Env,
        visit: &mut dyn FnMut(&Self, &mut Env) -> EvalResult<bool>,
    ) -> EvalResult<bool> {
        let Some(first) = names.get(k) else {
            return visit(self, env);
        };
        let domain = self.quant_domain(first, &names[k + 1..], body, q, env)?;
        'values: for v in domain {
            env.push((first.clone(), v));
            for c in &levels[k] {
                if let Ok(false) = self.truth(c, env) {
                    env.pop();
                    continue 'values;
                }
            }
            let stop = self.search_at(names, k + 1, levels, body, q, env, visit);
            env.pop();
            if stop? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn quant_domain(
        &self,
        var: &str,
        later: &[Name],
        body: &Expr,
        q: Quantifier,
        env: &mut Env,
    ) -> EvalResult<Vec<Value>> {
        if let Some(scope) = range_of(q, body) {
            for c in scope.conjuncts() {
                let Expr::Bin(op, lhs, rhs) = c else { continue };
                if !matches!(&**lhs, Expr::Var(n) if n == var) {
                    continue;
                }
                let free = rhs.free_names();
                if free.plain.iter().any(|n| n == var || later.iter().any(|l| &**l == n)) {
                    continue;
                }
                match op {
                    BinOp::In => return Ok(self.set_of(rhs, env)?.iter().cloned().collect()),
                    BinOp::Subset => return powerset(&*self.set_of(rhs, env)?),
                    BinOp::Eq => return Ok(vec![self.ev(rhs, env)?]),
                    _ => {}
                }
            }
        }
        let base = var.split('~').next().unwrap_or(var);
        if let Some(vals) = self.fallback.and_then(|f| f.get(base)) {
            return Ok(vals.clone());
        }
        Ok(self.interp.int_range().map(Value::Int).collect())
    }

    fn lookup(&self, name: &str, env: &Env) -> EvalResult<Value> {
        if let Some((_, v)) = env.iter().rev().find(|(k, _)| &**k == name) {
            return Ok(v.clone());
        }
        if let Some(v) = self.state.and_then(|s| s.get(name)) {
            return Ok(v.clone());
        }
        let i = self.interp;
        if let Some(v) = i.constants.get(name).or_else(|| i.sets.get(name)).or_else(|| i.atoms.get(name)) {
            return Ok(v.clone());
        }
        Err(EvalError::UnboundName(name.to_string()))
    }

    fn lookup_primed(&self, name: &str, env: &Env) -> EvalResult<Value> {
        let key = format!("{name}'");
        if let Some((_, v)) = env.iter().rev().find(|(k, _)| **k == *key) {
            return Ok(v.clone());
        }
        match self.post.and_then(|s| s.get(name)) {
            Some(v) => Ok(v.clone()),
            None => Err(EvalError::UnboundName(key)),
        }
    }

    fn int(&self, e: &Expr, env: &mut Env) -> EvalResult<i64> {
        match self.ev(e, env)? {
            Value::Int(i) => Ok(i),
            v => Err(EvalError::Type(format!("expected integer, found {v}"))),
        }
    }

    fn truth(&self, e: &Expr, env: &mut Env) -> EvalResult<bool> {
        match e {
            Expr::Bool(b) => Ok(*b),
            Expr::Not(p) => Ok(!self.truth(p, env)?),
            Expr::Bin(BinOp::And, a, b) => Ok(self.truth(a, env)? && self.truth(b, env)?),
            Expr::Bin(BinOp::Or, a, b) => Ok(self.truth(a, env)? || self.truth(b, env)?),
            Expr::Bin(BinOp::Implies, a, b) => Ok(!self.truth(a, env)? || self.truth(b, env)?),
            Expr::Bin(BinOp::Equiv, a, b) => Ok(self.truth(a, env)? == self.truth(b, env)?),
            Expr::Bin(BinOp::In, a, s) => {
                let v = self.ev(a, env)?;
                self.member(&v, s, env)
            }
            Expr::Bin(BinOp::NotIn, a, s) => {
                let v = self.ev(a, env)?;
                Ok(!self.member(&v, s, env)?)
            }
            Expr::Bin(BinOp::Subset, a, s) => {
                let sub = self.set_of(a, env)?;
                for v in sub.iter() {
                    if !self.member(v, s, env)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Expr::Quant(q, vars, body) => {
                let names: Vec<Name> = vars.iter().map(|v| Name::from(v.as_str())).collect();
                let want = *q == Quantifier::Exists;
                let stopped = self.search(&names, body, *q, env, &mut |ev, env| {
                    Ok(ev.truth(body, env)? == want)
                })?;
                Ok(if want { stopped } else { !stopped })
            }
            _ => match self.ev(e, env)? {
                Value::Bool(b) => Ok(b),
                v => Err(EvalError::Type(format!("expected predicate, found {v}"))),
            },
        }
    }

    /// Membership without materialising unbounded sets.
    fn member(&self, v: &Value, s: &Expr, env: &mut Env) -> EvalResult<bool> {
        match s {
            Expr::IntSet => Ok(matches!(v, Value::Int(_))),
            Expr::NatSet => Ok(matches!(v, Value::Int(i) if *i >= 0)),
            Expr::Nat1Set => Ok(matches!(v, Value::Int(i) if *i >= 1)),
            Expr::BoolSet => Ok(matches!(v, Value::Bool(_))),
            Expr::Bin(BinOp::Interval, lo, hi) => {
                let (lo, hi) = (self.int(lo, env)?, self.int(hi, env)?);
                Ok(matches!(v, Value::Int(i) if lo <= *i && *i <= hi))
            }
            Expr::Bin(BinOp::Union, a, b) => Ok(self.member(v, a, env)? || self.member(v, b, env)?),
            Expr::Bin(BinOp::Inter, a, b) => Ok(self.member(v, a, env)? && self.member(v, b, env)?),
            Expr::Bin(BinOp::Diff, a, b) => Ok(self.member(v, a, env)? && !self.member(v, b, env)?),
            _ => Ok(self.set_of(s, env)?.contains(v)),
        }
    }

    fn set_of(&self, e: &Expr, env: &mut Env) -> EvalResult<Arc<BTreeSet<Value>>> {
        match self.ev(e, env)? {
            Value::Set(s) => Ok(s),
            v => Err(EvalError::Type(format!("expected set, found {v}"))),
        }
    }

    fn ev(&self, e: &Expr, env: &mut Env) -> EvalResult<Value> {
        let i = self.interp;
        Ok(match e {
            Expr::Int(n) => Value::Int(*n),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Var(n) => self.lookup(n, env)?,
            Expr::Primed(n) => self.lookup_primed(n, env)?,
            Expr::IntSet => Value::set(i.int_range().map(Value::Int)),
            Expr::NatSet => Value::set((i.nat_lo()..=i.int_hi).map(Value::Int)),
            Expr::Nat1Set => Value::set((i.int_lo.max(1)..=i.int_hi).map(Value::Int)),
            Expr::BoolSet => Value::set([Value::Bool(false), Value::Bool(true)]),
            Expr::EmptySet => Value::empty_set(),
            Expr::SetLit(items) => {
                let mut out = BTreeSet::new();
                for it in items {
                    out.insert(self.ev(it, env)?);
                }
                Value::Set(Arc::new(out))
            }
            Expr::Neg(a) => Value::Int(self.int(a, env)?.checked_neg().ok_or(EvalError::Overflow)?),
            Expr::Not(_) | Expr::Quant(..) => Value::Bool(self.truth(e, env)?),
            Expr::BoolOf(p) => Value::Bool(self.truth(p, env)?),
            Expr::Apply(f, arg) => {
                let fv = self.ev(f, env)?;
                let av = self.ev(arg, env)?;
                if fv.as_set().is_none() {
                    return Err(EvalError::Type(format!("cannot apply {fv}")));
                }
                match fv.apply(&av) {
                    Some(r) => r.clone(),
                    None => {
                        let fname = match &**f {
                            Expr::Var(n) => n.clone(),
                            _ => "function".to_string(),
                        };
                        return Err(EvalError::PartialApplication(fname, av.to_string()));
                    }
                }
            }
            Expr::Bin(op, a, b) => self.binary(*op, a, b, env)?,
            Expr::Unsupported(kind, args) => self.extended(kind, args, env)?,
        })
    }

    fn binary(&self, op: BinOp, a: &Expr, b: &Expr, env: &mut Env) -> EvalResult<Value> {
        use BinOp::*;
        let arith = |f: fn(i64, i64) -> Option<i64>, x: i64, y: i64| f(x, y).ok_or(EvalError::Overflow);
        Ok(match op {
            Add => Value::Int(arith(i64::checked_add, self.int(a, env)?, self.int(b, env)?)?),
            Sub => Value::Int(arith(i64::checked_sub, self.int(a, env)?, self.int(b, env)?)?),
            Mul => Value::Int(arith(i64::checked_mul, self.int(a, env)?, self.int(b, env)?)?),
            Div | Mod => {
                let (x, y) = (self.int(a, env)?, self.int(b, env)?);
                if y == 0 {
                    return Err(EvalError::DivByZero);
                }
                let r = if op == Div { x.checked_div_euclid(y) } else { x.checked_rem_euclid(y) };
                Value::Int(r.ok_or(EvalError::Overflow)?)
            }
            Union | Inter | Diff => {
                let (x, y) = (self.set_of(a, env)?, self.set_of(b, env)?);
                let r: BTreeSet<Value> = match op {
                    Union => x.union(&y).cloned().collect(),
                    Inter => x.intersection(&y).cloned().collect(),
                    _ => x.difference(&y).cloned().collect(),
                };
                Value::Set(Arc::new(r))
            }
            Interval => {
                let (lo, hi) = (self.int(a, env)?, self.int(b, env)?);
                let width = (hi as i128) - (lo as i128) + 1;
                if width > self.interp.state_cap as i128 {
                    return Err(EvalError::StateSpaceExceeded {
                        needed: width.max(0) as u128,
                        cap: self.interp.state_cap,
                    });
                }
                Value::set((lo..=hi).map(Value::Int))
            }
            Maplet => Value::pair(self.ev(a, env)?, self.ev(b, env)?),
            Eq => Value::Bool(self.ev(a, env)? == self.ev(b, env)?),
            Neq => Value::Bool(self.ev(a, env)? != self.ev(b, env)?),
            Lt => Value::Bool(self.int(a, env)? < self.int(b, env)?),
            Le => Value::Bool(self.int(a, env)? <= self.int(b, env)?),
            Gt => Value::Bool(self.int(a, env)? > self.int(b, env)?),
            Ge => Value::Bool(self.int(a, env)? >= self.int(b, env)?),
            In | NotIn | Subset | And | Or | Implies | Equiv => {
                Value::Bool(self.truth(&Expr::bin(op, a.clone(), b.clone()), env)?)
            }
        })
    }

    fn extended(&self, kind: &str, args: &[Expr], env: &mut Env) -> EvalResult<Value> {
        match (kind, args) {
            ("card", [s]) => Ok(Value::Int(self.set_of(s, env)?.len() as i64)),
            ("dom", [f]) | ("ran", [f]) => {
                let g = self.set_of(f, env)?;
                let mut out = BTreeSet::new();
                for p in g.iter() {
                    let Value::Pair(p) = p else {
                        return Err(EvalError::Type(format!("{kind} of non-relation")));
                    };
                    out.insert(if kind == "dom" { p.0.clone() } else { p.1.clone() });
                }
                Ok(Value::Set(Arc::new(out)))
            }
            ("comprehension", [Expr::SetLit(vars), body]) => {
                let names: Vec<Name> = vars
                    .iter()
                    .map(|v| match v {
                        Expr::Var(n) => Ok(Name::from(n.as_str())),
                        _ => Err(EvalError::Unsupported("comprehension pattern".into())),
                    })
                    .collect::<EvalResult<_>>()?;
                let mut out = BTreeSet::new();
                self.search(&names, body, Quantifier::Exists, env, &mut |ev, env| {
                    if ev.truth(body, env)? {
                        let n = env.len();
                        let mut it = env[n - names.len()..].iter().map(|(_, v)| v.clone());
                        let first = it.next().expect("non-empty pattern");
                        out.insert(it.fold(first, Value::pair));
                    }
                    Ok(false)
                })?;
                Ok(Value::Set(Arc::new(out)))
            }
            _ => Err(EvalError::Unsupported(kind.to_string())),
        }
    }
}

fn powerset(base: &BTreeSet<Value>) -> EvalResult<Vec<Value>> {
    if base.len() > POWERSET_LIMIT {
        return Err(EvalError::StateSpaceExceeded {
            needed: 1u128 << base.len().min(127),
            cap: 1 << POWERSET_LIMIT,
        });
    }
    let items: Vec<&Value> = base.iter().collect();
    Ok((0u32..(1 << items.len()))
        .map(|mask| {
            Value::set(
                items
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask & (1 << k) != 0)
                    .map(|(_, v)| (*v).clone()),
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_predicate;

    fn euclid(a: i64, b: i64) -> i64 {
        let (mut a, mut b) = (a, b);
        while b != 0 {
            let t = a % b;
            a = b;
            b = t;
        }
        a
    }

    fn gcd_table(lo: i64, hi: i64) -> Value {
        Value::set((lo..=hi).flat_map(|a| {
            (lo..=hi).map(move |b| Value::pair(Value::pair(Value::Int(a), Value::Int(b)), Value::Int(euclid(a, b))))
        }))
    }

    fn interp() -> Interpretation {
        Interpretation::new(0, 8).with_constant("gcd", gcd_table(0, 8))
    }

    fn ev(src: &str, state: &State) -> EvalResult<Value> {
        let i = interp();
        Evaluator::on(&i, state).eval(&parse_predicate(src).unwrap())
    }

    #[test]
    fn interval_around_t() {
        let s = State::new().with("t", Value::Int(10)).with("delta", Value::Int(2));
        assert_eq!(ev("t - delta .. t + delta", &s).unwrap(), Value::set((8..=12).map(Value::Int)));
    }

    #[test]
    fn gcd_lookup() {
        assert_eq!(ev("gcd(6 |-> 4)", &State::new()).unwrap(), Value::Int(2));
        assert_eq!(ev("gcd(5 |-> 5)", &State::new()).unwrap(), Value::Int(5));
        assert!(matches!(ev("gcd(9 |-> 1)", &State::new()), Err(EvalError::PartialApplication(..))));
    }

    #[test]
    fn quantifiers_over_bounds() {
        let s = State::new();
        assert_eq!(ev("!a.(a : NAT => gcd(a |-> a) = a)", &s).unwrap(), Value::Bool(true));
        assert_eq!(ev("#x.(x : 1..0)", &s).unwrap(), Value::Bool(false));
        assert_eq!(ev("#x.(x : 3..5 & x * x = 16)", &s).unwrap(), Value::Bool(true));
    }

    #[test]
    fn heater_guarantee_shape() {
        let i = Interpretation::new(-10, 50).with_constant("TEMP_HIGH", Value::Int(30));
        let pre = State::new().with("t", Value::Int(35)).with("h", Value::Bool(true));
        let post = State::new().with("t", Value::Int(35)).with("h", Value::Bool(false));
        let p = parse_predicate("t > TEMP_HIGH & h = TRUE => h' = FALSE").unwrap();
        assert!(Evaluator::on_pair(&i, &pre, &post).holds(&p).unwrap());
    }

    #[test]
    fn errors() {
        let s = State::new();
        assert_eq!(ev("1 / 0", &s), Err(EvalError::DivByZero));
        assert_eq!(ev("zz + 1", &s), Err(EvalError::UnboundName("zz".into())));
        assert_eq!(ev("9223372036854775807 + 1", &s), Err(EvalError::Overflow));
        assert!(matches!(ev("POW(1..2)", &s), Err(EvalError::Unsupported(_))));
    }

    #[test]
    fn unbounded_membership_is_mathematical() {
        assert_eq!(ev("100 : NAT", &State::new()).unwrap(), Value::Bool(true));
        assert_eq!(ev("-1 : NAT", &State::new()).unwrap(), Value::Bool(false));
    }

    #[test]
    fn euclidean_division() {
        assert_eq!(ev("-7 / 2", &State::new()).unwrap(), Value::Int(-4));
        assert_eq!(ev("-7 mod 2", &State::new()).unwrap(), Value::Int(1));
    }
}
