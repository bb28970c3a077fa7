use super::eval::{EvalError, EvalResult, Evaluator};
use super::interp::Interpretation;
use super::value::{Name, State, Value};
use crate::ast::{BinOp, Expr};
use crate::scope::ScopeContext;

/// Finite enumeration domain of one variable, kept as an expression so
/// it can also appear inside sequents.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Elems(Expr),
    Subsets(Expr),
}

impl Domain {
    pub fn values(&self, interp: &Interpretation) -> EvalResult<Vec<Value>> {
        let ev = Evaluator::new(interp);
        match self {
            Domain::Elems(e) => match ev.eval(e)? {
                Value::Set(s) => Ok(s.iter().cloned().collect()),
                v => Err(EvalError::Type(format!("domain {v} is not a set"))),
            },
            Domain::Subsets(e) => {
                let base = match ev.eval(e)? {
                    Value::Set(s) => s,
                    v => return Err(EvalError::Type(format!("domain {v} is not a set"))),
                };
                if base.len() > 20 {
                    return Err(EvalError::StateSpaceExceeded {
                        needed: 1u128 << base.len().min(127),
                        cap: interp.state_cap,
                    });
                }
                let items: Vec<&Value> = base.iter().collect();
                let mut subsets: Vec<Value> = (0u64..(1 << items.len()))
                    .map(|m| {
                        Value::set(
                            items
                                .iter()
                                .enumerate()
                                .filter(|(k, _)| m & (1 << k) != 0)
                                .map(|(_, v)| (*v).clone()),
                        )
                    })
                    .collect();
                subsets.sort();
                Ok(subsets)
            }
        }
    }

    /// The typing predicate `subject : D` (or `subject <: D`).
    pub fn membership(&self, subject: Expr) -> Expr {
        match self {
            Domain::Elems(e) => Expr::member(subject, e.clone()),
            Domain::Subsets(e) => Expr::bin(BinOp::Subset, subject, e.clone()),
        }
    }
}

/// Replace the unbounded number sets by the integer bound.
pub fn bounded(e: &Expr, interp: &Interpretation) -> Expr {
    let iv = |lo: i64| Expr::bin(BinOp::Interval, Expr::Int(lo), Expr::Int(interp.int_hi));
    e.substitute(&|x| match x {
        Expr::IntSet => Some(iv(interp.int_lo)),
        Expr::NatSet => Some(iv(interp.nat_lo())),
        Expr::Nat1Set => Some(iv(interp.int_lo.max(1))),
        _ => None,
    })
}

/// Domain of `var` from the typing conjuncts of `invariant`, unless the
/// interpretation overrides it.
pub fn infer_domain(var: &str, scope_vars: &[String], invariant: &Expr, interp: &Interpretation) -> Domain {
    if let Some(d) = interp.domains.get(var) {
        return Domain::Elems(bounded(d, interp));
    }
    let mut elems: Option<Expr> = None;
    let mut subsets: Option<Expr> = None;
    for c in invariant.conjuncts() {
        let Expr::Bin(op @ (BinOp::In | BinOp::Subset), lhs, rhs) = c else { continue };
        if !matches!(&**lhs, Expr::Var(n) if n == var) {
            continue;
        }
        if rhs.free_names().plain.iter().any(|n| scope_vars.contains(n)) || rhs.contains_unsupported().is_some() {
            continue;
        }
        let slot = if *op == BinOp::In { &mut elems } else { &mut subsets };
        let rhs = bounded(rhs, interp);
        *slot = Some(match slot.take() {
            None => rhs,
            Some(prev) => Expr::bin(BinOp::Inter, prev, rhs),
        });
    }
    match (elems, subsets) {
        (Some(e), _) => Domain::Elems(e),
        (None, Some(s)) => Domain::Subsets(s),
        (None, None) => Domain::Elems(Expr::bin(
            BinOp::Interval,
            Expr::Int(interp.int_lo),
            Expr::Int(interp.int_hi),
        )),
    }
}

/// The candidate space of a set of variables, sorted by name.
#[derive(Clone, Debug)]
pub struct Space {
    pub vars: Vec<(Name, Domain, Vec<Value>)>,
}

impl Space {
    pub fn new(vars: &[String], invariant: &Expr, interp: &Interpretation) -> EvalResult<Space> {
        let space = Space::uncapped(vars, invariant, interp)?;
        space.check_cap(interp)?;
        Ok(space)
    }

    /// Like `new`, without the state-space cap.
    pub fn uncapped(vars: &[String], invariant: &Expr, interp: &Interpretation) -> EvalResult<Space> {
        let mut names: Vec<&String> = vars.iter().collect();
        names.sort();
        names.dedup();
        let mut out = Vec::new();
        for n in names {
            let d = infer_domain(n, vars, invariant, interp);
            let vals = d.values(interp)?;
            out.push((Name::from(n.as_str()), d, vals));
        }
        Ok(Space { vars: out })
    }

    pub fn check_cap(&self, interp: &Interpretation) -> EvalResult<()> {
        let size = self.size();
        if size > interp.state_cap as u128 {
            return Err(EvalError::StateSpaceExceeded { needed: size, cap: interp.state_cap });
        }
        Ok(())
    }

    pub fn of_scope(scope: &ScopeContext, interp: &Interpretation) -> EvalResult<Space> {
        Space::new(&scope.vars(), &scope.invariant(), interp)
    }

    pub fn size(&self) -> u128 {
        self.vars.iter().fold(1u128, |acc, (_, _, v)| acc.saturating_mul(v.len() as u128))
    }

    pub fn domain(&self, name: &str) -> Option<&Domain> {
        self.vars.iter().find(|(n, _, _)| &**n == name).map(|(_, d, _)| d)
    }

    pub fn values(&self, name: &str) -> Option<&[Value]> {
        self.vars.iter().find(|(n, _, _)| &**n == name).map(|(_, _, v)| v.as_slice())
    }

    /// Typing predicate for each variable, with `prime` choosing `x'`.
    pub fn typing(&self, prime: bool) -> Expr {
        Expr::conjoin(self.vars.iter().map(|(n, d, _)| {
            let subject = if prime { Expr::primed(n) } else { Expr::var(n) };
            d.membership(subject)
        }))
    }

    /// States of the space satisfying `pred`, in canonical order. Each
    /// conjunct is tested as soon as the variables it reads are bound.
    pub fn filter(&self, pred: &Expr, interp: &Interpretation) -> EvalResult<Vec<State>> {
        let mut by_level: Vec<Vec<&Expr>> = vec![Vec::new(); self.vars.len() + 1];
        for c in pred.conjuncts() {
            let free = c.free_names();
            let level = self
                .vars
                .iter()
                .rposition(|(n, _, _)| free.plain.iter().any(|f| **f == **n))
                .map_or(0, |i| i + 1);
            by_level[level].push(c);
        }
        let mut out = Vec::new();
        let mut state = State::new();
        self.fill(0, &by_level, interp, &mut state, &mut out)?;
        Ok(out)
    }

    fn fill(
        &self,
        level: usize,
        checks: &[Vec<&Expr>],
        interp: &Interpretation,
        state: &mut State,
        out: &mut Vec<State>,
    ) -> EvalResult<()> {
        let ev = Evaluator::on(interp, state);
        for c in &checks[level] {
            if !ev.holds(c)? {
                return Ok(());
            }
        }
        let Some((name, _, vals)) = self.vars.get(level) else {
            out.push(state.clone());
            return Ok(());
        };
        for v in vals {
            state.set(name, v.clone());
            self.fill(level + 1, checks, interp, state, out)?;
        }
        state.remove(name);
        Ok(())
    }
}

/// States of a scope satisfying its accumulated invariant.
pub fn enumerate_states(scope: &ScopeContext, interp: &Interpretation) -> EvalResult<Vec<State>> {
    let space = Space::of_scope(scope, interp)?;
    space.filter(&scope.invariant(), interp)
}

/// The states of the scope satisfying `pred`.
pub fn satisfaction_set(pred: &Expr, scope: &ScopeContext, interp: &Interpretation) -> EvalResult<Vec<State>> {
    let space = Space::of_scope(scope, interp)?;
    space.filter(&Expr::and(scope.invariant(), pred.clone()), interp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_predicate;

    fn scope(vars: &[&str], inv: &str) -> ScopeContext {
        ScopeContext {
            process: None,
            layers: vec![vars.iter().map(|s| s.to_string()).collect()],
            layer_invariants: vec![parse_predicate(inv).unwrap()],
        }
    }

    #[test]
    fn boolean_scope() {
        let s = scope(&["h"], "h : BOOL");
        assert_eq!(enumerate_states(&s, &Interpretation::new(0, 3)).unwrap().len(), 2);
    }

    #[test]
    fn product_count() {
        let s = scope(&["r", "x1", "x2", "y1", "y2"], "r : 1..3 & x1 : 1..3 & x2 : 1..3 & y1 : 1..3 & y2 : 1..3");
        assert_eq!(enumerate_states(&s, &Interpretation::new(0, 8)).unwrap().len(), 243);
    }

    #[test]
    fn safe_temp_scope() {
        let i = Interpretation::new(-50, 50).with_constant("SAFE_TEMP", Value::set((0..=40).map(Value::Int)));
        let s = scope(&["t"], "t : INT & t : SAFE_TEMP");
        assert_eq!(enumerate_states(&s, &i).unwrap().len(), 41);
    }

    #[test]
    fn canonical_order() {
        let s = scope(&["b", "a"], "a : 0..1 & b : 0..1");
        let st = enumerate_states(&s, &Interpretation::new(0, 1)).unwrap();
        let shown: Vec<String> = st.iter().map(|s| s.to_string()).collect();
        assert_eq!(shown, ["{a=0, b=0}", "{a=0, b=1}", "{a=1, b=0}", "{a=1, b=1}"]);
    }

    #[test]
    fn cap_is_enforced() {
        let mut i = Interpretation::new(0, 99);
        i.state_cap = 1000;
        let s = scope(&["a", "b"], "a : INT & b : INT");
        assert!(matches!(enumerate_states(&s, &i), Err(EvalError::StateSpaceExceeded { .. })));
    }

    #[test]
    fn satisfaction_of_disequality() {
        let s = scope(&["y1", "y2"], "y1 : 1..2 & y2 : 1..2");
        let sat = satisfaction_set(&parse_predicate("y1 /= y2").unwrap(), &s, &Interpretation::new(0, 4)).unwrap();
        assert_eq!(sat.len(), 2);
    }
}
