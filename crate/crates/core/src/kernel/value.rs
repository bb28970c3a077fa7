use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

pub type Name = Arc<str>;

/// Runtime value of the mathematical subset.
///
/// Variant order matters: `Bool(false)` is the least value, which the
/// function-application lookup uses as a range lower bound.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Atom(Name),
    Pair(Arc<(Value, Value)>),
    Set(Arc<BTreeSet<Value>>),
}

impl Value {
    pub const MIN: Value = Value::Bool(false);

    pub fn pair(a: Value, b: Value) -> Value {
        Value::Pair(Arc::new((a, b)))
    }

    pub fn set<I: IntoIterator<Item = Value>>(items: I) -> Value {
        Value::Set(Arc::new(items.into_iter().collect()))
    }

    pub fn empty_set() -> Value {
        Value::Set(Arc::new(BTreeSet::new()))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_set(&self) -> Option<&BTreeSet<Value>> {
        match self {
            Value::Set(s) => Some(s),
            _ => None,
        }
    }

    /// Look up `arg` in a set of pairs viewed as a function graph.
    pub fn apply(&self, arg: &Value) -> Option<&Value> {
        let graph = self.as_set()?;
        let lower = Value::pair(arg.clone(), Value::MIN);
        match graph.range(lower..).next() {
            Some(Value::Pair(p)) if p.0 == *arg => Some(&p.1),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(true) => f.write_str("TRUE"),
            Value::Bool(false) => f.write_str("FALSE"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Atom(a) => f.write_str(a),
            Value::Pair(p) => write!(f, "({} |-> {})", p.0, p.1),
            Value::Set(s) => {
                f.write_str("{")?;
                for (i, v) in s.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

/// Total assignment of values to the variables of a scope, ordered by name.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct State(pub BTreeMap<Name, Value>);

impl State {
    pub fn new() -> State {
        State(BTreeMap::new())
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn set(&mut self, name: &str, value: Value) {
        if let Some(slot) = self.0.get_mut(name) {
            *slot = value;
        } else {
            self.0.insert(Arc::from(name), value);
        }
    }

    pub fn with(mut self, name: &str, value: Value) -> State {
        self.set(name, value);
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(|k| &**k)
    }

    /// Restriction to the given variable names.
    pub fn project(&self, names: &[Name]) -> State {
        State(
            names
                .iter()
                .filter_map(|n| self.0.get(n).map(|v| (n.clone(), v.clone())))
                .collect(),
        )
    }

    pub fn remove(&mut self, name: &str) {
        self.0.remove(name);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn function_lookup() {
        let f = Value::set([
            Value::pair(Value::Int(1), Value::Int(10)),
            Value::pair(Value::Int(2), Value::Int(20)),
        ]);
        assert_eq!(f.apply(&Value::Int(2)), Some(&Value::Int(20)));
        assert_eq!(f.apply(&Value::Int(3)), None);
        let g = Value::set([Value::pair(
            Value::pair(Value::Int(6), Value::Int(4)),
            Value::Int(2),
        )]);
        assert_eq!(
            g.apply(&Value::pair(Value::Int(6), Value::Int(4))),
            Some(&Value::Int(2))
        );
    }

    #[test]
    fn bool_false_is_least() {
        for v in [
            Value::Bool(true),
            Value::Int(i64::MIN),
            Value::Atom("a".into()),
            Value::empty_set(),
        ] {
            assert!(Value::MIN < v);
        }
    }
}
