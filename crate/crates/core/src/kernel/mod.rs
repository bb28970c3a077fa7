//! Finite evaluation of the mathematical subset.

pub mod eval;
pub mod interp;
pub mod states;
pub mod value;

pub use eval::{EvalError, EvalResult, Evaluator};
pub use interp::{check_interpretation, AxiomViolation, Interpretation};
pub use states::{enumerate_states, satisfaction_set, Domain, Space};
pub use value::{Name, State, Value};
