pub mod ast;
pub mod kernel;
pub mod lexer;
pub mod parser;
pub mod render;
pub mod scope;
pub mod validate;
pub mod relsem;
pub mod ba;
pub mod po;
pub mod discharge;
pub mod smt;
pub mod trace;
pub mod cli;
