//! Stratified Datalog with negation-as-failure, comparisons and derivation
//! trees.

mod ast;
mod eval;
mod explain;
mod parser;
mod stratify;

pub use ast::{ArithOp, Atom, CmpOp, Expr, Fact, Literal, Real, Rule, RuleProgram, Term, Value};
pub use eval::{evaluate, Model, Provenance};
pub use explain::{explain, DerivationTree};
pub use parser::parse_rules;
pub use stratify::{stratify, StratifiedProgram};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuleError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("range restriction violated at {line}:{col}: variable {var} is unbound in {context}")]
    RangeRestriction { line: usize, col: usize, var: String, context: String },
    #[error("unstratifiable: negation inside the cycle {}", cycle.join(" -> "))]
    Unstratifiable { cycle: Vec<String> },
    #[error("evaluation error in `{literal}`: {message}")]
    Eval { literal: String, message: String },
    #[error("{0} is not in the model")]
    NotInModel(String),
}

/// Parses and stratifies in one step.
pub fn load_rules(text: &str) -> Result<StratifiedProgram, RuleError> {
    stratify(&parse_rules(text)?)
}
