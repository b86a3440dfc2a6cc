//! Interventional queries: a small formula language over rational outcomes
//! and its staged evaluation under partial visibility.

mod ast;
mod eval;
mod parse;

pub use ast::{Body, Cmp, Expr, Formula, Quantifier, Query, EPS_QUERY};
pub use eval::{
    check_references, check_spec_env, classify_visibility, evaluate_query, rational_outcomes, Leaf, LeafValue,
    QueryJob, QueryResult, SpecCheck, SpecDirection, StageTrace, Verdict, VisibilityClass,
};
pub use parse::parse_query;

#[cfg(test)]
mod tests;
