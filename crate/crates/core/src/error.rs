use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("game failed validation: {}", summarize(.0))]
    Invalid(Vec<Violation>),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("unknown value `{value}` for variable `{variable}`")]
    UnknownValue { variable: String, value: String },

    #[error("unknown agent {0}")]
    UnknownAgent(usize),

    #[error("unknown mechanism node `{0}`")]
    UnknownNode(String),

    #[error("`{0}` is not a decision variable")]
    NotADecision(String),

    #[error("`{0}` is not a decision-rule node")]
    NotADecisionRule(String),

    #[error("missing decision rule for {0}")]
    MissingRule(String),

    #[error("table for `{variable}` has the wrong shape: {detail}")]
    Shape { variable: String, detail: String },

    #[error("intervention would create a cycle through `{0}`")]
    Cycle(String),

    #[error("intervention is not applicable: {0}")]
    NotApplicable(String),

    #[error("cannot marginalise `{removed}` out of `{child}`: {reason}; supply an explicit replacement table")]
    NeedsReplacement {
        removed: String,
        child: String,
        reason: String,
    },

    #[error("intervention has no journal; apply it before inverting")]
    NoJournal,

    #[error("dependency already absent: no reachability path from {from} to {to}")]
    DependencyAbsent { from: String, to: String },

    #[error("no object-level intervention set can break {from} -> {to}")]
    NoHittingSet { from: String, to: String },

    #[error("no rational outcome found{0}")]
    NoRationalOutcome(String),

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("query error: {0}")]
    Query(String),

    #[error("no file `{0}` and no bundled game of that name")]
    UnknownGame(String),

    #[error("no such file `{0}`")]
    MissingFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn summarize(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
