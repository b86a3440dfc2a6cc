use std::fmt;

use serde::Serialize;

use crate::model::format_real;

/// Default tolerance for comparisons.
pub const EPS_QUERY: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantifier {
    /// Holds on every leaf of the exhaustive evaluation.
    Forall,
    /// Holds on some leaf of the exhaustive evaluation.
    Exists,
    /// One seeded draw per stage.
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Const(f64),
    /// Probability of a conjunction of `variable = value` assignments.
    Prob(Vec<(String, String)>),
    /// Expected utility of one agent.
    Utility(usize),
    /// Expected utility summed over agents.
    Total,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl Cmp {
    /// `a cmp b` with equality up to `eps`.
    pub fn holds(self, a: f64, b: f64, eps: f64) -> bool {
        let eq = (a - b).abs() <= eps;
        match self {
            Cmp::Lt => a < b && !eq,
            Cmp::Le => a < b || eq,
            Cmp::Eq => eq,
            Cmp::Ne => !eq,
            Cmp::Ge => a > b || eq,
            Cmp::Gt => a > b && !eq,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Eq => "=",
            Cmp::Ne => "!=",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    Atom {
        lhs: Expr,
        cmp: Cmp,
        rhs: Expr,
        /// Overrides the query tolerance for this comparison.
        within: Option<f64>,
    },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

/// What a query computes: a truth value, or a number.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Body {
    Formula(Formula),
    Value(Expr),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Query {
    pub quantifier: Quantifier,
    pub body: Body,
    pub eps: f64,
    /// Agents mix uniformly over their policies in the stage's outcome set
    /// instead of committing to one draw.
    pub mix_ties: bool,
    /// Stage outcomes also include the extreme points of behavioral
    /// equilibrium families.
    pub behavioral: bool,
}

impl Expr {
    /// Variables mentioned in probability atoms, with their values.
    pub fn assignments(&self) -> Vec<&(String, String)> {
        match self {
            Expr::Prob(ev) => ev.iter().collect(),
            Expr::Const(_) | Expr::Utility(_) | Expr::Total => Vec::new(),
            Expr::Neg(a) => a.assignments(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let mut v = a.assignments();
                v.extend(b.assignments());
                v
            }
        }
    }

    /// Agents whose expected utility is referenced.
    pub fn agents(&self) -> Vec<usize> {
        match self {
            Expr::Utility(i) => vec![*i],
            Expr::Const(_) | Expr::Prob(_) | Expr::Total => Vec::new(),
            Expr::Neg(a) => a.agents(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let mut v = a.agents();
                v.extend(b.agents());
                v
            }
        }
    }
}

impl Formula {
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            Formula::Atom { lhs, rhs, .. } => vec![lhs, rhs],
            Formula::Not(f) => f.exprs(),
            Formula::And(a, b) | Formula::Or(a, b) => {
                let mut v = a.exprs();
                v.extend(b.exprs());
                v
            }
        }
    }
}

impl Body {
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            Body::Formula(f) => f.exprs(),
            Body::Value(e) => vec![e],
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "{}", format_real(*v)),
            Expr::Prob(ev) => {
                let parts: Vec<String> = ev.iter().map(|(k, v)| format!("{k}={v}")).collect();
                write!(f, "P({})", parts.join(", "))
            }
            Expr::Utility(i) => write!(f, "E[{i}]"),
            Expr::Total => write!(f, "E[total]"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom { lhs, cmp, rhs, within } => {
                write!(f, "{lhs} {} {rhs}", cmp.symbol())?;
                if let Some(w) = within {
                    write!(f, " within {w:e}")?;
                }
                Ok(())
            }
            Formula::Not(a) => write!(f, "not ({a})"),
            Formula::And(a, b) => write!(f, "({a} and {b})"),
            Formula::Or(a, b) => write!(f, "({a} or {b})"),
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.quantifier {
            Quantifier::Forall => "forall ne",
            Quantifier::Exists => "exists ne",
            Quantifier::Sampled => "sampled",
        })?;
        let mut directives = Vec::new();
        if self.mix_ties {
            directives.push("mix-ties".to_string());
        }
        if self.behavioral {
            directives.push("behavioral".to_string());
        }
        if self.eps != EPS_QUERY {
            directives.push(format!("eps={:e}", self.eps));
        }
        if !directives.is_empty() {
            write!(f, " [{}]", directives.join(", "))?;
        }
        match &self.body {
            Body::Formula(x) => write!(f, ": {x}"),
            Body::Value(x) => write!(f, ": {x}"),
        }
    }
}
