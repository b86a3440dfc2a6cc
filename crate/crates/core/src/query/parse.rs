//! Recursive-descent parser for query text.
//!
//! ```text
//! query   := mode directives? ':' body
//! mode    := 'forall' 'ne' | 'exists' 'ne' | 'sampled'
//! directives := '[' directive (',' directive)* ']'
//! directive  := 'mix-ties' | 'behavioral' | 'eps' '=' number
//! body    := formula | expr
//! formula := conj ('or' conj)*
//! conj    := neg ('and' neg)*
//! neg     := 'not' neg | '(' formula ')' | expr cmp expr ('within' number)?
//! expr    := term (('+' | '-') term)*
//! term    := factor (('*' | '/') factor)*
//! factor  := number | '-' factor | '(' expr ')' | 'P(' event ')' | 'E[' (agent | 'total') ']'
//! event   := name '=' value (',' name '=' value)*
//! ```

use crate::error::{Error, Result};
use crate::query::ast::{Body, Cmp, Expr, Formula, Quantifier, Query, EPS_QUERY};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Num(String),
    Sym(&'static str),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    col: usize,
}

const SYMBOLS: [&str; 17] = [
    "<=", ">=", "!=", "==", "≤", "≥", "<", ">", "=", "(", ")", "[", "]", ",", ":", "+", "*",
];

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // Exponent, as in 1e-6.
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            out.push(Token {
                tok: Tok::Num(chars[start..i].iter().collect()),
                col,
            });
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Word(chars[start..i].iter().collect()),
                col,
            });
        } else if c == '-' {
            out.push(Token {
                tok: Tok::Sym("-"),
                col,
            });
            i += 1;
        } else if c == '/' {
            out.push(Token {
                tok: Tok::Sym("/"),
                col,
            });
            i += 1;
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            let sym = SYMBOLS
                .iter()
                .find(|s| rest.starts_with(**s))
                .ok_or_else(|| Error::parse(1, col, format!("unexpected character `{c}`")))?;
            out.push(Token {
                tok: Tok::Sym(sym),
                col,
            });
            i += sym.chars().count();
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.col)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::parse(1, self.col(), message))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(x)) if x == w)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let hit = self.is_sym(s);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn eat_word(&mut self, w: &str) -> bool {
        let hit = self.is_word(w);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn number(&mut self) -> Result<f64> {
        let neg = self.eat_sym("-");
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                let v: f64 = n.parse().or_else(|_| self.err(format!("bad number `{n}`")))?;
                Ok(if neg { -v } else { v })
            }
            _ => self.err("expected a number"),
        }
    }

    fn query(&mut self) -> Result<Query> {
        let quantifier = if self.eat_word("forall") {
            self.ne()?;
            Quantifier::Forall
        } else if self.eat_word("exists") {
            self.ne()?;
            Quantifier::Exists
        } else if self.eat_word("sampled") {
            Quantifier::Sampled
        } else {
            return self.err("expected `forall ne`, `exists ne` or `sampled`");
        };
        let mut q = Query {
            quantifier,
            body: Body::Value(Expr::Const(0.0)),
            eps: EPS_QUERY,
            mix_ties: false,
            behavioral: false,
        };
        if self.eat_sym("[") {
            loop {
                self.directive(&mut q)?;
                if !self.eat_sym(",") {
                    break;
                }
            }
            self.expect_sym("]")?;
        }
        self.expect_sym(":")?;
        q.body = self.body()?;
        if self.pos < self.toks.len() {
            return self.err("unexpected trailing input");
        }
        Ok(q)
    }

    fn ne(&mut self) -> Result<()> {
        if self.eat_word("ne") {
            Ok(())
        } else {
            self.err("expected `ne`")
        }
    }

    fn directive(&mut self, q: &mut Query) -> Result<()> {
        if self.eat_word("mix") {
            if self.eat_sym("-") && self.eat_word("ties") {
                q.mix_ties = true;
                return Ok(());
            }
            return self.err("expected `mix-ties`");
        }
        if self.eat_word("behavioral") {
            q.behavioral = true;
            return Ok(());
        }
        if self.eat_word("eps") {
            self.expect_sym("=")?;
            let v = self.number()?;
            if v.is_nan() || v < 0.0 {
                return self.err("tolerance must be non-negative");
            }
            q.eps = v;
            return Ok(());
        }
        self.err("unknown directive")
    }

    fn body(&mut self) -> Result<Body> {
        let start = self.pos;
        if let Ok(e) = self.expr() {
            if self.pos == self.toks.len() {
                return Ok(Body::Value(e));
            }
        }
        self.pos = start;
        Ok(Body::Formula(self.formula()?))
    }

    fn formula(&mut self) -> Result<Formula> {
        let mut f = self.conj()?;
        while self.eat_word("or") {
            f = Formula::Or(Box::new(f), Box::new(self.conj()?));
        }
        Ok(f)
    }

    fn conj(&mut self) -> Result<Formula> {
        let mut f = self.neg()?;
        while self.eat_word("and") {
            f = Formula::And(Box::new(f), Box::new(self.neg()?));
        }
        Ok(f)
    }

    fn neg(&mut self) -> Result<Formula> {
        if self.eat_word("not") {
            return Ok(Formula::Not(Box::new(self.neg()?)));
        }
        if self.is_sym("(") {
            // Either a parenthesised formula or an expression that starts
            // with a parenthesis; try the formula first.
            let start = self.pos;
            self.pos += 1;
            if let Ok(f) = self.formula() {
                if self.eat_sym(")") && self.cmp().is_none() && !self.at_operator() {
                    return Ok(f);
                }
            }
            self.pos = start;
        }
        self.atom()
    }

    fn at_operator(&self) -> bool {
        ["+", "-", "*", "/"].iter().any(|s| self.is_sym(s))
    }

    fn cmp(&self) -> Option<Cmp> {
        match self.peek()? {
            Tok::Sym("<") => Some(Cmp::Lt),
            Tok::Sym("<=") | Tok::Sym("≤") => Some(Cmp::Le),
            Tok::Sym("=") | Tok::Sym("==") => Some(Cmp::Eq),
            Tok::Sym("!=") => Some(Cmp::Ne),
            Tok::Sym(">=") | Tok::Sym("≥") => Some(Cmp::Ge),
            Tok::Sym(">") => Some(Cmp::Gt),
            _ => None,
        }
    }

    fn atom(&mut self) -> Result<Formula> {
        let lhs = self.expr()?;
        let Some(cmp) = self.cmp() else {
            return self.err("expected a comparison");
        };
        self.pos += 1;
        let rhs = self.expr()?;
        let within = if self.eat_word("within") {
            let v = self.number()?;
            if v.is_nan() || v < 0.0 {
                return self.err("tolerance must be non-negative");
            }
            Some(v)
        } else {
            None
        };
        Ok(Formula::Atom { lhs, cmp, rhs, within })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut e = self.term()?;
        loop {
            if self.eat_sym("+") {
                e = Expr::Add(Box::new(e), Box::new(self.term()?));
            } else if self.eat_sym("-") {
                e = Expr::Sub(Box::new(e), Box::new(self.term()?));
            } else {
                return Ok(e);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut e = self.factor()?;
        loop {
            if self.eat_sym("*") {
                e = Expr::Mul(Box::new(e), Box::new(self.factor()?));
            } else if self.eat_sym("/") {
                e = Expr::Div(Box::new(e), Box::new(self.factor()?));
            } else {
                return Ok(e);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat_sym("-") {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        if self.eat_sym("(") {
            let e = self.expr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        match self.peek().cloned() {
            Some(Tok::Num(_)) => Ok(Expr::Const(self.number()?)),
            Some(Tok::Word(w)) if w == "P" => {
                self.pos += 1;
                self.expect_sym("(")?;
                let mut event = Vec::new();
                loop {
                    let name = self.name()?;
                    self.expect_sym("=")?;
                    event.push((name, self.value()?));
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(")")?;
                Ok(Expr::Prob(event))
            }
            Some(Tok::Word(w)) if w == "E" => {
                self.pos += 1;
                self.expect_sym("[")?;
                let e = if self.eat_word("total") {
                    Expr::Total
                } else {
                    match self.peek().cloned() {
                        Some(Tok::Num(n)) => match n.parse::<usize>() {
                            Ok(i) if i > 0 => {
                                self.pos += 1;
                                Expr::Utility(i)
                            }
                            _ => return self.err(format!("`{n}` is not an agent")),
                        },
                        _ => return self.err("expected an agent number or `total`"),
                    }
                };
                self.expect_sym("]")?;
                Ok(e)
            }
            Some(Tok::Word(w)) => self.err(format!("unknown identifier `{w}`")),
            _ => self.err("expected an expression"),
        }
    }

    fn name(&mut self) -> Result<String> {
        match self.peek().cloned() {
            Some(Tok::Word(w)) => {
                self.pos += 1;
                Ok(w)
            }
            _ => self.err("expected a variable name"),
        }
    }

    /// A value label: a word, or a possibly signed number kept as written.
    fn value(&mut self) -> Result<String> {
        let neg = self.eat_sym("-");
        let text = match self.peek().cloned() {
            Some(Tok::Word(w)) if !neg => w,
            Some(Tok::Num(n)) => n,
            _ => return self.err("expected a value"),
        };
        self.pos += 1;
        Ok(if neg { format!("-{text}") } else { text })
    }
}

/// Parses query text. Errors carry the column of the offending token.
pub fn parse_query(text: &str) -> Result<Query> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.chars().count() + 1,
    };
    p.query()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_examples() {
        let q = parse_query("forall ne: E[1] >= 2").unwrap();
        assert_eq!(q.quantifier, Quantifier::Forall);
        assert_eq!(
            q.body,
            Body::Formula(Formula::Atom {
                lhs: Expr::Utility(1),
                cmp: Cmp::Ge,
                rhs: Expr::Const(2.0),
                within: None
            })
        );
        let q = parse_query("exists ne: P(D2=j) = 1").unwrap();
        assert_eq!(q.quantifier, Quantifier::Exists);
        let Body::Formula(Formula::Atom { lhs, .. }) = q.body else {
            panic!()
        };
        assert_eq!(lhs, Expr::Prob(vec![("D2".into(), "j".into())]));
        let q = parse_query("sampled: E[total] > -5").unwrap();
        assert_eq!(q.quantifier, Quantifier::Sampled);
        let Body::Formula(Formula::Atom { rhs, .. }) = q.body else {
            panic!()
        };
        assert_eq!(rhs, Expr::Neg(Box::new(Expr::Const(5.0))));
    }

    #[test]
    fn directives_and_values() {
        let q = parse_query("sampled [mix-ties, eps=1e-6]: E[total]").unwrap();
        assert!(q.mix_ties && !q.behavioral);
        assert_eq!(q.eps, 1e-6);
        assert_eq!(q.body, Body::Value(Expr::Total));
        let q = parse_query("forall ne [behavioral]: (E[1] + E[2]) / 2").unwrap();
        assert!(q.behavioral);
        assert!(matches!(q.body, Body::Value(Expr::Div(..))));
    }

    #[test]
    fn connectives_bind_as_usual() {
        let q = parse_query("forall ne: not P(T=h) < 0.5 and E[1] = 3 within 0.1 or E[2] != 0").unwrap();
        let Body::Formula(Formula::Or(a, _)) = q.body else {
            panic!()
        };
        let Formula::And(n, w) = *a else { panic!() };
        assert!(matches!(*n, Formula::Not(_)));
        assert!(matches!(*w, Formula::Atom { within: Some(_), .. }));
    }

    #[test]
    fn parentheses_group_formulas_and_expressions() {
        let q = parse_query("exists ne: (E[1] > 0 or E[2] > 0) and (E[1] + 1) * 2 >= 4").unwrap();
        assert!(matches!(q.body, Body::Formula(Formula::And(..))));
    }

    #[test]
    fn numeric_and_negative_value_labels() {
        let q = parse_query("sampled: P(U1=-1, U2=3, D1=g) > 0").unwrap();
        let Body::Formula(Formula::Atom {
            lhs: Expr::Prob(ev), ..
        }) = q.body
        else {
            panic!()
        };
        assert_eq!(ev[0], ("U1".into(), "-1".into()));
        assert_eq!(ev[1], ("U2".into(), "3".into()));
    }

    #[test]
    fn errors_carry_columns() {
        for (text, col) in [
            ("sometimes: E[1] > 0", 1),
            ("forall: E[1] > 0", 7),
            ("forall ne: E[0] > 0", 14),
            ("forall ne: Q > 0", 12),
            ("forall ne: E[1] > ", 19),
            ("sampled [fast]: E[1]", 10),
            ("sampled: E[1] > 0 )", 19),
            ("sampled: E[1] ? 0", 15),
        ] {
            match parse_query(text) {
                Err(Error::Parse { column, .. }) => assert_eq!(column, col, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "forall ne: E[1] >= 2",
            "sampled [mix-ties]: E[total]",
            "exists ne [behavioral, eps=1e-3]: not (P(D2=j, T=h) < 0.5 or E[2] = -1 within 0.01)",
        ] {
            let q = parse_query(text).unwrap();
            assert_eq!(parse_query(&q.to_string()).unwrap(), q, "{text}");
        }
    }
}
