//! Small arithmetic expressions used in table cells: numbers, named
//! parameters, `+ - * /` and parentheses.

use std::collections::BTreeMap;

pub(crate) fn eval(text: &str, params: &BTreeMap<String, f64>) -> Result<f64, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut p = Parser {
        chars: &chars,
        pos: 0,
        params,
    };
    let v = p.expr()?;
    if p.pos != chars.len() {
        return Err(format!("unexpected `{}` in `{text}`", chars[p.pos]));
    }
    Ok(v)
}

struct Parser<'a> {
    chars: &'a [char],
    pos: usize,
    params: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<f64, String> {
        let mut v = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let r = self.term()?;
            v = if c == '+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn term(&mut self) -> Result<f64, String> {
        let mut v = self.factor()?;
        while let Some(c @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            let r = self.factor()?;
            v = if c == '*' { v * r } else { v / r };
        }
        Ok(v)
    }

    fn factor(&mut self) -> Result<f64, String> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            Some('+') => {
                self.pos += 1;
                self.factor()
            }
            Some('(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(')') {
                    return Err("missing `)`".into());
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E')
                {
                    // allow exponents like 1e-3
                    if matches!(self.peek(), Some('e' | 'E')) && matches!(self.chars.get(self.pos + 1), Some('-' | '+'))
                    {
                        self.pos += 1;
                    }
                    self.pos += 1;
                }
                let s: String = self.chars[start..self.pos].iter().collect();
                s.parse().map_err(|_| format!("bad number `{s}`"))
            }
            Some(c) if c.is_alphabetic() || c == '_' => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                    self.pos += 1;
                }
                let s: String = self.chars[start..self.pos].iter().collect();
                self.params
                    .get(&s)
                    .copied()
                    .ok_or_else(|| format!("unknown parameter `{s}`"))
            }
            Some(c) => Err(format!("unexpected `{c}`")),
            None => Err("expression ends early".into()),
        }
    }
}
