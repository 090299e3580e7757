//! Text forms of polynomials, operator lists and weight lists.
//!
//! Polynomials are written as in the output of the tools, for example
//! `1 * xi<a1>_1[b3_1] * xi<a1>_2[b2_1] + -1 * xi<a1>_1[b2_1] * xi<a1>_2[b3_1]`.
//! A term is a `*`-separated list of rational coefficients and coordinates
//! `name[tags]^exp`; terms are joined by `+` or `-`.

use gradlin::{AdditionalSymbol, Chart, Polynomial, Rational, Weight};
use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::sysfile::ParseError;

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Cursor { text, pos: 0 }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(1, self.pos + 1, message)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek().filter(|&c| f(c)) {
            self.pos += c.len_utf8();
        }
        &self.text[start..self.pos]
    }

    fn integer(&mut self) -> Result<BigInt, ParseError> {
        self.skip_ws();
        let at = self.pos;
        let digits = self.take_while(|c| c.is_ascii_digit());
        digits.parse().map_err(|_| {
            self.pos = at;
            self.error("expected a number")
        })
    }

    /// A coordinate name: identifier characters and balanced `<...>` groups.
    fn name(&mut self) -> Result<&'a str, ParseError> {
        self.skip_ws();
        let start = self.pos;
        loop {
            self.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
            if self.peek() != Some('<') {
                break;
            }
            match self.text[self.pos..].find('>') {
                Some(k) => self.pos += k + 1,
                None => return Err(self.error("unclosed `<`")),
            }
        }
        if self.pos == start {
            return Err(self.error("expected a coefficient or coordinate"));
        }
        Ok(&self.text[start..self.pos])
    }
}

/// Parse `b<j>_<i>`.
pub fn parse_symbol(s: &str) -> Option<AdditionalSymbol> {
    let (j, i) = s.strip_prefix('b')?.split_once('_')?;
    let (j, i): (u32, u32) = (j.parse().ok()?, i.parse().ok()?);
    (j >= 2 && i >= 1).then(|| AdditionalSymbol::new(j, i))
}

/// Parse a comma-separated list such as `b2_1,b3_1`.
pub fn parse_symbols(s: &str) -> Result<Vec<AdditionalSymbol>, ParseError> {
    let mut out = Vec::new();
    let mut at = 0;
    for part in s.split(',') {
        let lead = part.len() - part.trim_start().len();
        let token = part.trim();
        if !token.is_empty() {
            out.push(
                parse_symbol(token).ok_or_else(|| {
                    ParseError::new(1, at + lead + 1, format!("expected `b<j>_<i>`, found `{token}`"))
                })?,
            );
        }
        at += part.len() + 1;
    }
    Ok(out)
}

/// Parse weights written as coefficient rows separated by `;`, such as `0,0;1,0`.
pub fn parse_weights(s: &str, rank: usize) -> Result<Vec<Weight>, ParseError> {
    let mut out = Vec::new();
    let mut at = 0;
    for row in s.split(';') {
        let mut coeffs = Vec::new();
        let mut col = at;
        for c in row.split(',') {
            let lead = c.len() - c.trim_start().len();
            coeffs.push(c.trim().parse::<i64>().map_err(|_| {
                ParseError::new(1, col + lead + 1, format!("expected an integer, found `{}`", c.trim()))
            })?);
            col += c.len() + 1;
        }
        if coeffs.len() != rank {
            return Err(ParseError::new(
                1,
                at + 1,
                format!("expected {rank} coefficients, found {}", coeffs.len()),
            ));
        }
        out.push(Weight::from_basic_coefficients(&coeffs));
        at += row.len() + 1;
    }
    Ok(out)
}

/// Parse a polynomial whose coordinates belong to `chart`.
pub fn parse_polynomial(text: &str, chart: &Chart) -> Result<Polynomial, ParseError> {
    let mut cur = Cursor::new(text);
    let mut total = chart.zero();
    let mut negative = false;
    cur.skip_ws();
    if cur.eat('-') {
        negative = true;
    } else {
        cur.eat('+');
    }
    loop {
        let mut term = parse_term(&mut cur, chart)?;
        if negative {
            term = -&term;
        }
        total = &total + &term;
        cur.skip_ws();
        if cur.peek().is_none() {
            return Ok(total);
        }
        if cur.eat('+') {
            negative = false;
        } else if cur.eat('-') {
            negative = true;
        } else {
            return Err(cur.error("expected `+`, `-` or `*`"));
        }
    }
}

fn parse_term(cur: &mut Cursor, chart: &Chart) -> Result<Polynomial, ParseError> {
    let mut term = chart.one();
    loop {
        cur.skip_ws();
        let sign = if cur.eat('-') { -1 } else { 1 };
        cur.skip_ws();
        let factor = if cur.peek().is_some_and(|c| c.is_ascii_digit()) {
            let num = cur.integer()?;
            let den = if cur.eat('/') { cur.integer()? } else { BigInt::one() };
            if den.is_zero() {
                return Err(cur.error("zero denominator"));
            }
            chart.one().scale(&Rational::new(num, den))
        } else {
            let at = cur.pos;
            let name = cur.name()?;
            let mut tags = Vec::new();
            if cur.peek() == Some('[') {
                cur.pos += 1;
                let close = cur.text[cur.pos..].find(']').ok_or_else(|| cur.error("unclosed `[`"))?;
                let inner = &cur.text[cur.pos..cur.pos + close];
                tags = parse_symbols(inner).map_err(|e| ParseError::new(1, cur.pos + e.column, e.message))?;
                tags.sort();
                cur.pos += close + 1;
            }
            let coordinate = chart.lookup(name, &tags).ok_or_else(|| {
                let label = if tags.is_empty() {
                    name.to_string()
                } else {
                    let t: Vec<String> = tags.iter().map(ToString::to_string).collect();
                    format!("{name}[{}]", t.join(","))
                };
                ParseError::new(1, at + 1, format!("unknown coordinate `{label}`"))
            })?;
            let base = chart.generator(coordinate);
            let mut power = chart.one();
            let exp = if cur.eat('^') { cur.integer()? } else { BigInt::one() };
            let exp: u32 = exp.try_into().map_err(|_| cur.error("exponent too large"))?;
            for _ in 0..exp {
                power = &power * &base;
            }
            power
        };
        term = &term * &factor;
        if sign < 0 {
            term = -&term;
        }
        if !cur.eat('*') {
            return Ok(term);
        }
    }
}
