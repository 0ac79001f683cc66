//! Text grammar for symbols.
//!
//! ```text
//! expr   := factor ('*' factor)*
//! factor := atom ('^' int)?
//! atom   := 'Xi' | 'One' | '1' | 'X0'..'X3' | 'I(' expr ')' | 'E' int? '(' expr ')'
//!         | '(' expr ')' | table name such as 'RSWV'
//! ```
//!
//! Whitespace is ignored. `E(...)` is the first channel.

use std::fmt::Write as _;

use crate::error::{ParseError, ParseErrorKind};
use crate::symbols::{canonicalize, MultiIndex, RawSymbol, Scaling, Symbol};

/// Names used in tables and pretty-printed coproducts.
pub fn named_symbols() -> Vec<(&'static str, Symbol)> {
    let ixi = Symbol::i_xi();
    let e = Symbol::e_i_xi(1);
    let v = ixi.pow(2);
    let w = ixi.pow(3);
    let i = |s: &Symbol| s.integrate().expect("non-polynomial");
    let p = |a: &Symbol, b: &Symbol| a.mul(b);
    vec![
        ("RSI", ixi.clone()),
        ("RSV", v.clone()),
        ("RSW", w.clone()),
        ("RSIW", i(&w)),
        ("RSY", i(&v)),
        ("RSII", i(&ixi)),
        ("RSWW", p(&i(&w), &v)),
        ("RSVW", p(&i(&w), &ixi)),
        ("RSWV", p(&i(&v), &v)),
        ("RSVV", p(&i(&v), &ixi)),
        ("RSWI", p(&i(&ixi), &v)),
        ("RSVI", p(&i(&ixi), &ixi)),
        ("RSoI", e.clone()),
        ("RSVo", p(&ixi, &e)),
        ("RSVoo", e.pow(2)),
        ("RSWo", p(&v, &e)),
        ("RSWoo", p(&ixi, &e.pow(2))),
        ("RSWooo", e.pow(3)),
        ("RSWVo", p(&i(&p(&ixi, &e)), &v)),
    ]
}

/// Table name of a symbol, if it has one.
pub fn name_of(s: &Symbol) -> Option<&'static str> {
    named_symbols().into_iter().find(|(_, t)| t == s).map(|(n, _)| n)
}

/// Prints a symbol in the grammar accepted by [`parse_symbol`].
pub fn print_symbol(s: &Symbol) -> String {
    let mut out = String::new();
    write_symbol(&mut out, s);
    out
}

/// Table name when available, grammar form otherwise.
pub fn display_symbol(s: &Symbol) -> String {
    match name_of(s) {
        Some(n) => n.to_string(),
        None => match s {
            Symbol::Product(fs) => {
                // name the non-polynomial part if possible, e.g. RSV*X1
                let (mono, rest): (Vec<_>, Vec<_>) =
                    fs.iter().cloned().partition(|f| matches!(f, Symbol::Monomial(_)));
                let core = Symbol::product(rest);
                match (name_of(&core), mono.first()) {
                    (Some(n), Some(m)) => format!("{n}*{}", print_symbol(m)),
                    _ => print_symbol(s),
                }
            }
            _ => print_symbol(s),
        },
    }
}

fn write_symbol(out: &mut String, s: &Symbol) {
    match s {
        Symbol::Noise => out.push_str("Xi"),
        Symbol::Unit => out.push_str("One"),
        Symbol::Monomial(k) => write_monomial(out, k),
        Symbol::Integral(c) => {
            out.push_str("I(");
            write_symbol(out, c);
            out.push(')');
        }
        Symbol::EIntegral(ch, c) => {
            let _ = write!(out, "E{ch}(");
            write_symbol(out, c);
            out.push(')');
        }
        Symbol::Product(fs) => {
            // largest factors first, which reads like the usual notation
            let fs: Vec<&Symbol> = fs.iter().rev().collect();
            let mut i = 0;
            let mut first = true;
            while i < fs.len() {
                let mut j = i;
                while j < fs.len() && fs[j] == fs[i] {
                    j += 1;
                }
                if !first {
                    out.push('*');
                }
                first = false;
                write_symbol(out, fs[i]);
                if j - i > 1 {
                    let _ = write!(out, "^{}", j - i);
                }
                i = j;
            }
        }
    }
}

fn write_monomial(out: &mut String, k: &MultiIndex) {
    let _ = write!(out, "{k}");
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn err(&self, kind: ParseErrorKind, msg: impl Into<String>) -> ParseError {
        ParseError::new(kind, self.pos, msg)
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(ParseErrorKind::Syntax, format!("expected '{}'", c as char)))
        }
    }

    fn int(&mut self) -> Result<u32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(ParseErrorKind::Syntax, "expected an integer"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| ParseError::new(ParseErrorKind::Syntax, start, "integer out of range"))
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).into_owned()
    }

    fn expr(&mut self) -> Result<RawSymbol, ParseError> {
        let mut factors = vec![self.factor()?];
        while self.peek() == Some(b'*') {
            self.pos += 1;
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { RawSymbol::Product(factors) })
    }

    fn factor(&mut self) -> Result<RawSymbol, ParseError> {
        let a = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let n = self.int()?;
            return Ok(RawSymbol::Product(vec![a; n as usize]));
        }
        Ok(a)
    }

    fn argument(&mut self, op: &str) -> Result<RawSymbol, ParseError> {
        self.expect(b'(')?;
        if self.peek() == Some(b')') {
            return Err(self.err(ParseErrorKind::Arity, format!("{op} takes exactly one argument")));
        }
        let e = self.expr()?;
        if self.peek() == Some(b',') {
            return Err(self.err(ParseErrorKind::Arity, format!("{op} takes exactly one argument")));
        }
        self.expect(b')')?;
        Ok(e)
    }

    fn atom(&mut self) -> Result<RawSymbol, ParseError> {
        let start = self.pos;
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b'1') => {
                self.pos += 1;
                Ok(RawSymbol::Unit)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let id = self.ident();
                match id.as_str() {
                    "Xi" => Ok(RawSymbol::Noise),
                    "One" => Ok(RawSymbol::Unit),
                    "I" => Ok(RawSymbol::Integral(Box::new(self.argument("I")?))),
                    "X" => {
                        let i = self.int()? as usize;
                        if i > 3 {
                            return Err(ParseError::new(
                                ParseErrorKind::Syntax,
                                start,
                                format!("X{i}: only X0..X3 exist"),
                            ));
                        }
                        let mut k = vec![0i64; 4];
                        k[i] = 1;
                        Ok(RawSymbol::Monomial(k))
                    }
                    "E" => {
                        let ch = if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                            self.int()?
                        } else {
                            1
                        };
                        if ch == 0 || ch > u8::MAX as u32 {
                            return Err(ParseError::new(
                                ParseErrorKind::Syntax,
                                start,
                                format!("invalid E channel {ch}"),
                            ));
                        }
                        Ok(RawSymbol::EIntegral(ch as u8, Box::new(self.argument("E")?)))
                    }
                    name => match named_symbols().into_iter().find(|(n, _)| *n == name) {
                        Some((_, s)) => Ok(RawSymbol::from(&s)),
                        None => Err(ParseError::new(
                            ParseErrorKind::Syntax,
                            start,
                            format!("unknown token '{name}'"),
                        )),
                    },
                }
            }
            Some(c) => Err(self.err(ParseErrorKind::Syntax, format!("unexpected '{}'", c as char))),
            None => Err(self.err(ParseErrorKind::Syntax, "unexpected end of input")),
        }
    }
}

/// Parses raw (non-canonical) syntax.
pub fn parse_raw(text: &str) -> Result<RawSymbol, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err(ParseErrorKind::Syntax, "trailing input"));
    }
    Ok(e)
}

/// Parses and canonicalises; `Ok(None)` is the zero element.
pub fn parse_symbol(text: &str, scaling: &Scaling) -> Result<Option<Symbol>, ParseError> {
    let raw = parse_raw(text)?;
    canonicalize(&raw, scaling).map_err(|e| ParseError::new(ParseErrorKind::Structure, 0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d3() -> Scaling {
        Scaling::new(3).unwrap()
    }

    #[test]
    fn powers_and_names() {
        let s = parse_symbol("I(Xi)^2", &d3()).unwrap().unwrap();
        assert_eq!(name_of(&s), Some("RSV"));
        let s = parse_symbol(" I( I(Xi)^3 ) * I(Xi)^2 ", &d3()).unwrap().unwrap();
        assert_eq!(name_of(&s), Some("RSWW"));
        assert_eq!(print_symbol(&s), "I(I(Xi)^3)*I(Xi)^2");
    }

    #[test]
    fn polynomial_integral_is_zero() {
        assert_eq!(parse_symbol("I(X1)", &d3()).unwrap(), None);
        assert_eq!(parse_symbol("I(One)", &d3()).unwrap(), None);
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_symbol("I(Xi", &d3()).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        assert_eq!(e.pos, 4);
        let e = parse_symbol("I()", &d3()).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Arity);
        let e = parse_symbol("I(Xi, Xi)", &d3()).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Arity);
        assert!(parse_symbol("Y", &d3()).is_err());
    }

    #[test]
    fn channels() {
        let a = parse_symbol("E(I(Xi))", &d3()).unwrap().unwrap();
        let b = parse_symbol("E1(I(Xi))", &d3()).unwrap().unwrap();
        assert_eq!(a, b);
        let c = parse_symbol("E2(I(Xi))*X1*X1", &d3()).unwrap().unwrap();
        assert_eq!(print_symbol(&c), "E2(I(Xi))*X1^2");
        assert_eq!(parse_symbol(&print_symbol(&c), &d3()).unwrap().unwrap(), c);
    }
}
