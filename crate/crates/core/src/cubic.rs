//! Cubic nonlinearities `F(u, v_1, ..., v_n)`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{ParseError, ParseErrorKind};
use crate::poly::{fmt_rat, Poly};

/// Coefficients of a polynomial of total degree at most three in `u` and
/// `v_1..v_n`, keyed by the exponent vector `[deg_u, deg_v1, ..., deg_vn]`.
///
/// Coefficients are polynomials so that the same record can hold exact
/// numbers or formal names such as `gamma1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CubicPolynomial {
    pub n: usize,
    pub terms: BTreeMap<Vec<u32>, Poly>,
}

fn key(n: usize, u: u32, vs: &[usize]) -> Vec<u32> {
    let mut k = vec![0; n + 1];
    k[0] = u;
    for &i in vs {
        k[i] += 1;
    }
    k
}

impl CubicPolynomial {
    pub fn zero(n: usize) -> Self {
        CubicPolynomial { n, terms: BTreeMap::new() }
    }

    /// `u - u^3 + v`.
    pub fn standard_fhn() -> Self {
        let mut f = CubicPolynomial::zero(1);
        f.set(&[1, 0], Poly::int(1));
        f.set(&[3, 0], Poly::int(-1));
        f.set(&[0, 1], Poly::int(1));
        f
    }

    /// `3u + v1 - u^3` with two gating variables.
    pub fn koper() -> Self {
        let mut f = CubicPolynomial::zero(2);
        f.set(&[1, 0, 0], Poly::int(3));
        f.set(&[0, 1, 0], Poly::int(1));
        f.set(&[3, 0, 0], Poly::int(-1));
        f
    }

    /// Every admissible monomial with a formal coefficient
    /// (`alpha1`, `beta2_1`, `gamma3_11`, ... ; channel suffixes dropped
    /// when `n = 1`).
    pub fn symbolic(n: usize) -> Self {
        let mut f = CubicPolynomial::zero(n);
        for k in all_exponents(n) {
            f.set(&k, Poly::named(&coefficient_name(&k)));
        }
        f
    }

    pub fn set(&mut self, k: &[u32], c: Poly) {
        assert_eq!(k.len(), self.n + 1, "exponent vector length");
        if c.is_zero() {
            self.terms.remove(k);
        } else {
            self.terms.insert(k.to_vec(), c);
        }
    }

    /// Drops the monomial with exponents `k`.
    pub fn without(mut self, k: &[u32]) -> Self {
        self.terms.remove(k);
        self
    }

    pub fn coefficient(&self, k: &[u32]) -> Poly {
        self.terms.get(k).cloned().unwrap_or_default()
    }

    pub fn alpha1(&self) -> Poly {
        self.coefficient(&key(self.n, 1, &[]))
    }
    pub fn beta1(&self) -> Poly {
        self.coefficient(&key(self.n, 2, &[]))
    }
    pub fn gamma1(&self) -> Poly {
        self.coefficient(&key(self.n, 3, &[]))
    }
    /// Coefficient of `v_i` (channels start at 1).
    pub fn alpha2(&self, i: usize) -> Poly {
        self.coefficient(&key(self.n, 0, &[i]))
    }
    pub fn beta2(&self, i: usize) -> Poly {
        self.coefficient(&key(self.n, 1, &[i]))
    }
    pub fn gamma2(&self, i: usize) -> Poly {
        self.coefficient(&key(self.n, 2, &[i]))
    }
    /// Coefficient of the monomial `v_i v_j`.
    pub fn beta3(&self, i: usize, j: usize) -> Poly {
        self.coefficient(&key(self.n, 0, &[i, j]))
    }
    pub fn gamma3(&self, i: usize, j: usize) -> Poly {
        self.coefficient(&key(self.n, 1, &[i, j]))
    }
    pub fn gamma4(&self, i: usize, j: usize, l: usize) -> Poly {
        self.coefficient(&key(self.n, 0, &[i, j, l]))
    }

    /// Numeric coefficients, if every coefficient is a rational constant.
    pub fn numeric(&self) -> Option<Vec<(Vec<u32>, f64)>> {
        self.terms
            .iter()
            .map(|(k, c)| Some((k.clone(), c.as_constant()?.to_f64()?)))
            .collect()
    }

    /// `F(u, v)` for numeric coefficients.
    pub fn eval(&self, u: f64, v: &[f64]) -> f64 {
        let mut s = 0.0;
        for (k, c) in &self.terms {
            let c = c.as_constant().and_then(|c| c.to_f64()).expect("numeric coefficients");
            let mut t = c * u.powi(k[0] as i32);
            for (i, &e) in k[1..].iter().enumerate() {
                t *= v[i].powi(e as i32);
            }
            s += t;
        }
        s
    }
}

pub(crate) fn all_exponents(n: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..=n {
        let mut next = Vec::new();
        for k in &out {
            for e in 0..=3u32 {
                let mut k2: Vec<u32> = k.clone();
                k2.push(e);
                if k2.iter().sum::<u32>() <= 3 {
                    next.push(k2);
                }
            }
        }
        out = next;
    }
    out.retain(|k| k.iter().sum::<u32>() > 0);
    out
}

fn coefficient_name(k: &[u32]) -> String {
    let n = k.len() - 1;
    let deg: u32 = k.iter().sum();
    let du = k[0];
    let mut channels = String::new();
    for (i, &e) in k[1..].iter().enumerate() {
        for _ in 0..e {
            channels.push_str(&(i + 1).to_string());
        }
    }
    let (letter, idx) = match (deg, du) {
        (1, 1) => ("alpha", 1),
        (1, 0) => ("alpha", 2),
        (2, 2) => ("beta", 1),
        (2, 1) => ("beta", 2),
        (2, 0) => ("beta", 3),
        (3, 3) => ("gamma", 1),
        (3, 2) => ("gamma", 2),
        (3, 1) => ("gamma", 3),
        _ => ("gamma", 4),
    };
    if channels.is_empty() || n == 1 {
        format!("{letter}{idx}")
    } else {
        format!("{letter}{idx}_{channels}")
    }
}

impl fmt::Display for CubicPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        for (k, c) in self.terms.iter().rev() {
            let mut m = Vec::new();
            if k[0] > 0 {
                m.push(if k[0] == 1 { "u".to_string() } else { format!("u^{}", k[0]) });
            }
            for (i, &e) in k[1..].iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let name = if self.n == 1 { "v".to_string() } else { format!("v{}", i + 1) };
                m.push(if e == 1 { name } else { format!("{name}^{e}") });
            }
            let mono = m.join("*");
            if mono.is_empty() {
                parts.push(format!("{c}"));
                continue;
            }
            let coef = match c.as_constant() {
                Some(q) if q.is_one() => String::new(),
                Some(q) if q == -BigRational::one() => "-".into(),
                Some(q) => format!("{}*", fmt_rat(&q)),
                None => format!("({c})*"),
            };
            parts.push(format!("{coef}{mono}"));
        }
        write!(f, "{}", parts.join(" + ").replace("+ -", "- "))
    }
}

/// Parses a polynomial in `u` and `v` (or `v1..vn`) of degree at most 3 with
/// rational coefficients, e.g. `u - u^3 + v` or `3*u + v1 - u^3`.
pub fn parse_nonlinearity(text: &str, n: usize) -> Result<CubicPolynomial, ParseError> {
    let mut p = PolyParser { s: text.as_bytes(), pos: 0, n };
    let terms = p.sum()?;
    p.ws();
    if p.pos < p.s.len() {
        return Err(ParseError::new(ParseErrorKind::Syntax, p.pos, "trailing input"));
    }
    let mut f = CubicPolynomial::zero(n);
    for (k, c) in terms {
        if k.iter().sum::<u32>() > 3 {
            return Err(ParseError::new(ParseErrorKind::Degree, 0, "total degree above 3 is not supported"));
        }
        f.set(&k, Poly::constant(c));
    }
    Ok(f)
}

type Terms = BTreeMap<Vec<u32>, BigRational>;

struct PolyParser<'a> {
    s: &'a [u8],
    pos: usize,
    n: usize,
}

impl PolyParser<'_> {
    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.pos).copied()
    }

    fn err(&self, kind: ParseErrorKind, msg: &str) -> ParseError {
        ParseError::new(kind, self.pos, msg)
    }

    fn add_into(acc: &mut Terms, t: Terms, sign: i64) {
        for (k, c) in t {
            let e = acc.entry(k.clone()).or_insert_with(BigRational::zero);
            *e += c * BigRational::from_integer(sign.into());
            if e.is_zero() {
                acc.remove(&k);
            }
        }
    }

    fn mul(&self, a: &Terms, b: &Terms) -> Terms {
        let mut out = Terms::new();
        for (ka, ca) in a {
            for (kb, cb) in b {
                let k: Vec<u32> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
                Self::add_into(&mut out, [(k, ca * cb)].into_iter().collect(), 1);
            }
        }
        out
    }

    fn sum(&mut self) -> Result<Terms, ParseError> {
        let mut acc = Terms::new();
        let mut sign = 1;
        if let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            sign = if c == b'-' { -1 } else { 1 };
        }
        let t = self.product()?;
        Self::add_into(&mut acc, t, sign);
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let t = self.product()?;
            Self::add_into(&mut acc, t, if c == b'-' { -1 } else { 1 });
        }
        Ok(acc)
    }

    fn product(&mut self) -> Result<Terms, ParseError> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let t = self.power()?;
                    acc = self.mul(&acc, &t);
                }
                Some(b'/') => {
                    self.pos += 1;
                    let d = self.number()?;
                    if d.is_zero() {
                        return Err(self.err(ParseErrorKind::Syntax, "division by zero"));
                    }
                    for c in acc.values_mut() {
                        *c /= d.clone();
                    }
                }
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> Result<Terms, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.number()?;
            if !e.is_integer() || e < BigRational::zero() || e > BigRational::from_integer(16.into()) {
                return Err(self.err(ParseErrorKind::Syntax, "exponent must be a small non-negative integer"));
            }
            let e = e.to_integer().to_u32().unwrap();
            let mut out: Terms = [(vec![0; self.n + 1], BigRational::one())].into_iter().collect();
            for _ in 0..e {
                out = self.mul(&out, &base);
            }
            return Ok(out);
        }
        Ok(base)
    }

    fn number(&mut self) -> Result<BigRational, ParseError> {
        self.ws();
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.') {
            self.pos += 1;
        }
        let txt = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
        if txt.is_empty() {
            return Err(ParseError::new(ParseErrorKind::Syntax, start, "expected a number"));
        }
        let (int, frac) = txt.split_once('.').unwrap_or((txt, ""));
        let digits = format!("{int}{frac}");
        let num: BigInt = digits
            .parse()
            .map_err(|_| ParseError::new(ParseErrorKind::Syntax, start, "malformed number"))?;
        let den = BigInt::from(10).pow(frac.len() as u32);
        Ok(BigRational::new(num, den))
    }

    fn atom(&mut self) -> Result<Terms, ParseError> {
        let unit = vec![0; self.n + 1];
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let t = self.sum()?;
                if self.peek() != Some(b')') {
                    return Err(self.err(ParseErrorKind::Syntax, "expected ')'"));
                }
                self.pos += 1;
                Ok(t)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let v = self.number()?;
                Ok([(unit, v)].into_iter().collect())
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let id = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                let mut k = unit;
                match id {
                    "u" => k[0] = 1,
                    "v" if self.n == 1 => k[1] = 1,
                    _ => {
                        let idx = id
                            .strip_prefix('v')
                            .and_then(|r| r.parse::<usize>().ok())
                            .filter(|&i| i >= 1 && i <= self.n);
                        match idx {
                            Some(i) => k[i] = 1,
                            None => {
                                return Err(ParseError::new(
                                    ParseErrorKind::UnknownVariable,
                                    start,
                                    format!("'{id}' (expected u, v or v1..v{})", self.n),
                                ))
                            }
                        }
                    }
                }
                Ok([(k, BigRational::one())].into_iter().collect())
            }
            Some(c) => Err(self.err(ParseErrorKind::Syntax, &format!("unexpected '{}'", c as char))),
            None => Err(self.err(ParseErrorKind::Syntax, "unexpected end of input")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fhn() {
        let f = parse_nonlinearity("u - u^3 + v", 1).unwrap();
        assert_eq!(f, CubicPolynomial::standard_fhn());
        assert_eq!(f.alpha1(), Poly::int(1));
        assert_eq!(f.gamma1(), Poly::int(-1));
        assert_eq!(f.alpha2(1), Poly::int(1));
        assert!(f.beta1().is_zero());
    }

    #[test]
    fn koper_and_zero() {
        let f = parse_nonlinearity("3*u + v1 - u^3", 2).unwrap();
        assert_eq!(f, CubicPolynomial::koper());
        assert!(parse_nonlinearity("0", 1).unwrap().terms.is_empty());
        assert!(parse_nonlinearity(" u*(u - 1)/2 ", 1).unwrap().beta1() == Poly::constant(BigRational::new(1.into(), 2.into())));
    }

    #[test]
    fn errors() {
        assert_eq!(parse_nonlinearity("u^4", 1).unwrap_err().kind, ParseErrorKind::Degree);
        assert_eq!(parse_nonlinearity("u + w", 1).unwrap_err().kind, ParseErrorKind::UnknownVariable);
        assert_eq!(parse_nonlinearity("v3", 2).unwrap_err().kind, ParseErrorKind::UnknownVariable);
        assert_eq!(parse_nonlinearity("u +", 1).unwrap_err().kind, ParseErrorKind::Syntax);
    }

    #[test]
    fn symbolic_names() {
        let f = CubicPolynomial::symbolic(1);
        assert_eq!(f.terms.len(), 9);
        assert_eq!(f.gamma2(1), Poly::named("gamma2"));
        let g = CubicPolynomial::symbolic(2);
        assert_eq!(g.beta3(1, 2), Poly::named("beta3_12"));
        assert_eq!(g.terms.len(), 19);
    }
}
