//! Commutative polynomials with exact rational coefficients, and linear
//! combinations of symbols with polynomial coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::grammar::display_symbol;
use crate::symbols::Symbol;

/// Formal indeterminates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// Named scalar such as a coefficient `gamma1`.
    Named(String),
    /// Renormalisation constant `C(tau)`.
    Const(Symbol),
    /// The unit component `phi` of `U`.
    Phi,
    /// The unit component `psi_j` of `V_j`.
    Psi(u8),
    /// `(grad phi)_i`.
    GradPhi(u8),
    /// `(grad psi_j)_i`.
    GradPsi(u8, u8),
    /// Opaque Q-convolved coefficient of `tau` in `V_j`.
    Hat(u8, Symbol),
}

impl Var {
    /// Whether the variable is one of the local state unknowns
    /// (`phi`, `psi`, gradients or hatted coefficients).
    pub fn is_state(&self) -> bool {
        matches!(
            self,
            Var::Phi | Var::Psi(_) | Var::GradPhi(_) | Var::GradPsi(..) | Var::Hat(..)
        )
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Named(s) => write!(f, "{s}"),
            Var::Const(s) => match crate::renorm::constant_name(self) {
                Some(n) => write!(f, "{n}"),
                None => write!(f, "C[{}]", display_symbol(s)),
            },
            Var::Phi => write!(f, "phi"),
            Var::Psi(j) => write!(f, "psi{j}"),
            Var::GradPhi(i) => write!(f, "dphi{i}"),
            Var::GradPsi(j, i) => write!(f, "dpsi{j}_{i}"),
            Var::Hat(j, s) => write!(f, "hat{j}[{}]", display_symbol(s)),
        }
    }
}

/// Monomial in the indeterminates: variable -> exponent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Mono(pub BTreeMap<Var, u32>);

impl Mono {
    pub fn one() -> Self {
        Mono(BTreeMap::new())
    }

    pub fn var(v: Var) -> Self {
        let mut m = BTreeMap::new();
        m.insert(v, 1);
        Mono(m)
    }

    pub fn mul(&self, o: &Mono) -> Mono {
        let mut m = self.0.clone();
        for (v, e) in &o.0 {
            *m.entry(v.clone()).or_insert(0) += e;
        }
        Mono(m)
    }

    pub fn degree_in(&self, v: &Var) -> u32 {
        self.0.get(v).copied().unwrap_or(0)
    }

    pub fn has_state(&self) -> bool {
        self.0.keys().any(Var::is_state)
    }
}

impl fmt::Display for Mono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, e) in &self.0 {
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Polynomial with exact rational coefficients; zero terms are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Poly(pub BTreeMap<Mono, BigRational>);

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl Poly {
    pub fn zero() -> Self {
        Poly(BTreeMap::new())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Poly::zero();
        p.add_term(Mono::one(), c);
        p
    }

    pub fn int(c: i64) -> Self {
        Poly::constant(BigRational::from_integer(BigInt::from(c)))
    }

    pub fn one() -> Self {
        Poly::int(1)
    }

    pub fn var(v: Var) -> Self {
        let mut p = Poly::zero();
        p.add_term(Mono::var(v), BigRational::one());
        p
    }

    pub fn named(s: &str) -> Self {
        Poly::var(Var::Named(s.to_string()))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add_term(&mut self, m: Mono, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let e = self.0.entry(m.clone()).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            self.0.remove(&m);
        }
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly(self.0.iter().map(|(m, v)| (m.clone(), v * c)).collect())
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::one();
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    /// Constant term, if the polynomial is a constant.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.0.len() {
            0 => Some(BigRational::zero()),
            1 => self.0.get(&Mono::one()).cloned(),
            _ => None,
        }
    }

    pub fn has_state(&self) -> bool {
        self.0.keys().any(Mono::has_state)
    }

    /// Splits into (terms free of state variables, terms containing them).
    pub fn split_state(&self) -> (Poly, Poly) {
        let mut a = Poly::zero();
        let mut b = Poly::zero();
        for (m, c) in &self.0 {
            if m.has_state() {
                b.add_term(m.clone(), c.clone());
            } else {
                a.add_term(m.clone(), c.clone());
            }
        }
        (a, b)
    }

    /// Replaces variables by polynomials.
    pub fn substitute(&self, f: &dyn Fn(&Var) -> Option<Poly>) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.0 {
            let mut term = Poly::constant(c.clone());
            for (v, e) in &m.0 {
                let base = f(v).unwrap_or_else(|| Poly::var(v.clone()));
                term = &term * &base.pow(*e);
            }
            out += term;
        }
        out
    }

    /// Numerical value; every variable must be supplied.
    pub fn eval(&self, f: &dyn Fn(&Var) -> Option<f64>) -> Option<f64> {
        let mut s = 0.0;
        for (m, c) in &self.0 {
            let mut t = c.to_f64()?;
            for (v, e) in &m.0 {
                t *= f(v)?.powi(*e as i32);
            }
            s += t;
        }
        Some(s)
    }

    /// Coefficient polynomial of `v^k` (other variables kept).
    pub fn coefficient_of(&self, v: &Var, k: u32) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.0 {
            if m.degree_in(v) == k {
                let mut mm = m.0.clone();
                mm.remove(v);
                out.add_term(Mono(mm), c.clone());
            }
        }
        out
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let mut p = self.clone();
        p += o.clone();
        p
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(mut self, o: Poly) -> Poly {
        self += o;
        self
    }
}

impl AddAssign for Poly {
    fn add_assign(&mut self, o: Poly) {
        for (m, c) in o.0 {
            self.add_term(m, c);
        }
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly(self.0.into_iter().map(|(m, c)| (m, -c)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        self + &(-o.clone())
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, o: Poly) -> Poly {
        self + (-o)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &o.0 {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, o: Poly) -> Poly {
        &self * &o
    }
}

pub(crate) fn fmt_rat(c: &BigRational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.0 {
            let neg = c.is_negative();
            let a = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            if m.0.is_empty() {
                write!(f, "{}", fmt_rat(&a))?;
            } else if a.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", fmt_rat(&a))?;
            }
        }
        Ok(())
    }
}

/// Linear combination of canonical symbols with polynomial coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SymbolSum(pub BTreeMap<Symbol, Poly>);

impl SymbolSum {
    pub fn zero() -> Self {
        SymbolSum(BTreeMap::new())
    }

    pub fn single(s: Symbol) -> Self {
        SymbolSum::term(s, Poly::one())
    }

    pub fn term(s: Symbol, c: Poly) -> Self {
        let mut out = SymbolSum::zero();
        out.add(s, c);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&mut self, s: Symbol, c: Poly) {
        if c.is_zero() {
            return;
        }
        let e = self.0.entry(s.clone()).or_default();
        *e += c;
        if e.is_zero() {
            self.0.remove(&s);
        }
    }

    /// Adds an optional symbol (`None` being zero).
    pub fn add_opt(&mut self, s: Option<Symbol>, c: Poly) {
        if let Some(s) = s {
            self.add(s, c);
        }
    }

    pub fn add_all(&mut self, o: &SymbolSum) {
        for (s, c) in &o.0 {
            self.add(s.clone(), c.clone());
        }
    }

    pub fn scale(&self, c: &Poly) -> SymbolSum {
        let mut out = SymbolSum::zero();
        for (s, v) in &self.0 {
            out.add(s.clone(), v * c);
        }
        out
    }

    pub fn coefficient(&self, s: &Symbol) -> Poly {
        self.0.get(s).cloned().unwrap_or_default()
    }

    pub fn mul(&self, o: &SymbolSum) -> SymbolSum {
        let mut out = SymbolSum::zero();
        for (a, ca) in &self.0 {
            for (b, cb) in &o.0 {
                out.add(a.mul(b), ca * cb);
            }
        }
        out
    }

    pub fn map_symbols(&self, f: impl Fn(&Symbol) -> Option<Symbol>) -> SymbolSum {
        let mut out = SymbolSum::zero();
        for (s, c) in &self.0 {
            out.add_opt(f(s), c.clone());
        }
        out
    }

    pub fn retain(&mut self, f: impl Fn(&Symbol) -> bool) {
        self.0.retain(|s, _| f(s));
    }
}

impl fmt::Display for SymbolSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (s, c) in &self.0 {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let name = display_symbol(s);
            match c.as_constant() {
                Some(k) if k.is_one() => write!(f, "{name}")?,
                Some(k) => write!(f, "{}*{name}", fmt_rat(&k))?,
                None => write!(f, "({c})*{name}")?,
            }
        }
        Ok(())
    }
}
