//! The coproduct `Delta: H -> H (x) H+` and the action of the structure group.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::HopfError;
use crate::grammar::display_symbol;
use crate::poly::{fmt_rat, Poly, SymbolSum};
use crate::symbols::{homogeneity, in_sector, Homogeneity, MultiIndex, Scaling, Symbol};

/// Element `X^k prod_j J_{k_j} tau_j` of the basis of `H+`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlusSymbol {
    pub k: MultiIndex,
    pub factors: Vec<(MultiIndex, Symbol)>,
}

impl PlusSymbol {
    pub fn unit() -> Self {
        PlusSymbol { k: MultiIndex::zero(), factors: vec![] }
    }

    pub fn monomial(k: MultiIndex) -> Self {
        PlusSymbol { k, factors: vec![] }
    }

    /// `J_k tau`.
    pub fn j(k: MultiIndex, tau: Symbol) -> Self {
        PlusSymbol { k: MultiIndex::zero(), factors: vec![(k, tau)] }
    }

    pub fn is_unit(&self) -> bool {
        self.k.is_zero() && self.factors.is_empty()
    }

    pub fn mul(&self, o: &PlusSymbol) -> PlusSymbol {
        let mut factors = self.factors.clone();
        factors.extend(o.factors.iter().cloned());
        factors.sort();
        PlusSymbol { k: self.k.add(&o.k), factors }
    }

    /// Generators in the product: each `X_i` (with multiplicity) and each
    /// `J_k tau`.
    pub fn generators(&self) -> Vec<PlusSymbol> {
        let mut out = Vec::new();
        for (i, &e) in self.k.0.iter().enumerate() {
            for _ in 0..e {
                out.push(PlusSymbol::monomial(MultiIndex::unit(i)));
            }
        }
        for (k, t) in &self.factors {
            out.push(PlusSymbol::j(*k, t.clone()));
        }
        out
    }
}

fn fmt_j(k: &MultiIndex) -> String {
    if k.is_zero() {
        return "J".into();
    }
    let nz: Vec<usize> = (0..k.0.len()).filter(|&i| k.0[i] > 0).collect();
    if nz.len() == 1 && k.0[nz[0]] == 1 {
        format!("J{}", nz[0])
    } else {
        format!("J[{}]", k.0.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
    }
}

impl fmt::Display for PlusSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_unit() {
            return write!(f, "1");
        }
        let mut parts = Vec::new();
        if !self.k.is_zero() {
            parts.push(self.k.to_string());
        }
        for (k, t) in &self.factors {
            parts.push(format!("{}({})", fmt_j(k), display_symbol(t)));
        }
        write!(f, "{}", parts.join("*"))
    }
}

/// Rational linear combination of `tau (x) sigma+`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TensorSum {
    pub terms: BTreeMap<(Symbol, PlusSymbol), BigRational>,
}

impl TensorSum {
    pub fn zero() -> Self {
        TensorSum::default()
    }

    pub fn single(s: Symbol, p: PlusSymbol) -> Self {
        let mut t = TensorSum::zero();
        t.add(s, p, BigRational::one());
        t
    }

    pub fn add(&mut self, s: Symbol, p: PlusSymbol, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let key = (s, p);
        let e = self.terms.entry(key.clone()).or_insert_with(BigRational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn mul(&self, o: &TensorSum) -> TensorSum {
        let mut out = TensorSum::zero();
        for ((a, pa), ca) in &self.terms {
            for ((b, pb), cb) in &o.terms {
                out.add(a.mul(b), pa.mul(pb), ca * cb);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `(Id (x) counit)`: keeps the terms whose right factor is the unit.
    pub fn counit_right(&self) -> BTreeMap<Symbol, BigRational> {
        self.terms
            .iter()
            .filter(|((_, p), _)| p.is_unit())
            .map(|((s, _), c)| (s.clone(), c.clone()))
            .collect()
    }
}

impl fmt::Display for TensorSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        // leading term tau (x) 1 first, then by increasing left homogeneity
        let mut first = true;
        let mut items: Vec<_> = self.terms.iter().collect();
        items.sort_by(|a, b| {
            b.0 .1.is_unit().cmp(&a.0 .1.is_unit()).then_with(|| b.0 .0.cmp(&a.0 .0)).then_with(|| a.0 .1.cmp(&b.0 .1))
        });
        for ((s, p), c) in items {
            let neg = c.is_negative();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            let a = c.abs();
            if !a.is_one() {
                write!(f, "{}*", fmt_rat(&a))?;
            }
            let left = match s {
                Symbol::Unit => "1".to_string(),
                _ => display_symbol(s),
            };
            write!(f, "{left} (x) {p}")?;
        }
        Ok(())
    }
}

fn binomial(n: u32, k: u32) -> BigInt {
    let mut r = BigInt::one();
    for i in 0..k {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

fn factorial(k: &MultiIndex) -> BigInt {
    k.0.iter()
        .map(|&x| (1..=x).fold(BigInt::one(), |acc, v| acc * BigInt::from(v)))
        .fold(BigInt::one(), |a, b| a * b)
}

/// `Delta tau`.
pub fn coproduct(tau: &Symbol, scaling: &Scaling) -> TensorSum {
    match tau {
        Symbol::Noise => TensorSum::single(Symbol::Noise, PlusSymbol::unit()),
        Symbol::Unit => TensorSum::single(Symbol::Unit, PlusSymbol::unit()),
        Symbol::Monomial(k) => {
            let mut out = TensorSum::zero();
            for l in k.sub_indices() {
                let m = k.checked_sub(&l).unwrap();
                let c: BigInt = (0..k.0.len()).map(|i| binomial(k.0[i], l.0[i])).product();
                out.add(Symbol::monomial(l), PlusSymbol::monomial(m), BigRational::from_integer(c));
            }
            out
        }
        Symbol::Product(fs) => fs
            .iter()
            .map(|f| coproduct(f, scaling))
            .reduce(|a, b| a.mul(&b))
            .unwrap_or_else(|| TensorSum::single(Symbol::Unit, PlusSymbol::unit())),
        Symbol::Integral(c) => {
            let mut out = TensorSum::zero();
            for ((s, p), v) in coproduct(c, scaling).terms {
                if let Some(is) = s.integrate() {
                    out.add(is, p, v);
                }
            }
            let bound = homogeneity(c, scaling) + Homogeneity::int(2, 0);
            for k in MultiIndex::below(scaling.dim(), bound) {
                for l in k.sub_indices() {
                    let m = k.checked_sub(&l).unwrap();
                    let coef = BigRational::new(BigInt::one(), factorial(&l) * factorial(&m));
                    let right = PlusSymbol::monomial(m).mul(&PlusSymbol::j(k, c.as_ref().clone()));
                    out.add(Symbol::monomial(l), right, coef);
                }
            }
            out
        }
        Symbol::EIntegral(ch, c) => {
            let mut out = TensorSum::zero();
            for ((s, p), v) in coproduct(c, scaling).terms {
                if let Some(es) = s.extend(*ch, scaling) {
                    out.add(es, p, v);
                }
            }
            out
        }
    }
}

/// True iff `Delta tau = tau (x) 1`.
pub fn is_primitive_for_group(tau: &Symbol, scaling: &Scaling) -> bool {
    coproduct(tau, scaling) == TensorSum::single(tau.clone(), PlusSymbol::unit())
}

/// Multiplicative functional on `H+`, given by its values on the generators
/// `X_i` and `J_k tau`.
#[derive(Debug, Clone, Default)]
pub struct GroupElement {
    pub values: BTreeMap<PlusSymbol, BigRational>,
    /// Value used for generators absent from `values`; `None` makes a
    /// missing generator an error.
    pub fallback: Option<BigRational>,
}

impl GroupElement {
    /// The counit: zero on every generator.
    pub fn identity() -> Self {
        GroupElement { values: BTreeMap::new(), fallback: Some(BigRational::zero()) }
    }

    /// Element with no values; every generator must be supplied.
    pub fn strict() -> Self {
        GroupElement::default()
    }

    pub fn with(mut self, generator: PlusSymbol, value: BigRational) -> Self {
        self.values.insert(generator, value);
        self
    }

    /// Polynomial translation: `<g, X_i> = -h_i`.
    pub fn translation(h: &[BigRational]) -> Self {
        let mut g = GroupElement::strict();
        for (i, v) in h.iter().enumerate() {
            g.values.insert(PlusSymbol::monomial(MultiIndex::unit(i)), -v.clone());
        }
        g
    }

    pub fn eval(&self, p: &PlusSymbol) -> Result<BigRational, HopfError> {
        let mut out = BigRational::one();
        for gen in p.generators() {
            match self.values.get(&gen) {
                Some(v) => out *= v,
                None => match &self.fallback {
                    Some(v) => out *= v,
                    None => return Err(HopfError::MissingGenerator(gen.to_string())),
                },
            }
        }
        Ok(out)
    }
}

/// `Gamma_g tau = (Id (x) g) Delta tau`.
pub fn group_action(g: &GroupElement, tau: &Symbol, scaling: &Scaling) -> Result<SymbolSum, HopfError> {
    let mut out = SymbolSum::zero();
    for ((s, p), c) in coproduct(tau, scaling).terms {
        let v = if p.is_unit() { BigRational::one() } else { g.eval(&p)? };
        out.add(s, Poly::constant(c * v));
    }
    Ok(out)
}

/// Whether `s` lies in the sector on which `E` acts.
pub fn e_admissible(s: &Symbol, scaling: &Scaling) -> bool {
    in_sector(&homogeneity(s, scaling))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::named_symbols;

    fn sym(n: &str) -> Symbol {
        named_symbols().into_iter().find(|(m, _)| *m == n).unwrap().1
    }

    #[test]
    fn monomial_binomial() {
        let s = Scaling::new(3).unwrap();
        let x1 = Symbol::x(1);
        let d = coproduct(&x1.pow(2), &s);
        assert_eq!(d.len(), 3);
        let two = BigRational::from_integer(2.into());
        assert_eq!(
            d.terms.get(&(x1.clone(), PlusSymbol::monomial(MultiIndex::unit(1)))),
            Some(&two)
        );
    }

    #[test]
    fn identity_action() {
        let s = Scaling::new(3).unwrap();
        for (_, t) in named_symbols() {
            let r = group_action(&GroupElement::identity(), &t, &s).unwrap();
            assert_eq!(r, SymbolSum::single(t.clone()));
        }
    }

    #[test]
    fn missing_generator_named() {
        let s = Scaling::new(3).unwrap();
        let g = GroupElement::strict().with(PlusSymbol::monomial(MultiIndex::unit(1)), BigRational::one());
        let e = group_action(&g, &sym("RSVW"), &s).unwrap_err();
        assert!(e.to_string().contains("J(RSW)"), "{e}");
    }
}
