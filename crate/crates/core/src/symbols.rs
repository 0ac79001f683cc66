//! Symbols of the regularity structure: decorated trees built from the noise
//! `Xi`, the unit, polynomial monomials, the heat-kernel integration `I`, the
//! time-integration operators `E_i` and the commutative product.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_rational::Rational64;
use num_traits::{Signed, Zero};

use crate::error::SymbolError;

/// Number of polynomial variables supported: `X0` (time) and up to three
/// spatial directions.
pub const MAX_VARS: usize = 4;

/// Parabolic scaling `(2, 1, ..., 1)` on `R^{d+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scaling {
    dim: usize,
}

impl Scaling {
    pub fn new(dim: usize) -> Result<Self, SymbolError> {
        if !(2..=3).contains(&dim) {
            return Err(SymbolError::Dimension(dim));
        }
        Ok(Scaling { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> Vec<u32> {
        let mut w = vec![1; self.dim + 1];
        w[0] = 2;
        w
    }

    /// Homogeneity of `Xi`: `-(d+2)/2 - kappa`.
    pub fn noise(&self) -> Homogeneity {
        Homogeneity::new(Rational64::new(-(self.dim as i64 + 2), 2), Rational64::from(-1))
    }
}

/// Exact homogeneity `r + s*kappa`, ordered lexicographically (the
/// `kappa -> 0+` order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Homogeneity {
    pub r: Rational64,
    pub s: Rational64,
}

impl Homogeneity {
    pub fn new(r: Rational64, s: Rational64) -> Self {
        Homogeneity { r, s }
    }

    pub fn int(r: i64, s: i64) -> Self {
        Homogeneity::new(Rational64::from(r), Rational64::from(s))
    }

    pub fn zero() -> Self {
        Homogeneity::int(0, 0)
    }

    pub fn is_negative(&self) -> bool {
        *self < Homogeneity::zero()
    }

    pub fn is_positive(&self) -> bool {
        *self > Homogeneity::zero()
    }

    /// Numerical value for a given `kappa`.
    pub fn value(&self, kappa: f64) -> f64 {
        let r = *self.r.numer() as f64 / *self.r.denom() as f64;
        let s = *self.s.numer() as f64 / *self.s.denom() as f64;
        r + s * kappa
    }
}

impl Add for Homogeneity {
    type Output = Homogeneity;
    fn add(self, o: Homogeneity) -> Homogeneity {
        Homogeneity::new(self.r + o.r, self.s + o.s)
    }
}

impl Sub for Homogeneity {
    type Output = Homogeneity;
    fn sub(self, o: Homogeneity) -> Homogeneity {
        Homogeneity::new(self.r - o.r, self.s - o.s)
    }
}

impl Neg for Homogeneity {
    type Output = Homogeneity;
    fn neg(self) -> Homogeneity {
        Homogeneity::new(-self.r, -self.s)
    }
}

fn fmt_rational(q: &Rational64) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for Homogeneity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = fmt_rational(&self.r);
        if self.s.is_zero() {
            return write!(f, "{r}");
        }
        let sign = if self.s.is_negative() { '-' } else { '+' };
        let a = self.s.abs();
        if a == Rational64::from(1) {
            write!(f, "{r} {sign} k")
        } else {
            write!(f, "{r} {sign} {}k", fmt_rational(&a))
        }
    }
}

/// Multiindex `k = (k0, k1, ..., k3)`, `k0` being the time direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MultiIndex(pub [u32; MAX_VARS]);

impl MultiIndex {
    pub fn zero() -> Self {
        MultiIndex([0; MAX_VARS])
    }

    pub fn unit(i: usize) -> Self {
        let mut k = [0; MAX_VARS];
        k[i] = 1;
        MultiIndex(k)
    }

    /// Builds a multiindex from signed entries, rejecting negative ones.
    pub fn from_signed(entries: &[i64]) -> Result<Self, SymbolError> {
        if entries.len() > MAX_VARS {
            return Err(SymbolError::MultiIndex(format!(
                "{} entries, at most {MAX_VARS} supported",
                entries.len()
            )));
        }
        let mut k = [0; MAX_VARS];
        for (i, &e) in entries.iter().enumerate() {
            if e < 0 {
                return Err(SymbolError::MultiIndex(format!("entry {i} is negative ({e})")));
            }
            k[i] = e as u32;
        }
        Ok(MultiIndex(k))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    /// Scaled degree `|k|_s = 2 k0 + sum_{i>=1} ki`.
    pub fn degree(&self) -> u32 {
        2 * self.0[0] + self.0[1..].iter().sum::<u32>()
    }

    pub fn add(&self, o: &MultiIndex) -> MultiIndex {
        let mut k = self.0;
        for (a, b) in k.iter_mut().zip(o.0.iter()) {
            *a += *b;
        }
        MultiIndex(k)
    }

    /// `k!` as a product of factorials.
    pub fn factorial(&self) -> u64 {
        self.0
            .iter()
            .map(|&x| (1..=x as u64).product::<u64>())
            .product()
    }

    /// All multiindices `l <= self` componentwise.
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::zero()];
        for i in 0..MAX_VARS {
            let mut next = Vec::new();
            for base in &out {
                for v in 0..=self.0[i] {
                    let mut k = base.0;
                    k[i] = v;
                    next.push(MultiIndex(k));
                }
            }
            out = next;
        }
        out
    }

    pub fn checked_sub(&self, o: &MultiIndex) -> Option<MultiIndex> {
        let mut k = [0; MAX_VARS];
        for i in 0..MAX_VARS {
            k[i] = self.0[i].checked_sub(o.0[i])?;
        }
        Some(MultiIndex(k))
    }

    /// All multiindices with `|k|_s < bound` (strictly, in the kappa order)
    /// using the variables of dimension `dim`.
    pub fn below(dim: usize, bound: Homogeneity) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let max = bound.r.ceil().to_integer().max(0) as u32;
        let mut k = [0u32; MAX_VARS];
        fn rec(
            i: usize,
            dim: usize,
            max: u32,
            k: &mut [u32; MAX_VARS],
            bound: Homogeneity,
            out: &mut Vec<MultiIndex>,
        ) {
            if i > dim {
                let m = MultiIndex(*k);
                if Homogeneity::int(m.degree() as i64, 0) < bound {
                    out.push(m);
                }
                return;
            }
            for v in 0..=max {
                k[i] = v;
                if MultiIndex(*k).degree() > max {
                    break;
                }
                rec(i + 1, dim, max, k, bound, out);
            }
            k[i] = 0;
        }
        rec(0, dim, max, &mut k, bound, &mut out);
        out
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "X{i}")?;
            } else {
                write!(f, "X{i}^{e}")?;
            }
        }
        if first {
            write!(f, "One")?;
        }
        Ok(())
    }
}

/// Canonical symbol. The derived order (variant rank, then recursive
/// comparison) is the fixed structural order used for canonical products.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Noise,
    Unit,
    Monomial(MultiIndex),
    Integral(Box<Symbol>),
    /// `E_i(child)`, channel `i >= 1`.
    EIntegral(u8, Box<Symbol>),
    /// Flat, sorted, at least two factors, no unit, at most one monomial.
    Product(Vec<Symbol>),
}

/// Unconstrained tree accepted by [`canonicalize`].
#[derive(Debug, Clone, PartialEq)]
pub enum RawSymbol {
    Noise,
    Unit,
    Monomial(Vec<i64>),
    Integral(Box<RawSymbol>),
    EIntegral(u8, Box<RawSymbol>),
    Product(Vec<RawSymbol>),
}

impl Symbol {
    pub fn x(i: usize) -> Symbol {
        Symbol::Monomial(MultiIndex::unit(i))
    }

    pub fn monomial(k: MultiIndex) -> Symbol {
        if k.is_zero() {
            Symbol::Unit
        } else {
            Symbol::Monomial(k)
        }
    }

    /// `I(Xi)`.
    pub fn i_xi() -> Symbol {
        Symbol::Integral(Box::new(Symbol::Noise))
    }

    /// `E_ch(I(Xi))`.
    pub fn e_i_xi(ch: u8) -> Symbol {
        Symbol::EIntegral(ch, Box::new(Symbol::i_xi()))
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self, Symbol::Unit | Symbol::Monomial(_))
    }

    /// Factors of the symbol seen as a product (the unit has none).
    pub fn factors(&self) -> Vec<Symbol> {
        match self {
            Symbol::Unit => vec![],
            Symbol::Product(f) => f.clone(),
            s => vec![s.clone()],
        }
    }

    /// Canonical product of a list of canonical factors.
    pub fn product<I: IntoIterator<Item = Symbol>>(factors: I) -> Symbol {
        let mut mono = MultiIndex::zero();
        let mut rest = Vec::new();
        for f in factors {
            match f {
                Symbol::Unit => {}
                Symbol::Monomial(k) => mono = mono.add(&k),
                Symbol::Product(inner) => {
                    for g in inner {
                        match g {
                            Symbol::Monomial(k) => mono = mono.add(&k),
                            g => rest.push(g),
                        }
                    }
                }
                g => rest.push(g),
            }
        }
        if !mono.is_zero() {
            rest.push(Symbol::Monomial(mono));
        }
        rest.sort();
        match rest.len() {
            0 => Symbol::Unit,
            1 => rest.pop().unwrap(),
            _ => Symbol::Product(rest),
        }
    }

    pub fn mul(&self, other: &Symbol) -> Symbol {
        Symbol::product([self.clone(), other.clone()])
    }

    pub fn pow(&self, n: u32) -> Symbol {
        Symbol::product(std::iter::repeat_n(self.clone(), n as usize))
    }

    /// `I(self)`, or `None` on the polynomial sector.
    pub fn integrate(&self) -> Option<Symbol> {
        if self.is_polynomial() {
            None
        } else {
            Some(Symbol::Integral(Box::new(self.clone())))
        }
    }

    /// `E_ch(self)`, or `None` when the child lies outside the open sector
    /// `(-2, 0)`.
    pub fn extend(&self, ch: u8, scaling: &Scaling) -> Option<Symbol> {
        if self.is_polynomial() || !in_sector(&homogeneity(self, scaling)) {
            None
        } else {
            Some(Symbol::EIntegral(ch, Box::new(self.clone())))
        }
    }

    /// Largest `E` channel index used in the tree (0 if none).
    pub fn max_channel(&self) -> u8 {
        match self {
            Symbol::Integral(c) => c.max_channel(),
            Symbol::EIntegral(ch, c) => (*ch).max(c.max_channel()),
            Symbol::Product(f) => f.iter().map(|s| s.max_channel()).max().unwrap_or(0),
            _ => 0,
        }
    }
}

/// Open sector `V = (-2, 0)` on which `E` acts.
pub fn in_sector(h: &Homogeneity) -> bool {
    *h > Homogeneity::int(-2, 0) && *h < Homogeneity::zero()
}

/// Normal form of a raw tree, `Ok(None)` standing for the zero element.
pub fn canonicalize(raw: &RawSymbol, scaling: &Scaling) -> Result<Option<Symbol>, SymbolError> {
    Ok(match raw {
        RawSymbol::Noise => Some(Symbol::Noise),
        RawSymbol::Unit => Some(Symbol::Unit),
        RawSymbol::Monomial(k) => Some(Symbol::monomial(MultiIndex::from_signed(k)?)),
        RawSymbol::Integral(c) => match canonicalize(c, scaling)? {
            Some(c) => c.integrate(),
            None => None,
        },
        RawSymbol::EIntegral(ch, c) => {
            if *ch == 0 {
                return Err(SymbolError::Channel(0));
            }
            match canonicalize(c, scaling)? {
                Some(c) => c.extend(*ch, scaling),
                None => None,
            }
        }
        RawSymbol::Product(fs) => {
            let mut out = Vec::with_capacity(fs.len());
            for f in fs {
                match canonicalize(f, scaling)? {
                    Some(s) => out.push(s),
                    None => return Ok(None),
                }
            }
            Some(Symbol::product(out))
        }
    })
}

impl From<&Symbol> for RawSymbol {
    fn from(s: &Symbol) -> RawSymbol {
        match s {
            Symbol::Noise => RawSymbol::Noise,
            Symbol::Unit => RawSymbol::Unit,
            Symbol::Monomial(k) => RawSymbol::Monomial(k.0.iter().map(|&x| x as i64).collect()),
            Symbol::Integral(c) => RawSymbol::Integral(Box::new(c.as_ref().into())),
            Symbol::EIntegral(ch, c) => RawSymbol::EIntegral(*ch, Box::new(c.as_ref().into())),
            Symbol::Product(f) => RawSymbol::Product(f.iter().map(RawSymbol::from).collect()),
        }
    }
}

/// Homogeneity of a canonical symbol.
pub fn homogeneity(tau: &Symbol, scaling: &Scaling) -> Homogeneity {
    match tau {
        Symbol::Noise => scaling.noise(),
        Symbol::Unit => Homogeneity::zero(),
        Symbol::Monomial(k) => Homogeneity::int(k.degree() as i64, 0),
        Symbol::Integral(c) => homogeneity(c, scaling) + Homogeneity::int(2, 0),
        Symbol::EIntegral(_, c) => homogeneity(c, scaling),
        Symbol::Product(f) => f
            .iter()
            .fold(Homogeneity::zero(), |acc, s| acc + homogeneity(s, scaling)),
    }
}

/// Number of `Xi` leaves (the Wiener chaos order).
pub fn xi_count(tau: &Symbol) -> usize {
    match tau {
        Symbol::Noise => 1,
        Symbol::Unit | Symbol::Monomial(_) => 0,
        Symbol::Integral(c) | Symbol::EIntegral(_, c) => xi_count(c),
        Symbol::Product(f) => f.iter().map(xi_count).sum(),
    }
}

/// Symbols of `F_F` (plus `E`-decorations) up to a homogeneity cutoff.
#[derive(Debug, Clone)]
pub struct SymbolTable {
    pub dim: usize,
    pub cutoff: Homogeneity,
    pub channels: u8,
    entries: BTreeMap<Symbol, Homogeneity>,
}

impl SymbolTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, s: &Symbol) -> bool {
        self.entries.contains_key(s)
    }

    pub fn get(&self, s: &Symbol) -> Option<Homogeneity> {
        self.entries.get(s).copied()
    }

    /// Entries sorted by increasing homogeneity, ties broken by the
    /// structural order.
    pub fn sorted(&self) -> Vec<(Symbol, Homogeneity)> {
        let mut v: Vec<_> = self.entries.iter().map(|(s, h)| (s.clone(), *h)).collect();
        v.sort_by(|a, b| match a.1.cmp(&b.1) {
            Ordering::Equal => a.0.cmp(&b.0),
            o => o,
        });
        v
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Symbol> {
        self.entries.keys()
    }
}

/// Builds the set `U` (closure of `{1, X_i, I(Xi)}` under `I(t1 t2 t3)`) and
/// `F_F = {Xi} u {t1 t2 t3}` truncated at `cutoff`, then adds the
/// `E`-decorated family for `channels` channels.
pub fn enumerate_symbols(
    dim: usize,
    cutoff: Homogeneity,
    channels: u8,
) -> Result<SymbolTable, SymbolError> {
    let scaling = Scaling::new(dim)?;
    let xi = scaling.noise();
    if cutoff < xi {
        return Err(SymbolError::EmptyTable(cutoff.to_string()));
    }
    let h_ixi = homogeneity(&Symbol::i_xi(), &scaling);
    let min_u = if h_ixi < Homogeneity::zero() { h_ixi } else { Homogeneity::zero() };
    // a factor of a triple product is bounded by cutoff - 2 * min_u
    let bound_u = cutoff - min_u - min_u;

    let mut u: BTreeSet<Symbol> = BTreeSet::new();
    u.insert(Symbol::Unit);
    for i in 0..=dim {
        u.insert(Symbol::x(i));
    }
    u.insert(Symbol::i_xi());
    loop {
        let list: Vec<Symbol> = u.iter().cloned().collect();
        let mut added = false;
        for p in triple_products(&list, &scaling, bound_u - Homogeneity::int(2, 0)) {
            if let Some(s) = p.integrate() {
                if homogeneity(&s, &scaling) <= bound_u && u.insert(s) {
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
    }
    let list: Vec<Symbol> = u.into_iter().collect();
    let mut entries = BTreeMap::new();
    entries.insert(Symbol::Noise, xi);
    for p in triple_products(&list, &scaling, cutoff) {
        let h = homogeneity(&p, &scaling);
        entries.insert(p, h);
    }
    if channels > 0 {
        let base: Vec<Symbol> = entries.keys().cloned().collect();
        for s in base {
            for dec in decorations(&s, channels) {
                let h = homogeneity(&dec, &scaling);
                if h <= cutoff {
                    entries.insert(dec, h);
                }
            }
        }
    }
    Ok(SymbolTable { dim, cutoff, channels, entries })
}

fn triple_products(list: &[Symbol], scaling: &Scaling, bound: Homogeneity) -> Vec<Symbol> {
    let hs: Vec<Homogeneity> = list.iter().map(|s| homogeneity(s, scaling)).collect();
    let mut out = BTreeSet::new();
    for a in 0..list.len() {
        for b in a..list.len() {
            for c in b..list.len() {
                if hs[a] + hs[b] + hs[c] <= bound {
                    out.insert(Symbol::product([list[a].clone(), list[b].clone(), list[c].clone()]));
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Variants of `s` where any subset of the `I(Xi)` factors of the top-level
/// product, and of the products directly under a top-level `I`, are replaced
/// by `E_j(I(Xi))`.
pub fn decorations(s: &Symbol, channels: u8) -> BTreeSet<Symbol> {
    fn decorate_product(factors: &[Symbol], channels: u8, inner: bool) -> BTreeSet<Vec<Symbol>> {
        let mut acc: BTreeSet<Vec<Symbol>> = BTreeSet::new();
        acc.insert(Vec::new());
        for f in factors {
            let mut options = vec![f.clone()];
            if *f == Symbol::i_xi() {
                for ch in 1..=channels {
                    options.push(Symbol::e_i_xi(ch));
                }
            } else if inner {
                if let Symbol::Integral(c) = f {
                    for v in decorate_product(&c.factors(), channels, false) {
                        if let Some(i) = Symbol::product(v).integrate() {
                            options.push(i);
                        }
                    }
                }
            }
            let mut next = BTreeSet::new();
            for prefix in &acc {
                for o in &options {
                    let mut p = prefix.clone();
                    p.push(o.clone());
                    next.insert(p);
                }
            }
            acc = next;
        }
        acc
    }
    decorate_product(&s.factors(), channels, true)
        .into_iter()
        .map(Symbol::product)
        .filter(|d| d != s)
        .collect()
}
