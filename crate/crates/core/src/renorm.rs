//! The renormalisation subgroup `M = exp(-sum C(tau) L_tau)`, the expansion
//! of the fixed point and the renormalised nonlinearity.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};

use crate::cubic::CubicPolynomial;
use crate::error::RenormError;
use crate::grammar::display_symbol;
use crate::poly::{Poly, SymbolSum, Var};
use crate::symbols::{homogeneity, Homogeneity, Scaling, Symbol};

/// Leaves that can be contracted: `I(Xi)` and `E_j(I(Xi))`.
fn is_leaf(s: &Symbol) -> bool {
    match s {
        Symbol::Integral(c) => **c == Symbol::Noise,
        Symbol::EIntegral(_, c) => **c == Symbol::i_xi(),
        _ => false,
    }
}

/// Leaves `I(Xi), E_1 I(Xi), ..., E_n I(Xi)`.
pub fn leaves(n: u8) -> Vec<Symbol> {
    let mut v = vec![Symbol::i_xi()];
    v.extend((1..=n).map(Symbol::e_i_xi));
    v
}

/// `F_1` (pairs of leaves) for `n` channels.
pub fn first_generators(n: u8) -> Vec<Symbol> {
    let l = leaves(n);
    let mut out = Vec::new();
    for i in 0..l.len() {
        for j in i..l.len() {
            out.push(l[i].mul(&l[j]));
        }
    }
    out
}

/// `F_2 = { I(t1) t2 : t1, t2 in F_1 }`.
pub fn second_generators(n: u8) -> Vec<Symbol> {
    let f1 = first_generators(n);
    let mut out = Vec::new();
    for a in &f1 {
        for b in &f1 {
            out.push(a.integrate().unwrap().mul(b));
        }
    }
    out
}

/// `F_1 u F_2`.
pub fn generators(n: u8) -> Vec<Symbol> {
    let mut g = first_generators(n);
    g.extend(second_generators(n));
    g
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Pattern {
    Pair(Symbol, Symbol),
    Nested { inner: (Symbol, Symbol), outer: (Symbol, Symbol) },
}

fn leaf_pair(fs: &[Symbol]) -> Option<(Symbol, Symbol)> {
    if fs.len() == 2 && fs.iter().all(is_leaf) {
        Some((fs[0].clone(), fs[1].clone()))
    } else {
        None
    }
}

fn pattern_of(gen: &Symbol) -> Result<Pattern, RenormError> {
    let not_gen = || RenormError::NotAGenerator(display_symbol(gen));
    let fs = gen.factors();
    if let Some(p) = leaf_pair(&fs) {
        return Ok(Pattern::Pair(p.0, p.1));
    }
    if fs.len() != 3 {
        return Err(not_gen());
    }
    let (ints, rest): (Vec<_>, Vec<_>) = fs.iter().cloned().partition(|f| !is_leaf(f));
    match (ints.as_slice(), leaf_pair(&rest)) {
        ([Symbol::Integral(c)], Some(outer)) => {
            let inner = leaf_pair(&c.factors()).ok_or_else(not_gen)?;
            Ok(Pattern::Nested { inner, outer })
        }
        _ => Err(not_gen()),
    }
}

fn matches_pair(a: &Symbol, b: &Symbol, p: &(Symbol, Symbol)) -> bool {
    (a == &p.0 && b == &p.1) || (a == &p.1 && b == &p.0)
}

/// Index pairs `i < j` among `fs` whose leaves match `p`.
fn pair_sites(fs: &[Symbol], p: &(Symbol, Symbol)) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..fs.len() {
        for j in i + 1..fs.len() {
            if matches_pair(&fs[i], &fs[j], p) {
                out.push((i, j));
            }
        }
    }
    out
}

fn without(fs: &[Symbol], skip: &[usize]) -> Vec<Symbol> {
    fs.iter()
        .enumerate()
        .filter(|(i, _)| !skip.contains(i))
        .map(|(_, s)| s.clone())
        .collect()
}

/// Rejects symbols outside the families for which the contraction rules
/// are validated: `E` only wraps `I(Xi)`, and `Xi` only occurs under `I`
/// (or is the whole symbol).
fn check_supported(sigma: &Symbol) -> Result<(), RenormError> {
    fn inner(s: &Symbol, whole: &Symbol) -> Result<(), RenormError> {
        let bad = |why: &str| {
            Err(RenormError::UnsupportedPattern(format!("{} ({why})", display_symbol(whole))))
        };
        match s {
            Symbol::Noise => bad("bare Xi inside a product"),
            Symbol::Unit | Symbol::Monomial(_) => Ok(()),
            Symbol::Integral(c) => {
                if **c == Symbol::Noise {
                    Ok(())
                } else {
                    inner(c, whole)
                }
            }
            Symbol::EIntegral(_, c) => {
                if **c == Symbol::i_xi() {
                    Ok(())
                } else {
                    bad("E applied to a symbol other than I(Xi)")
                }
            }
            Symbol::Product(fs) => fs.iter().try_for_each(|f| inner(f, whole)),
        }
    }
    if *sigma == Symbol::Noise {
        return Ok(());
    }
    inner(sigma, sigma)
}

/// All single contractions of `pat` inside the product node with factors
/// `fs`; `None` entries are annihilated terms.
fn contractions(fs: &[Symbol], pat: &Pattern) -> Vec<Option<Symbol>> {
    let mut out = Vec::new();
    match pat {
        Pattern::Pair(a, b) => {
            for (i, j) in pair_sites(fs, &(a.clone(), b.clone())) {
                out.push(Some(Symbol::product(without(fs, &[i, j]))));
            }
        }
        Pattern::Nested { inner, outer } => {
            for (p, f) in fs.iter().enumerate() {
                if let Symbol::Integral(c) = f {
                    let gs = c.factors();
                    for (i, j) in pair_sites(&gs, inner) {
                        let rest = without(fs, &[p]);
                        for (k, l) in pair_sites(&rest, outer) {
                            let mut all = without(&gs, &[i, j]);
                            all.extend(without(&rest, &[k, l]));
                            out.push(Some(Symbol::product(all)));
                        }
                    }
                }
            }
        }
    }
    // contractions strictly inside an I
    for (p, f) in fs.iter().enumerate() {
        if let Symbol::Integral(c) = f {
            if **c == Symbol::Noise {
                continue;
            }
            for r in contractions(&c.factors(), pat) {
                let replaced = r.and_then(|r| r.integrate());
                out.push(replaced.map(|ir| {
                    let mut all = without(fs, &[p]);
                    all.push(ir);
                    Symbol::product(all)
                }));
            }
        }
    }
    out
}

/// `L_gen sigma`: sum over the extraction sites of the pattern `gen` in
/// `sigma`, each contracted to the unit.
pub fn generator_action(gen: &Symbol, sigma: &Symbol) -> Result<SymbolSum, RenormError> {
    let pat = pattern_of(gen)?;
    check_supported(sigma)?;
    let mut out = SymbolSum::zero();
    if *sigma == Symbol::Noise {
        return Ok(out);
    }
    for r in contractions(&sigma.factors(), &pat) {
        out.add_opt(r, Poly::one());
    }
    Ok(out)
}

/// Values `C(tau)` of the constants, keyed by generator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenormConstants {
    pub values: BTreeMap<Symbol, Poly>,
}

impl RenormConstants {
    pub fn none() -> Self {
        RenormConstants::default()
    }

    /// Formal constants `C(tau)` for every generator with `n` channels.
    pub fn formal(n: u8) -> Self {
        let mut c = RenormConstants::none();
        for g in generators(n) {
            c.values.insert(g.clone(), Poly::var(Var::Const(g)));
        }
        c
    }

    /// Only `C1 = C(RSV)` and `C2 = C(RSWV)` (the latter omitted when
    /// `with_c2` is false).
    pub fn c1_c2(with_c2: bool) -> Self {
        let v = Symbol::i_xi().pow(2);
        let wv = v.integrate().unwrap().mul(&v);
        let mut c = RenormConstants::none();
        c.values.insert(v.clone(), Poly::var(Var::Const(v)));
        if with_c2 {
            c.values.insert(wv.clone(), Poly::var(Var::Const(wv)));
        }
        c
    }

    pub fn set(mut self, gen: Symbol, value: Poly) -> Result<Self, RenormError> {
        pattern_of(&gen)?;
        self.values.insert(gen, value);
        Ok(self)
    }
}

/// The formal constant `C1 = C(RSV)`.
pub fn c1() -> Poly {
    Poly::var(Var::Const(Symbol::i_xi().pow(2)))
}

/// The formal constant `C2 = C(RSWV)`.
pub fn c2() -> Poly {
    let v = Symbol::i_xi().pow(2);
    Poly::var(Var::Const(v.integrate().unwrap().mul(&v)))
}

fn apply_generators(c: &RenormConstants, x: &SymbolSum) -> Result<SymbolSum, RenormError> {
    let mut out = SymbolSum::zero();
    for (s, coef) in &x.0 {
        for (g, cg) in &c.values {
            let l = generator_action(g, s)?;
            out.add_all(&l.scale(&(coef * cg)));
        }
    }
    Ok(out)
}

/// `M sigma = sum_n (1/n!) (-sum_g C(g) L_g)^n sigma`.
pub fn renorm_map(c: &RenormConstants, sigma: &Symbol) -> Result<SymbolSum, RenormError> {
    renorm_map_sum(c, &SymbolSum::single(sigma.clone()))
}

/// `M` on a linear combination.
pub fn renorm_map_sum(c: &RenormConstants, x: &SymbolSum) -> Result<SymbolSum, RenormError> {
    let mut total = x.clone();
    let mut term = x.clone();
    let mut k = 1i64;
    while !term.is_zero() {
        let next = apply_generators(c, &term)?;
        term = next.scale(&Poly::constant(BigRational::new(BigInt::from(-1), BigInt::from(k))));
        total.add_all(&term);
        k += 1;
    }
    Ok(total)
}

/// Coefficients of the truncated expansion of the fixed point: the
/// coefficient `a` or `b` attached to each symbol `I(t)` of `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionCoefficients {
    pub n: u8,
    pub coefficients: BTreeMap<Symbol, Poly>,
}

impl ExpansionCoefficients {
    pub fn get(&self, s: &Symbol) -> Poly {
        self.coefficients.get(s).cloned().unwrap_or_default()
    }

    /// `a_1..a_4` for one channel: coefficients of `I(I(Xi)^(3-m) E(I(Xi))^m)`.
    pub fn a(&self, i: usize) -> Poly {
        self.get(&triple_leaf_integral(3 - (i - 1), i - 1))
    }

    /// `b_1..b_3` for one channel: coefficients of `I(I(Xi)^(2-m) E(I(Xi))^m)`.
    pub fn b(&self, i: usize) -> Poly {
        self.get(&triple_leaf_integral(2 - (i - 1), i - 1))
    }
}

fn triple_leaf_integral(plain: usize, decorated: usize) -> Symbol {
    let p = Symbol::i_xi().pow(plain as u32).mul(&Symbol::e_i_xi(1).pow(decorated as u32));
    p.integrate().unwrap()
}

/// `F(U, V)` for symbol-valued arguments.
pub fn eval_cubic(f: &CubicPolynomial, u: &SymbolSum, v: &[SymbolSum]) -> SymbolSum {
    let mut powers_u = vec![SymbolSum::single(Symbol::Unit)];
    for i in 1..=3 {
        powers_u.push(powers_u[i - 1].mul(u));
    }
    let powers_v: Vec<Vec<SymbolSum>> = v
        .iter()
        .map(|vj| {
            let mut p = vec![SymbolSum::single(Symbol::Unit)];
            for i in 1..=3 {
                p.push(p[i - 1].mul(vj));
            }
            p
        })
        .collect();
    let mut out = SymbolSum::zero();
    for (k, c) in &f.terms {
        let mut t = powers_u[k[0] as usize].clone();
        for (j, &e) in k[1..].iter().enumerate() {
            t = t.mul(&powers_v[j][e as usize]);
        }
        out.add_all(&t.scale(c));
    }
    out
}

fn u0_v0(n: u8) -> (SymbolSum, Vec<SymbolSum>) {
    let mut u = SymbolSum::single(Symbol::i_xi());
    u.add(Symbol::Unit, Poly::var(Var::Phi));
    let v = (1..=n)
        .map(|j| {
            let mut v = SymbolSum::single(Symbol::e_i_xi(j));
            v.add(Symbol::Unit, Poly::var(Var::Psi(j)));
            v
        })
        .collect();
    (u, v)
}

/// Coefficients `a`, `b` of the expansion of `U`, read off from
/// `F(I(Xi) + phi, E I(Xi) + psi)` on products of two and three leaves.
pub fn expansion_coefficients(f: &CubicPolynomial) -> ExpansionCoefficients {
    let n = f.n as u8;
    let (u, v) = u0_v0(n);
    let fv = eval_cubic(f, &u, &v);
    let mut coefficients = BTreeMap::new();
    for (s, c) in &fv.0 {
        let fs = s.factors();
        if fs.len() >= 2 && fs.iter().all(is_leaf) {
            coefficients.insert(s.integrate().unwrap(), c.clone());
        }
    }
    ExpansionCoefficients { n, coefficients }
}

/// Term of `M F - F` that does not fit the renormalised form.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstructionTerm {
    pub symbol: Symbol,
    pub coefficient: Poly,
}

impl fmt::Display for ObstructionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) * {}", self.coefficient, display_symbol(&self.symbol))
    }
}

/// `F_hat = F - c0 - c1 u - sum_i c2_i v_i`, or the list of terms
/// preventing this form.
#[derive(Debug, Clone, PartialEq)]
pub struct RenormalizedF {
    pub dim: usize,
    pub c0: Poly,
    pub c1: Poly,
    pub c2: Vec<Poly>,
    pub obstruction: Vec<ObstructionTerm>,
}

impl RenormalizedF {
    pub fn is_obstructed(&self) -> bool {
        !self.obstruction.is_empty()
    }

    /// `C(eps)` in the form `c1 = gamma1 C(eps)`, given `gamma1`; only
    /// meaningful for nonzero numeric `gamma1`.
    pub fn counterterms(&self) -> (Poly, Poly, Vec<Poly>) {
        (-self.c0.clone(), -self.c1.clone(), self.c2.iter().map(|c| -c.clone()).collect())
    }
}

impl fmt::Display for RenormalizedF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "c0 = {}", self.c0)?;
        writeln!(f, "c1 = {}", self.c1)?;
        for (i, c) in self.c2.iter().enumerate() {
            writeln!(f, "c2_{} = {}", i + 1, c)?;
        }
        if !self.obstruction.is_empty() {
            writeln!(f, "obstruction ({} terms):", self.obstruction.len())?;
            for t in &self.obstruction {
                writeln!(f, "  {t}")?;
            }
        }
        Ok(())
    }
}

/// Derives the renormalised nonlinearity: builds `F(U, V)` on the truncated
/// expansion, applies `M` with `C1 = C(RSV)` and (for `d = 3`)
/// `C2 = C(RSWV)`, and factors `M F - F` on `{1, RSI, E_j RSI}`.
pub fn renormalized_nonlinearity(f: &CubicPolynomial, dim: usize) -> Result<RenormalizedF, RenormError> {
    let scaling = Scaling::new(dim)?;
    let n = f.n as u8;
    let remainder = Homogeneity::new(Rational64::new(3, 2), Rational64::from(-1));
    let (u0, v0) = u0_v0(n);

    let mut u = u0.clone();
    let mut v = v0.clone();
    let expansion = expansion_coefficients(f);
    for (s, c) in &expansion.coefficients {
        if homogeneity(s, &scaling) < remainder {
            u.add(s.clone(), c.clone());
            for (j, vj) in v.iter_mut().enumerate() {
                vj.add(s.clone(), Poly::var(Var::Hat(j as u8 + 1, s.clone())));
            }
        }
    }
    for i in 1..=dim {
        let x = Symbol::x(i);
        if homogeneity(&x, &scaling) < remainder {
            u.add(x.clone(), Poly::var(Var::GradPhi(i as u8)));
            for (j, vj) in v.iter_mut().enumerate() {
                vj.add(x.clone(), Poly::var(Var::GradPsi(j as u8 + 1, i as u8)));
            }
        }
    }

    let mut fuv = eval_cubic(f, &u, &v);
    fuv.retain(|s| !homogeneity(s, &scaling).is_positive());
    let consts = RenormConstants::c1_c2(dim == 3);
    let mut diff = renorm_map_sum(&consts, &fuv)?;
    for (s, c) in &fuv.0 {
        diff.add(s.clone(), -c.clone());
    }
    diff.retain(|s| !homogeneity(s, &scaling).is_positive());

    let c1 = -diff.coefficient(&Symbol::i_xi());
    let c2: Vec<Poly> = (1..=n).map(|j| -diff.coefficient(&Symbol::e_i_xi(j))).collect();
    let mut unit = diff.coefficient(&Symbol::Unit);
    unit += &c1 * &Poly::var(Var::Phi);
    for (j, c) in c2.iter().enumerate() {
        unit += c * &Poly::var(Var::Psi(j as u8 + 1));
    }
    let c0 = -unit;

    let mut obstruction = Vec::new();
    let mut split = |sym: Symbol, p: &Poly| -> Poly {
        let (clean, dirty) = p.split_state();
        if !dirty.is_zero() {
            obstruction.push(ObstructionTerm { symbol: sym, coefficient: dirty });
        }
        clean
    };
    let c0 = split(Symbol::Unit, &c0);
    let c1 = split(Symbol::i_xi(), &c1);
    let c2: Vec<Poly> = c2
        .iter()
        .enumerate()
        .map(|(j, c)| split(Symbol::e_i_xi(j as u8 + 1), c))
        .collect();
    let basis: Vec<Symbol> = std::iter::once(Symbol::Unit)
        .chain(std::iter::once(Symbol::i_xi()))
        .chain((1..=n).map(Symbol::e_i_xi))
        .collect();
    for (s, c) in &diff.0 {
        if !basis.contains(s) {
            obstruction.push(ObstructionTerm { symbol: s.clone(), coefficient: c.clone() });
        }
    }
    Ok(RenormalizedF { dim, c0, c1, c2, obstruction })
}

/// Outcome of the zeroth-chaos analysis for a generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChaosZero {
    /// A diverging constant is required; `integral` names its value.
    NeedsConstant { integral: String },
    /// The zeroth chaos is bounded in `eps`; the constant is chosen 0.
    Bounded { integral: String },
}

impl ChaosZero {
    pub fn needs_constant(&self) -> bool {
        matches!(self, ChaosZero::NeedsConstant { .. })
    }

    pub fn integral(&self) -> &str {
        match self {
            ChaosZero::NeedsConstant { integral } | ChaosZero::Bounded { integral } => integral,
        }
    }
}

/// Index of the covariance `Q_i` between two leaves: the number of
/// `E`-decorated leaves in the pair.
fn q_index(a: &Symbol, b: &Symbol) -> usize {
    [a, b].iter().filter(|s| matches!(s, Symbol::EIntegral(..))).count()
}

/// Classifies the zeroth Wiener chaos of a generator.
pub fn chaos_zero_classification(tau: &Symbol, dim: usize) -> Result<ChaosZero, RenormError> {
    Scaling::new(dim)?;
    let pat = pattern_of(tau)?;
    Ok(match pat {
        Pattern::Pair(a, b) => {
            let q = q_index(&a, &b);
            let integral = format!("Q{q}(0)");
            if q == 0 {
                ChaosZero::NeedsConstant { integral: "Q0(0) = int K_eps^2".into() }
            } else {
                ChaosZero::Bounded { integral }
            }
        }
        Pattern::Nested { inner, outer } => {
            let mut idx = [
                (q_index(&inner.0, &outer.0), q_index(&inner.1, &outer.1)),
                (q_index(&inner.0, &outer.1), q_index(&inner.1, &outer.0)),
            ];
            for p in idx.iter_mut() {
                if p.0 > p.1 {
                    *p = (p.1, p.0);
                }
            }
            let integral = if idx[0] == idx[1] {
                format!("2*I{}{}", idx[0].0, idx[0].1)
            } else {
                format!("I{}{} + I{}{}", idx[0].0, idx[0].1, idx[1].0, idx[1].1)
            };
            if dim == 3 && idx.contains(&(0, 0)) {
                ChaosZero::NeedsConstant { integral }
            } else {
                ChaosZero::Bounded { integral }
            }
        }
    })
}

/// Display names for the constants used by the renormalised equation.
pub fn constant_name(v: &Var) -> Option<&'static str> {
    match v {
        Var::Const(s) => match crate::grammar::name_of(s) {
            Some("RSV") => Some("C1"),
            Some("RSWV") => Some("C2"),
            Some("RSVo") => Some("C1'"),
            Some("RSVoo") => Some("C1''"),
            _ => None,
        },
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::named_symbols;

    fn sym(n: &str) -> Symbol {
        named_symbols().into_iter().find(|(m, _)| *m == n).unwrap().1
    }

    #[test]
    fn generator_counts() {
        assert_eq!(first_generators(1).len(), 3);
        assert_eq!(second_generators(1).len(), 9);
        assert_eq!(generators(1).len(), 12);
    }

    #[test]
    fn pair_extraction() {
        let l = generator_action(&sym("RSV"), &sym("RSW")).unwrap();
        assert_eq!(l, SymbolSum::term(sym("RSI"), Poly::int(3)));
        let l = generator_action(&sym("RSWV"), &sym("RSWV")).unwrap();
        assert_eq!(l, SymbolSum::single(Symbol::Unit));
    }

    #[test]
    fn unsupported_rejected() {
        let s = Scaling::new(3).unwrap();
        let raw = crate::grammar::parse_symbol("Xi*I(Xi)", &s).unwrap().unwrap();
        assert!(matches!(
            generator_action(&sym("RSV"), &raw),
            Err(RenormError::UnsupportedPattern(_))
        ));
        assert!(matches!(
            generator_action(&sym("RSW"), &sym("RSV")),
            Err(RenormError::NotAGenerator(_))
        ));
    }

    #[test]
    fn chaos_classes() {
        assert!(chaos_zero_classification(&sym("RSV"), 2).unwrap().needs_constant());
        assert!(chaos_zero_classification(&sym("RSWV"), 3).unwrap().needs_constant());
        assert!(!chaos_zero_classification(&sym("RSWV"), 2).unwrap().needs_constant());
        assert_eq!(chaos_zero_classification(&sym("RSVo"), 3).unwrap().integral(), "Q1(0)");
        assert_eq!(chaos_zero_classification(&sym("RSVoo"), 3).unwrap().integral(), "Q2(0)");
        assert_eq!(chaos_zero_classification(&sym("RSWVo"), 3).unwrap().integral(), "2*I01");
        assert!(chaos_zero_classification(&sym("RSI"), 3).is_err());
    }
}
