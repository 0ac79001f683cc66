use std::collections::BTreeMap;
use std::sync::OnceLock;

use fhnreg::hopf::{coproduct, TensorSum};
use fhnreg::lattice::Lattice;
use fhnreg::noise::{sample_white_noise, wick_square, Grid};
use fhnreg::poly::{Poly, SymbolSum};
use fhnreg::renorm::{renorm_map, renorm_map_sum, renormalized_nonlinearity, RenormConstants};
use fhnreg::solver::phi_series;
use fhnreg::symbols::{canonicalize, enumerate_symbols, homogeneity, xi_count, Homogeneity, RawSymbol, Scaling, Symbol};
use fhnreg::{parse_symbol, print_symbol, CubicPolynomial};
use nalgebra::DMatrix;
use num_rational::{BigRational, Rational64};
use num_traits::One;
use proptest::prelude::*;

fn scaling(d: usize) -> Scaling {
    Scaling::new(d).unwrap()
}

fn table(d: usize) -> &'static [Symbol] {
    static T2: OnceLock<Vec<Symbol>> = OnceLock::new();
    static T3: OnceLock<Vec<Symbol>> = OnceLock::new();
    let cell = if d == 2 { &T2 } else { &T3 };
    cell.get_or_init(|| {
        let cutoff = Homogeneity::new(Rational64::new(3, 2), Rational64::from(0));
        enumerate_symbols(d, cutoff, 1).unwrap().symbols().cloned().collect()
    })
}

fn table_symbol() -> impl Strategy<Value = (usize, Symbol)> {
    prop_oneof![Just(2usize), Just(3usize)]
        .prop_flat_map(|d| (Just(d), proptest::sample::select(table(d).to_vec())))
}

fn raw_tree(d: usize) -> impl Strategy<Value = RawSymbol> {
    let leaf = prop_oneof![
        3 => Just(RawSymbol::Noise),
        1 => Just(RawSymbol::Unit),
        1 => proptest::collection::vec(0i64..3, d).prop_map(RawSymbol::Monomial),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            3 => inner.clone().prop_map(|c| RawSymbol::Integral(Box::new(c))),
            1 => (1u8..3, inner.clone()).prop_map(|(ch, c)| RawSymbol::EIntegral(ch, Box::new(c))),
            2 => proptest::collection::vec(inner, 2..4).prop_map(RawSymbol::Product),
        ]
    })
}

fn canonical(d: usize) -> impl Strategy<Value = Symbol> {
    raw_tree(d).prop_filter_map("vanishes", move |r| canonicalize(&r, &scaling(d)).unwrap())
}

fn c1_only(value: i64) -> RenormConstants {
    RenormConstants::none().set(Symbol::i_xi().pow(2), Poly::int(value)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn canonical_form_is_idempotent(d in 2usize..4, raw in raw_tree(3)) {
        let raw = match raw {
            RawSymbol::Monomial(mut k) => { k.truncate(d); RawSymbol::Monomial(k) }
            r => r,
        };
        if let Ok(Some(s)) = canonicalize(&raw, &scaling(d)) {
            prop_assert_eq!(canonicalize(&RawSymbol::from(&s), &scaling(d)).unwrap(), Some(s));
        }
    }

    #[test]
    fn printed_symbols_parse_back(s in canonical(3)) {
        let text = print_symbol(&s);
        prop_assert_eq!(parse_symbol(&text, &scaling(3)).unwrap(), Some(s), "{}", text);
    }

    #[test]
    fn homogeneity_and_noise_count_are_additive(d in 2usize..4, a in canonical(3), b in canonical(3)) {
        prop_assume!(!a.is_polynomial() && !b.is_polynomial());
        let sc = scaling(d);
        let ab = a.mul(&b);
        prop_assert_eq!(homogeneity(&ab, &sc), homogeneity(&a, &sc) + homogeneity(&b, &sc));
        prop_assert_eq!(xi_count(&ab), xi_count(&a) + xi_count(&b));
    }

    #[test]
    fn integration_shifts_by_two_and_extension_preserves(d in 2usize..4, s in canonical(3)) {
        let sc = scaling(d);
        let h = homogeneity(&s, &sc);
        if let Some(i) = s.integrate() {
            prop_assert_eq!(homogeneity(&i, &sc) - h, Homogeneity::int(2, 0));
            prop_assert_eq!(xi_count(&i), xi_count(&s));
        }
        if let Some(e) = s.extend(1, &sc) {
            prop_assert_eq!(homogeneity(&e, &sc), h);
            prop_assert_eq!(xi_count(&e), xi_count(&s));
        }
    }

    #[test]
    fn counit_recovers_the_symbol((d, s) in table_symbol()) {
        let got = coproduct(&s, &scaling(d)).counit_right();
        prop_assert_eq!(got, BTreeMap::from([(s, BigRational::one())]));
    }

    #[test]
    fn coproduct_is_lower_triangular((d, s) in table_symbol()) {
        let sc = scaling(d);
        let h = homogeneity(&s, &sc);
        let delta = coproduct(&s, &sc);
        for (left, right) in delta.terms.keys() {
            if !right.is_unit() {
                prop_assert!(homogeneity(left, &sc) < h, "{} in {}", print_symbol(left), delta);
            }
        }
    }

    #[test]
    fn coproduct_is_multiplicative(
        a in proptest::sample::select(table(3).to_vec()),
        b in proptest::sample::select(table(3).to_vec()),
    ) {
        let sc = scaling(3);
        prop_assume!(!a.is_polynomial() && !b.is_polynomial());
        let lhs: TensorSum = coproduct(&a.mul(&b), &sc);
        prop_assert_eq!(lhs, coproduct(&a, &sc).mul(&coproduct(&b, &sc)));
    }

    #[test]
    fn zero_constants_act_as_identity((_, s) in table_symbol()) {
        if let Ok(m) = renorm_map(&RenormConstants::none(), &s) {
            prop_assert_eq!(m, SymbolSum::single(s));
        }
    }

    #[test]
    fn single_constant_maps_compose(s in proptest::sample::select(table(3).to_vec()), a in -5i64..6, b in -5i64..6) {
        if let Ok(inner) = renorm_map(&c1_only(b), &s) {
            let composed = renorm_map_sum(&c1_only(a), &inner).unwrap();
            prop_assert_eq!(composed, renorm_map(&c1_only(a + b), &s).unwrap());
        }
    }

    #[test]
    fn counterterms_vanish_without_quadratic_or_cubic_u(
        coeffs in proptest::collection::vec(-4i64..5, 7),
        d in 2usize..4,
    ) {
        let mut f = CubicPolynomial::zero(1);
        for (k, c) in [[0, 0], [1, 0], [0, 1], [1, 1], [0, 2], [1, 2], [0, 3]].iter().zip(&coeffs) {
            f.set(k, Poly::int(*c));
        }
        let r = renormalized_nonlinearity(&f, d).unwrap();
        prop_assert!(r.c0.is_zero() && r.c1.is_zero() && r.c2.iter().all(Poly::is_zero), "{}", r);
    }

    #[test]
    fn noise_cells_do_not_depend_on_generation_order(seed in any::<u64>(), s in 0usize..4, site in 0usize..64) {
        let f = sample_white_noise(&Grid::new(2, 8, 4, 0.01, 0).unwrap(), seed);
        prop_assert_eq!(f.cell(s, site), f.slice(s)[site]);
    }

    #[test]
    fn lattice_transform_round_trips(d in 1usize..4, values in proptest::collection::vec(-10.0f64..10.0, 64)) {
        let n = match d { 1 => 64, 2 => 8, _ => 4 };
        let lat = Lattice::new(d, n);
        let back = lat.inverse_real(lat.forward_real(&values));
        for (x, y) in values.iter().zip(&back) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn wick_square_of_a_constant_shifts_it(x in -3.0f64..3.0, c in 0.0f64..5.0) {
        let mut f = sample_white_noise(&Grid::new(2, 4, 1, 0.1, 0).unwrap(), 0).to_field();
        f.values.iter_mut().for_each(|v| *v = x);
        for y in wick_square(&f, c).values {
            prop_assert!((y - (x * x - c)).abs() < 1e-12);
        }
    }

    #[test]
    fn phi_series_integrates_the_exponential(h in 1e-4f64..0.5, n in 1usize..4, entries in proptest::collection::vec(-2.0f64..2.0, 9)) {
        let a = DMatrix::from_fn(n, n, |i, j| entries[i * 3 + j]);
        let lhs = DMatrix::identity(n, n) + &a * phi_series(h, &a);
        let rhs = (&a * h).exp();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }
}

#[test]
fn generated_tables_are_non_trivial() {
    assert!(table(3).len() >= 16);
    assert!(table(2).len() >= 10);
}

#[test]
fn renorm_maps_cover_most_of_the_table() {
    let ok = table(3).iter().filter(|s| renorm_map(&c1_only(1), s).is_ok()).count();
    assert!(2 * ok >= table(3).len(), "{ok} of {}", table(3).len());
}
