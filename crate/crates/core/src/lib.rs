//! Symbolic and numerical toolkit for the renormalisation of
//! FitzHugh-Nagumo type SPDE-ODE systems driven by space-time white noise.
//!
//! The symbolic half builds the decorated-tree symbols of the regularity
//! structure ([`symbols`], [`grammar`]), their coproduct ([`hopf`]) and the
//! renormalisation maps together with the renormalised nonlinearity
//! ([`renorm`]). The numerical half computes the kernels and constants
//! ([`kernels`]), samples and mollifies noise ([`noise`]) and integrates the
//! renormalised systems ([`solver`]).

pub mod cli;
pub mod cubic;
pub mod error;
pub mod grammar;
pub mod hopf;
pub mod kernels;
pub mod lattice;
pub mod noise;
pub mod poly;
pub mod renorm;
pub mod solver;
pub mod symbols;

pub use cubic::{parse_nonlinearity, CubicPolynomial};
pub use error::*;
pub use grammar::{parse_symbol, print_symbol};
pub use symbols::{canonicalize, enumerate_symbols, homogeneity, xi_count, Homogeneity, Scaling, Symbol};
