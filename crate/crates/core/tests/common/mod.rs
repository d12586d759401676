#![allow(dead_code)]

use std::sync::Arc;

use conslaw::ratpoly::{ExactScalar, Polynomial, VariableSpace, VectorField};
use proptest::prelude::*;

pub fn xyz() -> Arc<VariableSpace> {
    VariableSpace::plain(&["x", "y", "z"])
}

pub fn scalar() -> impl Strategy<Value = ExactScalar> {
    (-9i64..=9, 1i64..=5).prop_map(|(p, q)| ExactScalar::ratio(p, q))
}

pub fn nonzero_scalar() -> impl Strategy<Value = ExactScalar> {
    (prop_oneof![-19i64..=-1, 1i64..=19], 1i64..=7).prop_map(|(p, q)| ExactScalar::ratio(p, q))
}

/// Up to `terms` terms with per-variable exponent at most `max_exp`.
pub fn poly(space: Arc<VariableSpace>, terms: usize, max_exp: u16) -> impl Strategy<Value = Polynomial> {
    let n = space.len();
    prop::collection::vec((prop::collection::vec(0..=max_exp, n), scalar()), 0..=terms)
        .prop_map(move |ts| Polynomial::from_terms(&space, ts).expect("well-formed terms"))
}

pub fn field(space: Arc<VariableSpace>, terms: usize, max_exp: u16) -> impl Strategy<Value = VectorField> {
    let n = space.len();
    prop::collection::vec(poly(space.clone(), terms, max_exp), n)
        .prop_map(move |cs| VectorField::new(&space, cs).expect("matching space"))
}

pub fn point(n: usize) -> impl Strategy<Value = Vec<ExactScalar>> {
    prop::collection::vec(scalar(), n)
}

pub fn int_matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-9i64..=9, c), r))
}

/// Central difference of `f` along coordinate `k`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
    let mut a = x.to_vec();
    let mut b = x.to_vec();
    a[k] += h;
    b[k] -= h;
    (f(&a) - f(&b)) / (2.0 * h)
}

pub fn rel_err(approx: f64, exact: f64) -> f64 {
    (approx - exact).abs() / exact.abs().max(1.0)
}
