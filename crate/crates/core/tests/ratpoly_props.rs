mod common;

use common::*;
use conslaw::ratpoly::{exact_nullspace, exact_rank, ExactScalar, Polynomial, RatMatrix};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn evaluation_is_a_ring_homomorphism(
        p in poly(xyz(), 5, 3),
        q in poly(xyz(), 5, 3),
        x in point(3),
    ) {
        let pq = &p * &q;
        prop_assert_eq!(pq.eval(&x).unwrap(), p.eval(&x).unwrap() * q.eval(&x).unwrap());
        let sum = &p + &q;
        prop_assert_eq!(sum.eval(&x).unwrap(), p.eval(&x).unwrap() + q.eval(&x).unwrap());
    }

    #[test]
    fn leibniz_rule(p in poly(xyz(), 5, 3), q in poly(xyz(), 5, 3), var in 0usize..3) {
        let lhs = (&p * &q).partial(var).unwrap();
        let rhs = &(&p * &q.partial(var).unwrap()) + &(&q * &p.partial(var).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn ring_axioms(p in poly(xyz(), 4, 2), q in poly(xyz(), 4, 2), r in poly(xyz(), 4, 2)) {
        prop_assert_eq!(&p * &q, &q * &p);
        prop_assert_eq!(&(&p * &q) * &r, &p * &(&q * &r));
        prop_assert_eq!(&p * &(&q + &r), &(&p * &q) + &(&p * &r));
        prop_assert!((&p - &p).is_zero());
    }

    #[test]
    fn rank_plus_nullity_is_cols(rows in int_matrix(7, 7)) {
        let refs: Vec<&[i64]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = RatMatrix::from_i64(&refs);
        let null = exact_nullspace(&m);
        prop_assert_eq!(exact_rank(&m) + null.len(), m.cols());
        for v in &null {
            prop_assert!(m.mul_vec(v).iter().all(ExactScalar::is_zero));
        }
    }

    #[test]
    fn normalization_is_idempotent(p in poly(xyz(), 6, 3)) {
        let once = p.normalized();
        prop_assert_eq!(once.normalized(), once.clone());
        let prim = p.primitive();
        prop_assert_eq!(prim.primitive(), prim);
    }

    #[test]
    fn json_round_trip(p in poly(xyz(), 6, 3)) {
        let back = Polynomial::from_json(&p.to_json(), &xyz()).unwrap();
        prop_assert_eq!(back, p);
    }
}
