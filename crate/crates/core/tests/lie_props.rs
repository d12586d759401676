mod common;

use common::*;
use conslaw::laws::lie_dim;
use conslaw::lie::{generate_lie_algebra, lie_bracket, LieOptions};
use conslaw::lift::FlowSpec;
use conslaw::model::{Architecture, MetricKind};
use conslaw::ratpoly::ExactScalar;
use conslaw::scenario::Scenario;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn bracket_is_antisymmetric_and_bilinear(
        x in field(xyz(), 3, 2),
        y in field(xyz(), 3, 2),
        z in field(xyz(), 3, 2),
        a in scalar(),
        b in scalar(),
    ) {
        let xy = lie_bracket(&x, &y).unwrap();
        let yx = lie_bracket(&y, &x).unwrap();
        prop_assert!(xy.checked_add(&yx).unwrap().is_zero());
        prop_assert!(lie_bracket(&x, &x).unwrap().is_zero());

        let combo = x.scale(&a).checked_add(&y.scale(&b)).unwrap();
        let lhs = lie_bracket(&combo, &z).unwrap();
        let rhs = lie_bracket(&x, &z).unwrap().scale(&a)
            .checked_add(&lie_bracket(&y, &z).unwrap().scale(&b)).unwrap();
        prop_assert_eq!(lhs, rhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn jacobi_identity(x in field(xyz(), 3, 2), y in field(xyz(), 3, 2), z in field(xyz(), 3, 2)) {
        let cyc = |a, b, c| lie_bracket(a, &lie_bracket(b, c).unwrap()).unwrap();
        let sum = cyc(&x, &y, &z)
            .checked_add(&cyc(&y, &z, &x)).unwrap()
            .checked_add(&cyc(&z, &x, &y)).unwrap();
        prop_assert!(sum.is_zero());
    }
}

fn momentum(n: usize, m: usize, r: usize) -> Scenario {
    Scenario::new(
        Architecture::two_layer(n, m, r),
        MetricKind::Euclidean,
        FlowSpec::heavy_ball(ExactScalar::one()).unwrap(),
    )
    .unwrap()
}

#[test]
fn trace_is_monotone_and_matches_formulas() {
    for (n, m, r) in [(2, 1, 1), (2, 1, 2), (2, 2, 2), (1, 1, 4), (1, 2, 1)] {
        let sys = momentum(n, m, r).system().unwrap();
        let lie = generate_lie_algebra(&sys.fields, &sys.certificate, &LieOptions::default()).unwrap();
        assert!(lie.trace.windows(2).all(|w| w[0] <= w[1]), "{:?}", lie.trace);
        assert!(lie.stop.is_exact(), "({n},{m},{r}) stopped by {:?}", lie.stop);
        assert_eq!(lie.dim(), lie_dim(n, m, r).unwrap(), "({n},{m},{r})");
    }
}

#[test]
fn nonlinear_generators_keep_a_monotone_trace() {
    let s = Scenario::new(Architecture::two_layer(2, 3, 2), MetricKind::Mirror, FlowSpec::Gradient).unwrap();
    let sys = s.system().unwrap();
    let lie = generate_lie_algebra(&sys.fields, &sys.certificate, &LieOptions::default()).unwrap();
    assert!(lie.trace.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(sys.ambient - lie.dim(), 2);
}
