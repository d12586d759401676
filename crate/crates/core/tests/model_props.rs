mod common;

use common::*;
use conslaw::model::{apply_metric, build_phi, grad_phi, Architecture, FlowMode, MetricSpec};
use proptest::prelude::*;

fn test_matrix() -> Vec<Architecture> {
    vec![
        Architecture::two_layer(2, 2, 2),
        Architecture::two_layer(3, 2, 2),
        Architecture::linear(&[2, 2, 3, 1]).unwrap(),
        Architecture::relu2(2, 2, 2, false),
        Architecture::relu2(2, 2, 3, true),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn symbolic_gradients_match_central_differences(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for arch in test_matrix() {
            let phi = build_phi(&arch).unwrap();
            let grads = grad_phi(&phi, &phi.space).unwrap();
            let x: Vec<f64> = (0..phi.space.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
            for (p, g) in phi.components.iter().zip(&grads) {
                let exact = g.eval_f64(&x);
                for (k, &e) in exact.iter().enumerate() {
                    let fd = central_difference(|y| p.eval_f64(y), &x, k, 1e-5);
                    prop_assert!(rel_err(fd, e) <= 1e-6, "{arch:?} coord {k}: {fd} vs {e}");
                }
            }
        }
    }
}

#[test]
fn linear_phi_shape_and_degree() {
    for widths in [vec![2, 2, 2], vec![3, 1, 2], vec![2, 2, 3, 1]] {
        let arch = Architecture::linear(&widths).unwrap();
        let phi = build_phi(&arch).unwrap();
        assert_eq!(phi.len(), widths[0] * widths.last().unwrap());
        let q = (widths.len() - 1) as u32;
        for p in &phi.components {
            assert_eq!(p.degree(), Some(q));
            for e in p.terms().keys() {
                // multilinear: one entry per layer
                assert!(e.iter().all(|&k| k <= 1));
            }
        }
    }
}

#[test]
fn euclidean_metric_is_identity() {
    let arch = Architecture::relu2(2, 2, 2, true);
    let phi = build_phi(&arch).unwrap();
    let g = grad_phi(&phi, &phi.space).unwrap();
    assert_eq!(
        apply_metric(&MetricSpec::euclidean(FlowMode::Gf), &g, &phi.space).unwrap(),
        g
    );
}
