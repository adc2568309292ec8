//! Analytic gradients against central finite differences.

mod support;

use logicsent::cnn::ProbDist;
use logicsent::sst::Label;
use support::gradcheck::{case, max_relative_error, TOL};

#[test]
fn twenty_random_models_match_finite_differences() {
    for seed in 0..20 {
        let c = case(seed, true);
        let err = max_relative_error(&c);
        assert!(err <= TOL, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn frozen_embeddings_get_no_gradient() {
    let c = case(4, false);
    let cache = c.model.forward(&c.input, None).unwrap();
    let g = c.model.backward(&cache, [0.3, -0.3]).unwrap();
    assert!(g.embedding.is_empty());
    assert!(max_relative_error(&c) <= TOL);
}

#[test]
fn one_hot_target_gradient() {
    let mut c = case(7, true);
    c.target = ProbDist::one_hot(Label::Negative);
    assert!(max_relative_error(&c) <= TOL);
}
