mod common;

use common::{max_gradient_rel_error, random_grad_case, reference_loss};
use f2m::regressor::{backward, coordinate_loss, MlpRegressor, SceneCoordinates};
use ndarray::Array2;
use proptest::prelude::*;

#[test]
fn tiny_shaped_model_matches_finite_differences() {
    // TINY proportions shrunk to input 8
    let dims = [8, 16, 16, 16, 4, 3];
    let model = MlpRegressor::new_random(&dims, 11).unwrap();
    let x = Array2::from_shape_fn((4, 8), |(r, c)| ((r * 8 + c) as f64 * 0.7).sin());
    let y = Array2::from_shape_fn((4, 3), |(r, c)| (r as f64) - (c as f64) * 0.5);
    let case = common::GradCase {
        model,
        x,
        y,
        valid: vec![true; 4],
    };
    assert!(max_gradient_rel_error(&case, 1e-4, 1e-8) < 1e-4);
}

#[test]
fn backward_loss_agrees_with_reference() {
    for seed in 0..20 {
        let case = random_grad_case(seed, 0.0);
        let (loss, _) = backward(&case.model, case.x.view(), case.y.view(), &case.valid).unwrap();
        let want = reference_loss(&case.model, case.x.view(), case.y.view(), &case.valid);
        assert!((loss - want).abs() <= 1e-12 * want.max(1.0), "seed {seed}: {loss} vs {want}");

        let pred = SceneCoordinates::from_rows(case.model.forward_rows(case.x.view()).unwrap().view());
        let gt = SceneCoordinates::from_rows(case.y.view());
        let direct = coordinate_loss(&pred, &gt, &case.valid).unwrap();
        assert!((direct - want).abs() <= 1e-12 * want.max(1.0));
    }
}

#[test]
fn invalid_rows_do_not_contribute() {
    let case = random_grad_case(3, 1e-3);
    let mut y = case.y.clone();
    let mut valid = case.valid.clone();
    valid.push(false);
    let extra_x = Array2::from_elem((1, case.x.ncols()), 0.3);
    let x = ndarray::concatenate![ndarray::Axis(0), case.x, extra_x];
    y = ndarray::concatenate![ndarray::Axis(0), y, Array2::from_elem((1, 3), 100.0)];
    let (l0, g0) = backward(&case.model, case.x.view(), case.y.view(), &case.valid).unwrap();
    let (l1, g1) = backward(&case.model, x.view(), y.view(), &valid).unwrap();
    assert_eq!(l0, l1);
    assert_eq!(g0, g1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_small_models_match_finite_differences(seed in any::<u64>()) {
        let case = random_grad_case(seed, 1e-2);
        let err = max_gradient_rel_error(&case, 1e-4, 1e-8);
        prop_assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn loss_is_zero_iff_predictions_match(seed in any::<u64>()) {
        let case = random_grad_case(seed, 0.0);
        let pred = case.model.forward_rows(case.x.view()).unwrap();
        let (loss, grads) = backward(&case.model, case.x.view(), pred.view(), &case.valid).unwrap();
        prop_assert_eq!(loss, 0.0);
        prop_assert!(grads.is_zero());
        let (loss, _) = backward(&case.model, case.x.view(), case.y.view(), &case.valid).unwrap();
        prop_assert!(loss >= 0.0);
    }
}
