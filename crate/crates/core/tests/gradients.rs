use biaslab::nn::{grad_dpg, grad_mse, Activation, Network, OutputTransform, Params};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-6;

fn random_net(sizes: &[usize], bounded: bool, rng: &mut ChaCha8Rng) -> Network {
    let out = *sizes.last().unwrap();
    let transform = if bounded {
        OutputTransform::Bounded { low: vec![-2.0; out], high: vec![1.0; out] }
    } else {
        OutputTransform::Identity
    };
    Network::init(sizes, Activation::Relu, transform, rng).unwrap()
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.5..1.5))
}

fn perturbed(net: &Network, index: usize, delta: f64) -> Network {
    let mut n = net.clone();
    *n.params_mut().iter_mut().nth(index).unwrap() += delta;
    n
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

fn check_coordinates(grads: &Params, loss_at: impl Fn(usize, f64) -> f64, coords: &[usize]) {
    let g: Vec<f64> = grads.iter().collect();
    for &i in coords {
        let numeric = (loss_at(i, H) - loss_at(i, -H)) / (2.0 * H);
        let err = relative_error(g[i], numeric);
        assert!(err <= 1e-4, "coordinate {i}: analytic {} numeric {numeric} rel {err}", g[i]);
    }
}

#[test]
fn mse_gradient_matches_finite_differences_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = random_net(&[3, 7, 5, 2], false, &mut rng);
    let x = random_matrix(9, 3, &mut rng);
    let y = random_matrix(9, 2, &mut rng);
    let (grads, _) = grad_mse(&net, x.view(), y.view()).unwrap();
    let coords: Vec<usize> = (0..grads.len()).collect();
    check_coordinates(
        &grads,
        |i, d| grad_mse(&perturbed(&net, i, d), x.view(), y.view()).unwrap().1,
        &coords,
    );
}

#[test]
fn dpg_gradient_matches_finite_differences_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let actor = random_net(&[3, 6, 2], true, &mut rng);
    let critic = random_net(&[5, 8, 1], false, &mut rng);
    let s = random_matrix(11, 3, &mut rng);
    let (grads, _) = grad_dpg(&actor, &critic, s.view()).unwrap();
    let coords: Vec<usize> = (0..grads.len()).collect();
    check_coordinates(
        &grads,
        |i, d| grad_dpg(&perturbed(&actor, i, d), &critic, s.view()).unwrap().1,
        &coords,
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mse_gradient_on_random_shapes(seed in any::<u64>(), hidden in 1usize..12, out in 1usize..4, batch in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_net(&[4, hidden, out], false, &mut rng);
        let x = random_matrix(batch, 4, &mut rng);
        let y = random_matrix(batch, out, &mut rng);
        let (grads, _) = grad_mse(&net, x.view(), y.view()).unwrap();
        let coords: Vec<usize> = (0..grads.len()).collect();
        check_coordinates(&grads, |i, d| grad_mse(&perturbed(&net, i, d), x.view(), y.view()).unwrap().1, &coords);
    }

    #[test]
    fn dpg_gradient_on_random_shapes(seed in any::<u64>(), hidden in 1usize..10, act in 1usize..3, batch in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = random_net(&[3, hidden, act], true, &mut rng);
        let critic = random_net(&[3 + act, hidden + 2, 1], false, &mut rng);
        let s = random_matrix(batch, 3, &mut rng);
        let (grads, _) = grad_dpg(&actor, &critic, s.view()).unwrap();
        let coords: Vec<usize> = (0..grads.len()).collect();
        check_coordinates(&grads, |i, d| grad_dpg(&perturbed(&actor, i, d), &critic, s.view()).unwrap().1, &coords);
    }
}
