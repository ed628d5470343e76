mod common;

use atsc::nn::{adam_step, gae, AdamState, DenseNet};
use common::{finite_difference, gae_brute_force, mlp_reference, rel_error};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.5..1.5))
}

/// Loss `sum(W_out * y)` for fixed random output weights.
fn weighted_output_loss(net: &DenseNet, x: &Array2<f64>, w: &Array2<f64>) -> f64 {
    (net.predict(x.view()).unwrap() * w).sum()
}

#[test]
fn forward_matches_straight_line_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for sizes in [vec![8, 16, 4], vec![60, 128, 128, 8], vec![5, 3], vec![224, 128, 128, 1]] {
        let net = DenseNet::init(&sizes, 1.0, &mut rng);
        let x = random_batch(&mut rng, 3, sizes[0]);
        let y = net.predict(x.view()).unwrap();
        for r in 0..3 {
            let reference = mlp_reference(&sizes, net.params(), x.row(r).as_slice().unwrap());
            for (a, b) in y.row(r).iter().zip(&reference) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let sizes = [8, 16, 4];
    let net = DenseNet::init(&sizes, 1.0, &mut rng);
    let x = random_batch(&mut rng, 5, 8);
    let w = random_batch(&mut rng, 5, 4);
    let (_, cache) = net.forward(x.view()).unwrap();
    let analytic = net.backward(&cache, w.view()).unwrap();
    let numeric = finite_difference(net.params(), 1e-5, |p| {
        let probe = DenseNet::from_params(&sizes, p.to_vec()).unwrap();
        weighted_output_loss(&probe, &x, &w)
    });
    assert!(rel_error(&analytic, &numeric) < 1e-4);

    // doubling the loss doubles the gradient
    let doubled = net.backward(&cache, (&w * 2.0).view()).unwrap();
    for (a, b) in doubled.iter().zip(&analytic) {
        assert_eq!(*a, 2.0 * b);
    }
}

#[test]
fn zero_input_linear_loss_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let net = DenseNet::init(&[4, 3], 1.0, &mut rng);
    let x = Array2::zeros((1, 4));
    let g_out = Array2::from_shape_vec((1, 3), vec![0.5, -2.0, 1.0]).unwrap();
    let (_, cache) = net.forward(x.view()).unwrap();
    let g = net.backward(&cache, g_out.view()).unwrap();
    assert!(g[..12].iter().all(|&v| v == 0.0));
    assert_eq!(&g[12..], &[0.5, -2.0, 1.0]);
}

#[test]
fn adam_zero_gradient_no_op() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut net = DenseNet::init(&[6, 5, 2], 1.0, &mut rng);
    let before = net.params().to_vec();
    let mut state = AdamState::new(net.num_params(), 5e-5);
    for _ in 0..3 {
        let zeros = vec![0.0; net.num_params()];
        adam_step(net.params_mut(), &zeros, &mut state, Some(10.0)).unwrap();
    }
    assert_eq!(net.params(), &before[..]);
    assert_eq!(state.step, 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gae_matches_double_sum(
        seed in 0u64..10_000,
        len in 1usize..=100,
        gamma in 0.5f64..1.0,
        lambda in 0.0f64..=1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..5.0)).collect();
        let nv: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..5.0)).collect();
        let d: Vec<bool> = (0..len).map(|i| i + 1 == len || rng.random_bool(0.05)).collect();
        let batch = gae(&r, &v, &nv, &d, gamma, lambda).unwrap();
        let oracle = gae_brute_force(&r, &v, &nv, &d, gamma, lambda);
        for t in 0..len {
            prop_assert!((batch.advantages[t] - oracle[t]).abs() < 1e-10);
            prop_assert!((batch.returns[t] - oracle[t] - v[t]).abs() < 1e-10);
        }
    }
}
