//! Compares backpropagated gradients of an actor-sized network with central
//! finite differences.
//!
//! cargo run --release --example gradient_check

use atsc::nn::DenseNet;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let sizes = [60, 32, 32, 8];
    let net = DenseNet::init(&sizes, 1.0, &mut rng);
    let x = Array2::from_shape_fn((4, sizes[0]), |_| rng.random_range(-1.0..1.0));
    let w = Array2::from_shape_fn((4, sizes[3]), |_| rng.random_range(-1.0..1.0));
    // loss = sum(w * net(x)), so w is also the gradient at the output
    let loss = |n: &DenseNet| (n.predict(x.view()).unwrap() * &w).sum();

    let (_, cache) = net.forward(x.view())?;
    let analytic = net.backward(&cache, w.view())?;

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut probe = net.clone();
    for i in (0..net.num_params()).step_by(7) {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + h;
        let up = loss(&probe);
        probe.params_mut()[i] = orig - h;
        let down = loss(&probe);
        probe.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1e-12);
        worst = worst.max(rel);
    }
    println!("{} parameters, every 7th probed", net.num_params());
    println!("worst relative error {worst:.3e}");
    Ok(())
}
