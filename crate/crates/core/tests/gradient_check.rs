//! Central finite differences against the tape's reverse pass.

mod support;

use advexp::nn::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{build, loss_tape, worst_relative_error, REL_TOL};

#[test]
fn dense_recurrent_composition_matches_finite_differences() {
    let worst = worst_relative_error(100, 2024);
    assert!(worst < REL_TOL, "worst relative error {worst:e}");
}

#[test]
fn every_tensor_receives_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = build(&mut rng);
    let xs = vec![Matrix::from_fn(2, 4, |r, c| (r + c) as f64 * 0.3 - 0.5); 3];
    let ys = vec![Matrix::from_fn(2, 2, |r, c| (r * 2 + c) as f64 * 0.4); 3];
    let (tape, loss) = loss_tape(&net, &net.params, &xs, &ys);
    let grads = tape.backward(loss).unwrap();
    for (i, g) in grads.tensors().iter().enumerate() {
        assert!(g.max_abs() > 0.0, "tensor {i} has zero gradient");
    }
}
