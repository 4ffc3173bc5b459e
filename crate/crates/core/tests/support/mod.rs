//! Finite-difference probe shared by the gradient tests and the
//! acceptance runner.

use advexp::nn::{Activation, DenseNet, Matrix, ParamId, ParamSet, Recurrent, Tape, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;

pub struct Net {
    pub params: ParamSet,
    encoder: DenseNet,
    cell: Recurrent,
    head: DenseNet,
}

pub fn build(rng: &mut ChaCha8Rng) -> Net {
    let mut params = ParamSet::new();
    let encoder = DenseNet::new(&mut params, "enc", &[4, 8], Activation::Tanh, rng);
    let cell = Recurrent::new(&mut params, "rnn", 8, 8, rng);
    let head = DenseNet::new(&mut params, "head", &[8, 2], Activation::Identity, rng);
    Net {
        params,
        encoder,
        cell,
        head,
    }
}

/// Quadratic loss over a short batched sequence; rows drop out as sequences end.
pub fn loss_tape<'p>(net: &Net, params: &'p ParamSet, xs: &[Matrix], ys: &[Matrix]) -> (Tape<'p>, Var) {
    let mut tape = Tape::new(params);
    let mut state = None;
    let mut terms = Vec::new();
    for (x, y) in xs.iter().zip(ys) {
        let rows = x.rows();
        if let Some(s) = state {
            state = Some(tape.top_rows(s, rows).unwrap());
        }
        let xv = tape.constant(x.clone());
        let e = net.encoder.forward(&mut tape, xv).unwrap();
        let s = net.cell.step(&mut tape, e, state).unwrap();
        state = Some(s);
        let h = net.cell.hidden(&mut tape, s).unwrap();
        let out = net.head.forward(&mut tape, h).unwrap();
        terms.push(tape.squared_error(out, y.clone(), None, 0.5).unwrap());
    }
    let loss = tape.sum(&terms).unwrap();
    (tape, loss)
}

fn loss_value(net: &Net, params: &ParamSet, xs: &[Matrix], ys: &[Matrix]) -> f64 {
    let (tape, loss) = loss_tape(net, params, xs, ys);
    tape.value(loss).unwrap().get(0, 0)
}

/// Runs `probes` random probes and returns the worst relative error seen.
pub fn worst_relative_error(probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let net = build(&mut rng);
        let lens = [3usize, 3, 2, 1];
        let xs: Vec<Matrix> = lens
            .iter()
            .map(|&n| Matrix::from_fn(n, 4, |_, _| rng.gen_range(-1.5..1.5)))
            .collect();
        let ys: Vec<Matrix> = lens
            .iter()
            .map(|&n| Matrix::from_fn(n, 2, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let (tape, loss) = loss_tape(&net, &net.params, &xs, &ys);
        let grads = tape.backward(loss).unwrap();

        let tensor = rng.gen_range(0..net.params.len());
        let id: ParamId = net.params.ids().nth(tensor).unwrap();
        let n = net.params.get(id).as_slice().len();
        let coord = rng.gen_range(0..n);
        let analytic = grads.get(id).as_slice()[coord];

        let mut plus = net.params.clone();
        plus.get_mut(id).as_mut_slice()[coord] += STEP;
        let mut minus = net.params.clone();
        minus.get_mut(id).as_mut_slice()[coord] -= STEP;
        let numeric = (loss_value(&net, &plus, &xs, &ys) - loss_value(&net, &minus, &xs, &ys)) / (2.0 * STEP);

        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    worst
}
