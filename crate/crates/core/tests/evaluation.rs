//! Evaluation against demonstrations with real models.

use advexp::buffer::SampleBuffer;
use advexp::env::{env_spec, EnvId};
use advexp::expert_eval::{evaluate, generate_demos, DemoSet};
use advexp::inverse::{train_inverse, InverseArch, InverseModel};
use advexp::nn::{Adam, AdamConfig};
use advexp::rng::{stream, Stream};

fn model(env: EnvId, seed: u64, width: usize) -> InverseModel {
    let spec = env_spec(env);
    InverseModel::new(
        InverseArch::new(spec.state_dim, spec.action_dim, width, width),
        &mut stream(seed, Stream::InverseInit),
    )
}

fn demo_buffer(set: &DemoSet) -> SampleBuffer {
    let mut buf = SampleBuffer::new();
    for ep in &set.episodes {
        buf.extend_episode(&ep.transitions());
    }
    buf
}

fn mean_loss(model: &InverseModel, set: &DemoSet) -> f64 {
    let eps: Vec<_> = set.episodes.iter().map(|e| e.transitions()).collect();
    let refs: Vec<&[_]> = eps.iter().map(|e| e.as_slice()).collect();
    let losses: Vec<f64> = model.episode_losses(&refs).unwrap().into_iter().flatten().collect();
    losses.iter().sum::<f64>() / losses.len() as f64
}

#[test]
fn untrained_model_rarely_pushes_the_block_home() {
    let set = generate_demos(EnvId::PushBlock, 100, &mut stream(0, Stream::DemoEval))
        .unwrap()
        .set;
    let m = model(EnvId::PushBlock, 0, 64);
    let r = evaluate(&m, EnvId::PushBlock, &set, 100, &mut stream(0, Stream::EvalSubset)).unwrap();
    assert_eq!(r.n_episodes, 100);
    assert!(r.success_rate <= 0.1, "{}", r.success_rate);
}

#[test]
fn lower_demo_loss_tracks_at_least_as_well() {
    let held_out = generate_demos(EnvId::PointReach, 40, &mut stream(99, Stream::DemoEval))
        .unwrap()
        .set;
    let mut agree = 0;
    for seed in 0..20 {
        let train = generate_demos(EnvId::PointReach, 60, &mut stream(seed, Stream::DemoTrain))
            .unwrap()
            .set;
        let buf = demo_buffer(&train);
        let mut m = model(EnvId::PointReach, seed, 16);
        let mut adam = Adam::new(AdamConfig::default(), m.params());
        let mut rng = stream(seed, Stream::InverseSampling);
        train_inverse(&mut m, &buf, 40, 64, &mut adam, &mut rng).unwrap();
        let early = m.clone();
        train_inverse(&mut m, &buf, 400, 64, &mut adam, &mut rng).unwrap();

        let pair = [(mean_loss(&early, &held_out), &early), (mean_loss(&m, &held_out), &m)];
        let (better, worse) = if pair[0].0 < pair[1].0 {
            (pair[0].1, pair[1].1)
        } else {
            (pair[1].1, pair[0].1)
        };
        let eval = |x: &InverseModel| {
            evaluate(
                x,
                EnvId::PointReach,
                &held_out,
                40,
                &mut stream(seed, Stream::EvalSubset),
            )
            .unwrap()
            .success_rate
        };
        agree += usize::from(eval(better) >= eval(worse));
    }
    assert!(agree >= 14, "{agree}/20 pairs ordered by loss");
}
