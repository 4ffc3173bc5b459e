//! Scripted controllers that stand in for a learned expert.

use crate::env::{clamp_unit, Env, EnvId, CONTACT_RADIUS};

const POINT_GAIN: f64 = 4.0;
const POINT_DAMPING: f64 = 4.0;
const ARM_GAIN: f64 = 16.0;
const CHAIN_GAIN: f64 = 8.0;
/// Clearance kept around the block while walking to the pushing spot.
const ORBIT_RADIUS: f64 = 0.16;
const LINE_UP_TOL: f64 = 0.01;
/// Block travel per pushing step; short strides keep the contact stable.
const PUSH_STRIDE: f64 = 0.01;

/// Expert action for `state` under `env`; always inside the action box.
pub fn expert_action(env: &Env, state: &[f64]) -> Vec<f64> {
    let raw = match env.id() {
        EnvId::PointReach => {
            let (p, v, g) = ([state[0], state[1]], [state[2], state[3]], [state[4], state[5]]);
            vec![
                POINT_GAIN * (g[0] - p[0]) - POINT_DAMPING * v[0],
                POINT_GAIN * (g[1] - p[1]) - POINT_DAMPING * v[1],
            ]
        }
        EnvId::ArmReach => jacobian_transpose(env, state, ARM_GAIN),
        EnvId::ChainReach => jacobian_transpose(env, state, CHAIN_GAIN),
        EnvId::PushBlock => push_action(env, state),
    };
    raw.into_iter().map(clamp_unit).collect()
}

/// `k · Jᵀ (g − e)` for a planar chain.
fn jacobian_transpose(env: &Env, state: &[f64], gain: f64) -> Vec<f64> {
    let links = env.link_lengths();
    let n = links.len();
    let goal = env.goal(state);
    // joint positions, then the tip
    let mut joints = Vec::with_capacity(n + 1);
    let (mut phi, mut pos) = (0.0, [0.0, 0.0]);
    joints.push(pos);
    for (th, l) in state[..n].iter().zip(links) {
        phi += th;
        pos = [pos[0] + l * phi.cos(), pos[1] + l * phi.sin()];
        joints.push(pos);
    }
    let tip = joints[n];
    let err = [goal[0] - tip[0], goal[1] - tip[1]];
    (0..n)
        .map(|i| {
            // column i of J is the tip offset from joint i rotated by 90°
            let r = [tip[0] - joints[i][0], tip[1] - joints[i][1]];
            gain * (-r[1] * err[0] + r[0] * err[1])
        })
        .collect()
}

/// Walks around the block to the spot opposite the goal, then pushes.
fn push_action(env: &Env, state: &[f64]) -> Vec<f64> {
    let step = env.joint_dt();
    let (p, b, g) = ([state[0], state[1]], [state[2], state[3]], [state[4], state[5]]);
    let to_goal = [g[0] - b[0], g[1] - b[1]];
    let remaining = to_goal[0].hypot(to_goal[1]);
    if remaining < 1e-9 {
        return vec![0.0, 0.0];
    }
    let u = [to_goal[0] / remaining, to_goal[1] / remaining];
    let contact = [b[0] - CONTACT_RADIUS * u[0], b[1] - CONTACT_RADIUS * u[1]];
    let target = if dist(p, contact) < LINE_UP_TOL {
        // place the gripper so the projection moves the block by s along u
        let s = remaining.min(PUSH_STRIDE);
        [b[0] - (CONTACT_RADIUS - s) * u[0], b[1] - (CONTACT_RADIUS - s) * u[1]]
    } else {
        approach_target(p, b, u, contact, step)
    };
    vec![(target[0] - p[0]) / step, (target[1] - p[1]) / step]
}

fn approach_target(p: [f64; 2], b: [f64; 2], u: [f64; 2], contact: [f64; 2], step: f64) -> [f64; 2] {
    let rel = [p[0] - b[0], p[1] - b[1]];
    let r = rel[0].hypot(rel[1]);
    let ang_p = rel[1].atan2(rel[0]);
    let ang_c = (-u[1]).atan2(-u[0]);
    let diff = wrap(ang_c - ang_p);
    if diff.abs() < 0.35 {
        // roughly behind the block: head straight for the contact spot, but
        // never closer than touching distance
        let d = dist(p, contact);
        if d <= step {
            return contact;
        }
        let t = [
            p[0] + step * (contact[0] - p[0]) / d,
            p[1] + step * (contact[1] - p[1]) / d,
        ];
        return keep_clear(t, b, CONTACT_RADIUS + 1e-6);
    }
    if r < ORBIT_RADIUS - 1e-3 {
        let s = if r > 1e-9 { 1.0 / r } else { 0.0 };
        let out = [b[0] + ORBIT_RADIUS * rel[0] * s, b[1] + ORBIT_RADIUS * rel[1] * s];
        return keep_clear(out, b, CONTACT_RADIUS + 1e-6);
    }
    if r > ORBIT_RADIUS + step {
        // go to the orbit point on the shorter side
        let ang = ang_p + diff.signum() * (diff.abs().min(std::f64::consts::FRAC_PI_2));
        let w = [b[0] + ORBIT_RADIUS * ang.cos(), b[1] + ORBIT_RADIUS * ang.sin()];
        let d = dist(p, w);
        return [p[0] + step * (w[0] - p[0]) / d, p[1] + step * (w[1] - p[1]) / d];
    }
    let dphi = diff.signum() * (step / ORBIT_RADIUS).min(diff.abs());
    let ang = ang_p + dphi;
    [b[0] + ORBIT_RADIUS * ang.cos(), b[1] + ORBIT_RADIUS * ang.sin()]
}

fn keep_clear(t: [f64; 2], b: [f64; 2], radius: f64) -> [f64; 2] {
    let d = dist(t, b);
    if d >= radius || d < 1e-12 {
        return t;
    }
    [b[0] + radius * (t[0] - b[0]) / d, b[1] + radius * (t[1] - b[1]) / d]
}

fn wrap(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = a % two_pi;
    if a > std::f64::consts::PI {
        a -= two_pi;
    } else if a < -std::f64::consts::PI {
        a += two_pi;
    }
    a
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::SUCCESS_EPS;
    use crate::rng::{stream, Stream};
    use proptest::prelude::*;

    fn success_rate(id: EnvId, episodes: usize, seed: u64) -> f64 {
        let env = Env::new(id);
        let mut rng = stream(seed, Stream::Env);
        let mut ok = 0;
        for _ in 0..episodes {
            let mut s = env.reset(&mut rng);
            while s.t < env.spec().horizon {
                let a = expert_action(&env, &s.vector);
                s = env.step(&s, &a).unwrap();
            }
            if env.goal_distance(&s) < SUCCESS_EPS {
                ok += 1;
            }
        }
        ok as f64 / episodes as f64
    }

    #[test]
    fn reach_experts_succeed_on_nearly_every_episode() {
        for id in [EnvId::PointReach, EnvId::ArmReach, EnvId::ChainReach] {
            let rate = success_rate(id, 200, 0);
            assert!(rate >= 0.95, "{id}: {rate}");
        }
    }

    #[test]
    fn push_expert_solves_a_useful_fraction() {
        let rate = success_rate(EnvId::PushBlock, 200, 1);
        assert!(rate >= 0.2, "{rate}");
    }

    proptest! {
        #[test]
        fn push_expert_delivers_from_behind_the_block(
            bx in -0.3f64..0.3, by in -0.3f64..0.3, ang in -3.1f64..3.1, d in 0.06f64..0.45,
        ) {
            // 0.45 needs 45 pushing steps at the fixed stride
            let env = Env::new(EnvId::PushBlock);
            let u = [ang.cos(), ang.sin()];
            let v = vec![bx - 0.1 * u[0], by - 0.1 * u[1], bx, by, bx + d * u[0], by + d * u[1]];
            let mut s = env.state_from_vector(&v).unwrap();
            while s.t < env.spec().horizon {
                s = env.step(&s, &expert_action(&env, &s.vector)).unwrap();
            }
            prop_assert!(env.goal_distance(&s) < SUCCESS_EPS, "left {}", env.goal_distance(&s));
        }
    }

    #[test]
    fn at_rest_on_goal_the_point_expert_is_quiet() {
        let env = Env::new(EnvId::PointReach);
        let a = expert_action(&env, &[0.3, -0.2, 0.0, 0.0, 0.3, -0.2]);
        assert!(a[0].hypot(a[1]) < 0.05);
    }

    proptest! {
        #[test]
        fn actions_stay_in_the_box(seed in 0u64..500, id in 0usize..4) {
            let env = Env::new(EnvId::ALL[id]);
            let mut rng = stream(seed, Stream::Env);
            let mut s = env.reset(&mut rng);
            for _ in 0..10 {
                let a = expert_action(&env, &s.vector);
                prop_assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
                s = env.step(&s, &a).unwrap();
            }
        }
    }
}
