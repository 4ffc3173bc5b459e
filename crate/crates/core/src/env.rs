//! Deterministic desk-scale control tasks with analytic dynamics.
//!
//! | env           | state                      | action | dynamics                                  |
//! |---------------|----------------------------|--------|-------------------------------------------|
//! | `point_reach` | `px py vx vy gx gy`        | 2      | `v' = clip(v + 0.1a, ±1)`, `p' = p + 0.1v'` |
//! | `arm_reach`   | `θ1 θ2 gx gy`              | 2      | `θ' = θ + 0.1a`, links 0.5/0.5            |
//! | `push_block`  | `px py bx by gx gy`        | 2      | `p' = p + 0.05a`, single contact projection |
//! | `chain_reach` | `θ1..θ10 gx gy`            | 10     | `θ' = θ + 0.05a`, ten links of 0.1        |
//!
//! Actions are clamped to `[-1, 1]` before use. Angles are not wrapped.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

pub const HORIZON: usize = 50;
pub const SUCCESS_EPS: f64 = 0.05;
pub const CONTACT_RADIUS: f64 = 0.1;

const POINT_DT: f64 = 0.1;
const ARM_DT: f64 = 0.1;
const ARM_LINKS: [f64; 2] = [0.5, 0.5];
const PUSH_STEP: f64 = 0.05;
const CHAIN_DT: f64 = 0.05;
const CHAIN_JOINTS: usize = 10;
const CHAIN_LINK: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvId {
    PointReach,
    ArmReach,
    PushBlock,
    ChainReach,
}

impl EnvId {
    pub const ALL: [EnvId; 4] = [EnvId::PointReach, EnvId::ArmReach, EnvId::PushBlock, EnvId::ChainReach];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::PointReach => "point_reach",
            EnvId::ArmReach => "arm_reach",
            EnvId::PushBlock => "push_block",
            EnvId::ChainReach => "chain_reach",
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::UnknownEnv(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub env_id: EnvId,
    pub state_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    pub success_eps: f64,
    pub nontrivial_eps: f64,
}

pub fn env_spec(env_id: EnvId) -> EnvSpec {
    let (state_dim, action_dim, nontrivial_eps) = match env_id {
        EnvId::PointReach => (6, 2, 0.5),
        EnvId::ArmReach => (4, 2, 0.5),
        EnvId::PushBlock => (6, 2, 0.3),
        EnvId::ChainReach => (CHAIN_JOINTS + 2, CHAIN_JOINTS, 0.3),
    };
    EnvSpec {
        env_id,
        state_dim,
        action_dim,
        horizon: HORIZON,
        success_eps: SUCCESS_EPS,
        nontrivial_eps,
    }
}

/// Parses an environment id string and returns its constants.
pub fn env_spec_by_name(name: &str) -> Result<EnvSpec> {
    Ok(env_spec(name.parse()?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub vector: Vec<f64>,
    pub t: usize,
}

/// Stateless handle over one task's dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Env {
    spec: EnvSpec,
}

impl Env {
    pub fn new(env_id: EnvId) -> Self {
        Env { spec: env_spec(env_id) }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn id(&self) -> EnvId {
        self.spec.env_id
    }

    /// Samples an initial state with a goal at least `nontrivial_eps` away.
    pub fn reset(&self, rng: &mut impl Rng) -> EnvState {
        loop {
            let vector = match self.spec.env_id {
                EnvId::PointReach => {
                    let p = uniform2(rng, 0.5);
                    let g = uniform2(rng, 0.8);
                    vec![p[0], p[1], 0.0, 0.0, g[0], g[1]]
                }
                EnvId::ArmReach => {
                    let th1 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                    let th2 = rng.gen_range(0.3..2.6);
                    let g1 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                    let g2 = rng.gen_range(0.3..2.6);
                    let g = planar_fk(&[g1, g2], &ARM_LINKS);
                    vec![th1, th2, g[0], g[1]]
                }
                EnvId::PushBlock => {
                    let b = uniform2(rng, 0.3);
                    let g = uniform2(rng, 0.5);
                    let p = uniform2(rng, 0.5);
                    if dist(p, b) < 2.0 * CONTACT_RADIUS {
                        continue;
                    }
                    vec![p[0], p[1], b[0], b[1], g[0], g[1]]
                }
                EnvId::ChainReach => {
                    let mut v: Vec<f64> = (0..CHAIN_JOINTS).map(|_| rng.gen_range(-0.3..0.3)).collect();
                    let goal_angles: Vec<f64> = (0..CHAIN_JOINTS).map(|_| rng.gen_range(-0.4..0.4)).collect();
                    let g = planar_fk(&goal_angles, &[CHAIN_LINK; CHAIN_JOINTS]);
                    v.extend_from_slice(&g);
                    v
                }
            };
            let state = EnvState { vector, t: 0 };
            if self.goal_distance(&state) >= self.spec.nontrivial_eps {
                return state;
            }
        }
    }

    /// Builds a `t = 0` state from a raw vector, e.g. a demonstration's start.
    pub fn state_from_vector(&self, vector: &[f64]) -> Result<EnvState> {
        if vector.len() != self.spec.state_dim {
            return Err(shape_err("state vector", self.spec.state_dim, vector.len()));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state vector"));
        }
        Ok(EnvState {
            vector: vector.to_vec(),
            t: 0,
        })
    }

    pub fn step(&self, state: &EnvState, action: &[f64]) -> Result<EnvState> {
        if state.t >= self.spec.horizon {
            return Err(Error::PastHorizon {
                t: state.t,
                horizon: self.spec.horizon,
            });
        }
        if action.len() != self.spec.action_dim {
            return Err(shape_err("action", self.spec.action_dim, action.len()));
        }
        if state.vector.len() != self.spec.state_dim {
            return Err(shape_err("state", self.spec.state_dim, state.vector.len()));
        }
        let a: Vec<f64> = action.iter().map(|v| clamp_unit(*v)).collect();
        let s = &state.vector;
        let mut next = s.clone();
        match self.spec.env_id {
            EnvId::PointReach => {
                for i in 0..2 {
                    let v = (s[2 + i] + POINT_DT * a[i]).clamp(-1.0, 1.0);
                    next[2 + i] = v;
                    next[i] = s[i] + POINT_DT * v;
                }
            }
            EnvId::ArmReach => {
                for i in 0..2 {
                    next[i] = s[i] + ARM_DT * a[i];
                }
            }
            EnvId::PushBlock => {
                let p = [s[0] + PUSH_STEP * a[0], s[1] + PUSH_STEP * a[1]];
                let b = [s[2], s[3]];
                next[0] = p[0];
                next[1] = p[1];
                let d = dist(p, b);
                if d < CONTACT_RADIUS {
                    // Push the block out along the contact normal until it touches.
                    let normal = if d > 1e-12 {
                        [(b[0] - p[0]) / d, (b[1] - p[1]) / d]
                    } else {
                        let (dx, dy) = (b[0] - s[0], b[1] - s[1]);
                        let n = dx.hypot(dy);
                        if n > 1e-12 {
                            [dx / n, dy / n]
                        } else {
                            [1.0, 0.0]
                        }
                    };
                    next[2] = p[0] + CONTACT_RADIUS * normal[0];
                    next[3] = p[1] + CONTACT_RADIUS * normal[1];
                }
            }
            EnvId::ChainReach => {
                for i in 0..CHAIN_JOINTS {
                    next[i] = s[i] + CHAIN_DT * a[i];
                }
            }
        }
        Ok(EnvState {
            vector: next,
            t: state.t + 1,
        })
    }

    /// Coordinates the task is judged on: effector or block position.
    pub fn task_coords(&self, vector: &[f64]) -> [f64; 2] {
        match self.spec.env_id {
            EnvId::PointReach => [vector[0], vector[1]],
            EnvId::ArmReach => planar_fk(&vector[..2], &ARM_LINKS),
            EnvId::PushBlock => [vector[2], vector[3]],
            EnvId::ChainReach => planar_fk(&vector[..CHAIN_JOINTS], &[CHAIN_LINK; CHAIN_JOINTS]),
        }
    }

    pub fn goal(&self, vector: &[f64]) -> [f64; 2] {
        let n = vector.len();
        [vector[n - 2], vector[n - 1]]
    }

    pub fn goal_distance(&self, state: &EnvState) -> f64 {
        dist(self.task_coords(&state.vector), self.goal(&state.vector))
    }

    /// End-effector position for the arm tasks, `None` otherwise.
    pub fn effector(&self, vector: &[f64]) -> Option<[f64; 2]> {
        match self.spec.env_id {
            EnvId::ArmReach | EnvId::ChainReach => Some(self.task_coords(vector)),
            _ => None,
        }
    }

    pub(crate) fn link_lengths(&self) -> &'static [f64] {
        match self.spec.env_id {
            EnvId::ArmReach => &ARM_LINKS,
            EnvId::ChainReach => &[CHAIN_LINK; CHAIN_JOINTS],
            _ => &[],
        }
    }

    pub(crate) fn joint_dt(&self) -> f64 {
        match self.spec.env_id {
            EnvId::ArmReach => ARM_DT,
            EnvId::ChainReach => CHAIN_DT,
            EnvId::PushBlock => PUSH_STEP,
            EnvId::PointReach => POINT_DT,
        }
    }
}

pub fn reset(env_id: EnvId, rng: &mut impl Rng) -> EnvState {
    Env::new(env_id).reset(rng)
}

pub fn step(env_id: EnvId, state: &EnvState, action: &[f64]) -> Result<EnvState> {
    Env::new(env_id).step(state, action)
}

pub fn goal_distance(env_id: EnvId, state: &EnvState) -> f64 {
    Env::new(env_id).goal_distance(state)
}

#[inline]
pub fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-1.0, 1.0)
    }
}

/// Tip position of a planar serial chain rooted at the origin.
pub fn planar_fk(angles: &[f64], links: &[f64]) -> [f64; 2] {
    let mut phi = 0.0;
    let mut tip = [0.0, 0.0];
    for (th, l) in angles.iter().zip(links) {
        phi += th;
        tip[0] += l * phi.cos();
        tip[1] += l * phi.sin();
    }
    tip
}

fn uniform2(rng: &mut impl Rng, half: f64) -> [f64; 2] {
    [rng.gen_range(-half..=half), rng.gen_range(-half..=half)]
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}
