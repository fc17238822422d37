use rand::{Rng, RngCore};

use super::{EnvSpec, Environment, Step};

const EPISODE_STEPS: usize = 100;
const POSITION_LIMIT: f64 = 2.0;

/// Planar position and velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMassState {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
}

/// Damped double integrator driven toward the origin. Positions are clipped
/// to `[-2, 2]²`.
pub fn pointmass_step(state: PointMassState, action: [f64; 2]) -> (PointMassState, f64) {
    let a = action.map(|x| x.clamp(-1.0, 1.0));
    let mut next = state;
    for k in 0..2 {
        next.velocity[k] = 0.95 * state.velocity[k] + 0.1 * a[k];
        next.position[k] = (state.position[k] + 0.1 * next.velocity[k]).clamp(-POSITION_LIMIT, POSITION_LIMIT);
    }
    let dist2 = next.position[0].powi(2) + next.position[1].powi(2);
    let effort = a[0] * a[0] + a[1] * a[1];
    (next, -dist2 - 0.01 * effort)
}

#[derive(Debug, Clone)]
pub struct PointMass {
    spec: EnvSpec,
    state: PointMassState,
    steps: usize,
}

impl PointMass {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec::new(4, vec![-1.0; 2], vec![1.0; 2], EPISODE_STEPS).unwrap(),
            state: PointMassState {
                position: [0.0; 2],
                velocity: [0.0; 2],
            },
            steps: 0,
        }
    }

    pub fn reset_to(&mut self, state: PointMassState) -> Vec<f64> {
        self.state = state;
        self.steps = 0;
        self.observation()
    }

    pub fn state(&self) -> PointMassState {
        self.state
    }

    fn observation(&self) -> Vec<f64> {
        let s = &self.state;
        vec![s.position[0], s.position[1], s.velocity[0], s.velocity[1]]
    }
}

impl Default for PointMass {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for PointMass {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let state = PointMassState {
            position: [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)],
            velocity: [0.0; 2],
        };
        self.reset_to(state)
    }

    fn step(&mut self, action: &[f64]) -> Step {
        let (clipped, action_clipped) = self.spec.clip_action(action);
        let (next, reward) = pointmass_step(self.state, [clipped[0], clipped[1]]);
        self.state = next;
        self.steps += 1;
        Step {
            observation: self.observation(),
            reward,
            terminated: false,
            truncated: self.steps >= self.spec.max_episode_steps,
            action_clipped,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn at(x: f64, y: f64) -> PointMassState {
        PointMassState {
            position: [x, y],
            velocity: [0.0; 2],
        }
    }

    #[test]
    fn origin_at_rest() {
        let (next, r) = pointmass_step(at(0.0, 0.0), [0.0, 0.0]);
        assert_eq!(next, at(0.0, 0.0));
        assert_eq!(r, 0.0);
    }

    #[test]
    fn unit_offset_no_action() {
        let (next, r) = pointmass_step(at(1.0, 0.0), [0.0, 0.0]);
        assert_eq!(next, at(1.0, 0.0));
        assert_eq!(r, -1.0);
    }

    #[test]
    fn unit_offset_pushed_back() {
        let (next, r) = pointmass_step(at(1.0, 0.0), [-1.0, 0.0]);
        assert!((next.velocity[0] + 0.1).abs() < 1e-15);
        assert!((next.position[0] - 0.99).abs() < 1e-15);
        assert!((r - (-0.9801 - 0.01)).abs() < 1e-12);
    }

    #[test]
    fn rewards_bounded_over_random_rollouts() {
        let mut env = PointMass::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            env.reset(&mut rng);
            let mut steps = 0;
            loop {
                // push consistently outward to reach the walls
                let s = env.step(&[1.0, 1.0]);
                steps += 1;
                assert!(s.reward <= 0.0 && s.reward >= -(8.0 + 0.02));
                if s.truncated {
                    break;
                }
            }
            assert_eq!(steps, 100);
        }
    }
}
