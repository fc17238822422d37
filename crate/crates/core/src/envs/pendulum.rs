use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{EnvSpec, Environment, Step};

const GRAVITY: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;
const MAX_SPEED: f64 = 8.0;
pub(crate) const MAX_TORQUE: f64 = 2.0;
const EPISODE_STEPS: usize = 200;

/// Angle (0 = upright) and angular velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumState {
    pub theta: f64,
    pub theta_dot: f64,
}

fn wrap_angle(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Swing-up dynamics. Reward is charged on the pre-step state.
pub fn pendulum_step(state: PendulumState, torque: f64) -> (PendulumState, f64) {
    let u = torque.clamp(-MAX_TORQUE, MAX_TORQUE);
    let th = state.theta;
    let th_dot = state.theta_dot;
    let cost = wrap_angle(th).powi(2) + 0.1 * th_dot * th_dot + 0.001 * u * u;
    let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * th.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
    let new_dot = (th_dot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
    let next = PendulumState {
        theta: th + new_dot * DT,
        theta_dot: new_dot,
    };
    (next, -cost)
}

#[derive(Debug, Clone)]
pub struct Pendulum {
    spec: EnvSpec,
    state: PendulumState,
    steps: usize,
}

impl Pendulum {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec::new(3, vec![-MAX_TORQUE], vec![MAX_TORQUE], EPISODE_STEPS).unwrap(),
            state: PendulumState {
                theta: PI,
                theta_dot: 0.0,
            },
            steps: 0,
        }
    }

    pub fn state(&self) -> PendulumState {
        self.state
    }

    /// Starts an episode from an explicit state.
    pub fn reset_to(&mut self, state: PendulumState) -> Vec<f64> {
        self.state = state;
        self.steps = 0;
        self.observation()
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.state.theta.cos(), self.state.theta.sin(), self.state.theta_dot]
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let state = PendulumState {
            theta: rng.random_range(-PI..=PI),
            theta_dot: rng.random_range(-1.0..=1.0),
        };
        self.reset_to(state)
    }

    fn step(&mut self, action: &[f64]) -> Step {
        let (clipped, action_clipped) = self.spec.clip_action(action);
        let (next, reward) = pendulum_step(self.state, clipped[0]);
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

    #[test]
    fn upright_equilibrium() {
        let s = PendulumState { theta: 0.0, theta_dot: 0.0 };
        let (next, r) = pendulum_step(s, 0.0);
        assert_eq!(next, s);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn hanging_down() {
        let s = PendulumState { theta: PI, theta_dot: 0.0 };
        let (next, r) = pendulum_step(s, 0.0);
        assert!((r + PI * PI).abs() < 1e-12);
        // sin(π) is ~1.2e-16 in floating point
        assert!(next.theta_dot.abs() < 1e-15);
        assert!((next.theta - PI).abs() < 1e-15);
    }

    #[test]
    fn rewards_bounded_and_episode_length_fixed() {
        let bound = PI * PI + 0.1 * 64.0 + 0.001 * 4.0;
        let mut env = Pendulum::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..5 {
            env.reset(&mut rng);
            let mut steps = 0;
            loop {
                let a = rng.random_range(-3.0..3.0);
                let s = env.step(&[a]);
                steps += 1;
                assert!(s.reward <= 0.0 && s.reward >= -bound);
                assert!(!s.terminated);
                assert_eq!(s.action_clipped, a.abs() > 2.0);
                if s.truncated {
                    break;
                }
            }
            assert_eq!(steps, 200);
        }
    }

    #[test]
    fn step_is_pure() {
        let s = PendulumState { theta: 1.3, theta_dot: -0.4 };
        assert_eq!(pendulum_step(s, 0.7), pendulum_step(s, 0.7));
    }
}
