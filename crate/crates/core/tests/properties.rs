use std::f64::consts::PI;

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use distcritic_core::agents::{combine_targets, ReplayBuffer, Transition};
use distcritic_core::critics::{CriticConfig, DistCritic, Strategy as Fractions};
use distcritic_core::distcore::{project_w1, DiscreteDistribution};
use distcritic_core::envs::{pendulum_step, Environment, Pendulum, PendulumState, PointMass, TabularMdp, TabularPolicy};
use distcritic_core::oracle::{distributional_bellman_apply, zero_representation};

fn fractions() -> impl Strategy<Value = Fractions> {
    prop_oneof![Just(Fractions::Fixed), Just(Fractions::Sampled), Just(Fractions::Learned)]
}

/// Multiples of 2⁻¹⁰ of moderate size; sums and products by the dyadic
/// discounts below stay exact in f64.
fn dyadic() -> impl Strategy<Value = f64> {
    (-(1i64 << 20)..(1i64 << 20)).prop_map(|k| k as f64 / 1024.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn critic_outputs_have_the_requested_cardinality(
        s in fractions(),
        n in 1usize..24,
        seed in any::<u64>(),
        batch in 1usize..5,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = CriticConfig { hidden: vec![8, 8], n_cos: 8, ..CriticConfig::new(s, n) };
        let critic = DistCritic::new(cfg, 3, 2, 1e-3, 1e-3, &mut rng).unwrap();
        let states = Array2::from_shape_fn((batch, 3), |(i, j)| (i as f64 - j as f64) * 0.7);
        let actions = Array2::from_shape_fn((batch, 2), |(i, j)| ((i + j) as f64).sin());
        let q = critic.predict_batch(states.view(), actions.view(), None, &mut rng).unwrap();
        prop_assert_eq!(q.values.dim(), (batch, n));
        prop_assert!(q.values.iter().all(|v| v.is_finite()));
        for f in &q.fractions {
            prop_assert_eq!(f.len(), n);
            prop_assert_eq!(f.widths().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn target_shift_in_reward_is_exact(
        r in prop::collection::vec(dyadic(), 1..6),
        delta in dyadic(),
        gamma_k in 0u32..=256,
        q in prop::collection::vec(dyadic(), 12),
        done in prop::collection::vec(any::<bool>(), 6),
    ) {
        let b = r.len();
        let m = 2;
        let gamma = gamma_k as f64 / 256.0;
        let q1 = Array2::from_shape_fn((b, m), |(i, j)| q[(i * m + j) % q.len()]);
        let q2 = Array2::from_shape_fn((b, m), |(i, j)| q[(i * m + j + 5) % q.len()]);
        let dones: Vec<f64> = (0..b).map(|i| if done[i] { 1.0 } else { 0.0 }).collect();
        let logp = vec![0.0; b];
        let y = combine_targets(&r, &dones, gamma, 0.0, q1.view(), q2.view(), &logp).unwrap();
        let shifted: Vec<f64> = r.iter().map(|x| x + delta).collect();
        let y2 = combine_targets(&shifted, &dones, gamma, 0.0, q1.view(), q2.view(), &logp).unwrap();
        for (a, b) in y2.iter().zip(y.iter()) {
            prop_assert_eq!(a - b, delta);
        }
        for (i, d) in dones.iter().enumerate() {
            if *d == 1.0 {
                prop_assert!(y.row(i).iter().all(|&v| v == r[i]));
            }
        }
    }

    #[test]
    fn replay_keeps_the_newest_transitions(capacity in 1usize..20, pushes in 0usize..60) {
        let mut buf = ReplayBuffer::new(capacity, 1, 1).unwrap();
        for k in 0..pushes {
            buf.push(&Transition {
                state: vec![k as f64],
                action: vec![0.0],
                reward: k as f64,
                next_state: vec![k as f64 + 1.0],
                done: false,
            }).unwrap();
        }
        prop_assert_eq!(buf.len(), pushes.min(capacity));
        for i in 0..buf.len() {
            let expected = (pushes - buf.len() + i) as f64;
            prop_assert_eq!(buf.get(i).unwrap().reward, expected);
        }
        prop_assert!(buf.get(buf.len()).is_none());
    }

    #[test]
    fn pendulum_rewards_stay_in_bounds(
        theta in -10.0f64..10.0,
        theta_dot in -8.0f64..8.0,
        actions in prop::collection::vec(-5.0f64..5.0, 200),
    ) {
        let lower = -(PI * PI + 0.1 * 64.0 + 0.001 * 4.0);
        let mut env = Pendulum::new();
        env.reset_to(PendulumState { theta, theta_dot });
        let mut steps = 0;
        for a in &actions {
            let st = env.step(&[*a]);
            steps += 1;
            prop_assert!(st.reward <= 0.0 && st.reward >= lower, "{}", st.reward);
            prop_assert!(!st.terminated);
            prop_assert_eq!(st.truncated, steps == 200);
        }
    }

    #[test]
    fn pendulum_step_is_pure(theta in -4.0f64..4.0, theta_dot in -8.0f64..8.0, u in -3.0f64..3.0) {
        let s = PendulumState { theta, theta_dot };
        let (a, ra) = pendulum_step(s, u);
        let (b, rb) = pendulum_step(s, u);
        prop_assert_eq!(a, b);
        prop_assert_eq!(ra.to_bits(), rb.to_bits());
    }

    #[test]
    fn pointmass_rewards_stay_in_bounds(actions in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 100), seed in any::<u64>()) {
        let mut env = PointMass::new();
        env.reset(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut total = 0.0;
        for (i, (x, y)) in actions.iter().enumerate() {
            let st = env.step(&[*x, *y]);
            total += st.reward;
            prop_assert!(st.reward <= 0.0 && st.reward >= -(8.0 + 0.02));
            prop_assert_eq!(st.truncated, i == 99);
        }
        prop_assert!(total.is_finite());
    }

    #[test]
    fn projected_bellman_output_is_a_sorted_quantile_set(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mdp = TabularMdp::random(3, 2, 0.9, &mut rng).unwrap();
        let pi = TabularPolicy::random(&mdp, &mut rng);
        let mut z = zero_representation(&mdp, n).unwrap();
        for _ in 0..5 {
            z = distributional_bellman_apply(&mdp, &pi, &z, n).unwrap();
        }
        for q in &z {
            prop_assert!(q.values().windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(q.len(), n);
        }
    }

    #[test]
    fn projection_of_a_projection_is_itself(values in prop::collection::vec(-5.0f64..5.0, 1..12), n in 1usize..6) {
        let d = DiscreteDistribution::uniform(&values).unwrap();
        let p = project_w1(&d, n).unwrap();
        let again = project_w1(&p.to_discrete().unwrap(), n).unwrap();
        prop_assert_eq!(p.values(), again.values());
    }
}
