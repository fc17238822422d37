//! Property checks against the exact oracles. Each check returns a
//! [`CheckResult`]; `verify` and the acceptance tests share them.

use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use distcritic_core::agents::{Agent, AgentConfig, Algorithm, Batch};
use distcritic_core::critics::{CriticConfig, DistCritic, FractionProposer, LossKind, Strategy};
use distcritic_core::distcore::{
    huber, project_w1, sample_fractions, w1_fraction_gradient, wasserstein_p,
    DiscreteDistribution,
};
use distcritic_core::envs::{chain_mdp, EnvName, TabularMdp, TabularPolicy};
use distcritic_core::nn::{Activation, Mlp};
use distcritic_core::oracle::{
    bellman_iterate_distances, brute_force_w1_min, enumerate_return_distribution, quadrature, tabular_quantile_td,
    LearningRate, TabularTdConfig,
};

use crate::config::{AgentOverrides, RunConfig};
use crate::metrics::strip_wall_clock;
use crate::run::run_experiment;
use crate::HarnessResult;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub metric: f64,
    pub tolerance: f64,
    pub instances: usize,
    pub seconds: f64,
    pub detail: String,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "{} {}: metric {:.3e} (tolerance {:.1e}, {} instances, {:.1}s) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.metric,
            self.tolerance,
            self.instances,
            self.seconds,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

fn finish(name: &str, started: Instant, metric: f64, tolerance: f64, instances: usize, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: metric <= tolerance,
        metric,
        tolerance,
        instances,
        seconds: started.elapsed().as_secs_f64(),
        detail,
    }
}

/// Relative tolerance of the one-sided slopes beyond which a coordinate is
/// treated as sitting on a kink (a ReLU switching inside the stencil).
const KINK_TOL: f64 = 1e-4;
const FD_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default)]
pub struct GradientComparison {
    /// Max over checked coordinates of `|fd − an| / max(1, |an|)`.
    pub max_error: f64,
    pub checked: usize,
    pub excluded: usize,
}

impl GradientComparison {
    fn merge(&mut self, o: GradientComparison) {
        self.max_error = self.max_error.max(o.max_error);
        self.checked += o.checked;
        self.excluded += o.excluded;
    }
}

/// Central differences against `analytic`, skipping coordinates whose
/// forward and backward slopes disagree.
pub fn compare_gradients(mut f: impl FnMut(&[f64]) -> f64, params: &[f64], analytic: &[f64]) -> GradientComparison {
    let mut x = params.to_vec();
    let f0 = f(&x);
    let mut out = GradientComparison::default();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + FD_EPS;
        let up = f(&x);
        x[i] = orig - FD_EPS;
        let down = f(&x);
        x[i] = orig;
        let central = (up - down) / (2.0 * FD_EPS);
        let kink = ((up - f0) - (f0 - down)).abs() / FD_EPS;
        if kink > KINK_TOL * central.abs().max(1.0) {
            out.excluded += 1;
            continue;
        }
        out.checked += 1;
        out.max_error = out.max_error.max((central - analytic[i]).abs() / analytic[i].abs().max(1.0));
    }
    out
}

fn random_activation(rng: &mut ChaCha8Rng) -> Activation {
    if rng.random_bool(0.5) {
        Activation::Tanh
    } else {
        Activation::Relu
    }
}

fn random_hidden(rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..rng.random_range(1..=2)).map(|_| rng.random_range(2..=8)).collect()
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

/// One random critic and batch: value-parameter gradient of the TD loss.
fn critic_gradient_instance(strategy: Strategy, rng: &mut ChaCha8Rng) -> GradientComparison {
    let (sd, ad) = (rng.random_range(1..=4), rng.random_range(1..=3));
    let config = CriticConfig {
        strategy,
        n_atoms: rng.random_range(1..=6),
        kappa: rng.random_range(0.5..2.0),
        hidden: random_hidden(rng),
        activation: random_activation(rng),
        n_cos: rng.random_range(2..=8),
        loss: LossKind::Quantile,
    };
    let critic = DistCritic::new(config, sd, ad, 1e-3, 1e-3, rng).expect("valid random critic");
    let b = rng.random_range(1..=4);
    let s = uniform(rng, b, sd, 1.0);
    let a = uniform(rng, b, ad, 1.0);
    let m = rng.random_range(1..=6);
    let y = uniform(rng, b, m, 3.0);
    let frac_rng = ChaCha8Rng::seed_from_u64(rng.random());
    // learned fractions depend on the trunk but are constants of the loss
    let fractions = (strategy == Strategy::Learned).then(|| critic.propose_fractions(s.view(), a.view()).expect("propose"));
    let fractions = fractions.as_deref();
    let (_, analytic) = critic
        .clone()
        .critic_td_loss_at(s.view(), a.view(), y.view(), fractions, &mut frac_rng.clone())
        .expect("loss");
    compare_gradients(
        |p| {
            let mut c = critic.clone();
            c.set_value_params(p).expect("same layout");
            c.critic_td_loss_at(s.view(), a.view(), y.view(), fractions, &mut frac_rng.clone())
                .expect("loss")
                .0
        },
        &critic.value_params(),
        &analytic,
    )
}

fn tiny_agent_config(algorithm: Algorithm, strategy: Strategy, n: usize, rng: &mut ChaCha8Rng) -> AgentConfig {
    let mut c = AgentConfig::defaults(algorithm, strategy, n);
    c.critic.hidden = random_hidden(rng);
    c.critic.n_cos = rng.random_range(2..=8);
    c.critic.activation = random_activation(rng);
    c.actor_hidden = random_hidden(rng);
    c.actor_activation = random_activation(rng);
    c.batch_size = 8;
    c.buffer_capacity = 64;
    c
}

/// Actor-parameter gradient of the agent's actor objective.
fn actor_gradient_instance(algorithm: Algorithm, strategy: Strategy, rng: &mut ChaCha8Rng) -> GradientComparison {
    let n = rng.random_range(1..=5);
    let cfg = tiny_agent_config(algorithm, strategy, n, rng);
    let env = if rng.random_bool(0.5) { EnvName::Pendulum } else { EnvName::Pointmass };
    let mut agent = Agent::new(cfg, env.make().spec().clone(), rng.random()).expect("valid agent");
    // the objective treats fractions as constants; a zero proposer makes
    // them independent of the actions so differences see the same function
    for c in agent.critics_mut() {
        if let Some(f) = c.fpn_mut() {
            f.layer_mut().params_mut().fill(0.0);
        }
    }
    let b = rng.random_range(1..=4);
    let states = uniform(rng, b, agent.spec().observation_dim, 1.0);
    let (_, analytic) = agent.clone().actor_objective(states.view()).expect("objective");
    compare_gradients(
        |p| {
            let mut probe = agent.clone();
            probe.actor_mut().net_mut().set_params(p).expect("same layout");
            probe.actor_objective(states.view()).expect("objective").0
        },
        agent.actor().net().params(),
        &analytic,
    )
}

/// `Σ c ⊙ net(x)` for a random network with random activations.
fn mlp_gradient_instance(rng: &mut ChaCha8Rng) -> GradientComparison {
    let depth = rng.random_range(1..=3);
    let sizes: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=6)).collect();
    let acts: Vec<Activation> = (0..depth)
        .map(|_| match rng.random_range(0..3) {
            0 => Activation::Identity,
            1 => Activation::Relu,
            _ => Activation::Tanh,
        })
        .collect();
    let mut net = Mlp::new(&sizes, &acts, rng).expect("valid net");
    let b = rng.random_range(1..=4);
    let x = uniform(rng, b, sizes[0], 1.5);
    let c = uniform(rng, x.nrows(), sizes[depth], 1.0);
    net.forward(x.view()).expect("forward");
    let (analytic, _) = net.backward(c.view()).expect("backward");
    let probe = net.clone();
    compare_gradients(
        |p| {
            let mut n = probe.clone();
            n.set_params(p).expect("same layout");
            (&n.infer(x.view()).expect("forward") * &c).sum()
        },
        net.params(),
        &analytic,
    )
}

/// Analytic gradients of the critic TD loss (per strategy), the actor
/// objective (both algorithms) and MLP backprop against central differences.
pub fn check_gradients(instances: usize, seed: u64) -> CheckResult {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts = Vec::new();
    let mut total = GradientComparison::default();
    for strategy in Strategy::ALL {
        let mut g = GradientComparison::default();
        for _ in 0..instances {
            g.merge(critic_gradient_instance(strategy, &mut rng));
        }
        parts.push(format!("critic/{strategy} {:.1e}", g.max_error));
        total.merge(g);
    }
    let mut g = GradientComparison::default();
    for k in 0..instances {
        let alg = if k % 2 == 0 { Algorithm::Td3 } else { Algorithm::Sac };
        g.merge(actor_gradient_instance(alg, Strategy::ALL[k % 3], &mut rng));
    }
    parts.push(format!("actor {:.1e}", g.max_error));
    total.merge(g);
    let mut g = GradientComparison::default();
    for _ in 0..instances {
        g.merge(mlp_gradient_instance(&mut rng));
    }
    parts.push(format!("mlp {:.1e}", g.max_error));
    total.merge(g);
    let detail = format!(
        "[{}; {} coordinates, {} near kinks skipped]",
        parts.join(", "),
        total.checked,
        total.excluded
    );
    finish("gradient suite", started, total.max_error, 1e-4, instances * 5, detail)
}

fn random_discrete(rng: &mut ChaCha8Rng, max_atoms: usize, span: f64) -> DiscreteDistribution {
    let k = rng.random_range(1..=max_atoms);
    let atoms: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.random_range(0.0..span), rng.random_range(0.05..1.0)))
        .collect();
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    DiscreteDistribution::new(atoms.into_iter().map(|(v, p)| (v, p / total)).collect()).expect("valid distribution")
}

/// The quantile projection is no worse than the best equal-weight
/// distribution on a grid of the given step, up to one grid step.
pub fn check_projection(instances: usize, step: f64, seed: u64) -> CheckResult {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_gap = 0.0f64;
    for _ in 0..instances {
        let d = random_discrete(&mut rng, 10, 1.5);
        let n = rng.random_range(1..=3);
        let proj = project_w1(&d, n).expect("projection");
        let w_proj = wasserstein_p(&d, &proj.to_discrete().expect("discrete"), 1.0).expect("w1");
        let brute = brute_force_w1_min(&d, n, step).expect("grid search");
        // excess over the grid optimum, in units of the allowed slack
        worst = worst.max(w_proj - brute.w1);
        worst_gap = worst_gap.max(brute.w1 - w_proj);
    }
    let detail = format!("[largest grid-optimum excess over the projection {worst_gap:.2e}]");
    finish("projection optimality", started, worst, step, instances, detail)
}

/// Quantile TD on the 3-state chain against the projected exact return
/// distribution.
pub fn check_tabular(updates: usize, seed: u64) -> CheckResult {
    let started = Instant::now();
    let mdp = chain_mdp(3, 0.5, 0.5).expect("chain");
    let pi = TabularPolicy::uniform(&mdp);
    let n = 4;
    let cfg = TabularTdConfig {
        n_atoms: n,
        kappa: 0.0,
        learning_rate: LearningRate::InverseDecay {
            initial: 0.05,
            half_life: 20_000.0,
        },
        updates,
        ..Default::default()
    };
    let learned = tabular_quantile_td(&mdp, &pi, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).expect("td");
    let mut worst = 0.0f64;
    for s in (0..mdp.n_states()).filter(|&s| !mdp.is_terminal(s)) {
        let exact = enumerate_return_distribution(&mdp, &pi, s, 10).expect("enumeration").distribution;
        let target = project_w1(&exact, n).expect("projection");
        for (a, b) in learned[s].values().iter().zip(target.values()) {
            worst = worst.max((a - b).abs());
        }
    }
    finish("tabular convergence", started, worst, 0.05, 1, format!("[{updates} updates]"))
}

/// Measured per-iteration contraction of the projected Bellman operator in
/// the maximal W∞ distance, minus the discount.
pub fn check_contraction(instances: usize, seed: u64) -> CheckResult {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut ratios = 0;
    for _ in 0..instances {
        let gamma = rng.random_range(0.5..0.95);
        let mdp = TabularMdp::random(rng.random_range(2..=5), rng.random_range(1..=3), gamma, &mut rng).expect("mdp");
        let pi = TabularPolicy::random(&mdp, &mut rng);
        let n = rng.random_range(2..=8);
        let d = bellman_iterate_distances(&mdp, &pi, n, 40, 1e-10).expect("iteration");
        for w in d.windows(2) {
            if w[0] > 1e-8 {
                worst = worst.max(w[1] / w[0] - gamma);
                ratios += 1;
            }
        }
    }
    finish(
        "contraction",
        started,
        worst,
        0.01,
        instances,
        format!("[modulus minus discount over {ratios} iterations]"),
    )
}

/// Random smooth increasing quantile function on [0, 1].
fn random_quantile_fn(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
    let a = rng.random_range(0.1..3.0);
    let b = rng.random_range(0.0..2.0);
    let c = rng.random_range(0.0..1.0);
    let d = rng.random_range(0.5..3.0);
    let e = rng.random_range(0.0..2.0);
    let k = rng.random_range(2.0..12.0);
    let m = rng.random_range(0.2..0.8);
    move |t: f64| a * t + b * t.powi(3) + c * (d * t).exp() + e / (1.0 + (-k * (t - m)).exp())
}

/// Closed-form fraction gradient against differences of the integrated
/// staircase W1, and monotone W1 decrease under repeated proposer updates.
pub fn check_fraction_gradient(functions: usize, seed: u64) -> CheckResult {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut decrease_failures = Vec::new();
    for f_idx in 0..functions {
        let q = random_quantile_fn(&mut rng);
        for _ in 0..3 {
            let fr = sample_fractions(rng.random_range(2..=10), &mut rng).expect("fractions");
            let analytic = w1_fraction_gradient(&q, &fr);
            let fd = quadrature::staircase_w1_gradient_fd(&q, fr.boundaries(), 1e-5);
            for (a, f) in analytic.iter().zip(&fd) {
                worst = worst.max((a - f).abs() / f.abs().max(1.0));
            }
        }
        let features = Array2::from_shape_fn((1, 3), |_| rng.random_range(-1.0..1.0));
        let mut fpn = FractionProposer::new(3, 6, 1e-3, &mut rng).expect("proposer");
        let w1 = |fpn: &FractionProposer| {
            quadrature::staircase_w1(&q, fpn.propose(features.view()).expect("propose")[0].boundaries())
        };
        let mut last = w1(&fpn);
        for step in 0..100 {
            fpn.update(features.view(), |taus, k| {
                Ok(Array2::from_shape_vec((taus.len() / k, k), taus.iter().map(|&t| q(t)).collect()).expect("shape"))
            })
            .expect("update");
            let w = w1(&fpn);
            if w >= last {
                decrease_failures.push(format!("function {f_idx} step {step}"));
                break;
            }
            last = w;
        }
    }
    let mut r = finish(
        "fraction gradient",
        started,
        worst,
        1e-5,
        functions,
        format!("[{} functions without strict W1 decrease]", decrease_failures.len()),
    );
    if !decrease_failures.is_empty() {
        r.passed = false;
        r.detail = format!("[W1 did not decrease: {}]", decrease_failures.join(", "));
    }
    r
}

fn dense(net: &Mlp, input: &[f64]) -> Vec<f64> {
    let mut x = input.to_vec();
    for (i, act) in net.activations().iter().enumerate() {
        let (w, b) = net.layer(i);
        x = (0..w.nrows())
            .map(|r| {
                let z = b[r] + (0..w.ncols()).map(|k| w[[r, k]] * x[k]).sum::<f64>();
                match act {
                    Activation::Identity => z,
                    Activation::Relu => z.max(0.0),
                    Activation::Tanh => z.tanh(),
                }
            })
            .collect();
    }
    x
}

/// Scalar critic value computed with explicit loops, independent of the
/// batched forward pass. Only meaningful for single-atom fixed critics.
pub fn scalar_reference_q(critic: &DistCritic, state: &[f64], action: &[f64]) -> f64 {
    let input: Vec<f64> = state.iter().chain(action).copied().collect();
    dense(critic.head(), &dense(critic.trunk(), &input))[0]
}

/// Mean over the batch of `½·huber(y − Q(s, a))` with the clipped double-Q,
/// entropy-adjusted target, one value per online critic.
pub fn scalar_reference_losses(agent: &Agent, batch: &Batch) -> Vec<f64> {
    let cfg = agent.config();
    let (next, logp) = agent
        .next_actions(batch.next_states.view(), &mut agent.action_stream())
        .expect("next actions");
    let alpha = if cfg.algorithm == Algorithm::Sac { cfg.alpha } else { 0.0 };
    let targets: Vec<f64> = (0..batch.len())
        .map(|b| {
            let s2 = batch.next_states.row(b).to_vec();
            let a2 = next.row(b).to_vec();
            let q = agent
                .critic_targets()
                .iter()
                .map(|t| scalar_reference_q(t, &s2, &a2))
                .fold(f64::INFINITY, f64::min);
            batch.rewards[b] + (1.0 - batch.dones[b]) * cfg.gamma * (q - alpha * logp[b])
        })
        .collect();
    agent
        .critics()
        .iter()
        .map(|c| {
            let total: f64 = (0..batch.len())
                .map(|b| {
                    let q = scalar_reference_q(c, &batch.states.row(b).to_vec(), &batch.actions.row(b).to_vec());
                    0.5 * huber(targets[b] - q, cfg.critic.kappa)
                })
                .sum();
            total / batch.len() as f64
        })
        .collect()
}

/// Single fixed atom: distributional TD3 and SAC critic losses equal the
/// scalar-critic reference.
pub fn check_degeneracy(batches: usize, seed: u64) -> CheckResult {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for k in 0..batches {
        for alg in [Algorithm::Td3, Algorithm::Sac] {
            let mut cfg = AgentConfig::defaults(alg, Strategy::Fixed, 1);
            cfg.critic.hidden = vec![32, 32];
            cfg.actor_hidden = vec![32, 32];
            cfg.batch_size = 32;
            cfg.buffer_capacity = 64;
            let env = if k % 2 == 0 { EnvName::Pendulum } else { EnvName::Pointmass };
            let spec = env.make().spec().clone();
            let mut agent = Agent::new(cfg, spec.clone(), rng.random()).expect("agent");
            let b = 32;
            let batch = Batch {
                states: uniform(&mut rng, b, spec.observation_dim, 2.0),
                actions: uniform(&mut rng, b, spec.action_dim, 1.0),
                rewards: (0..b).map(|_| rng.random_range(-5.0..5.0)).collect(),
                next_states: uniform(&mut rng, b, spec.observation_dim, 2.0),
                dones: (0..b).map(|_| if rng.random_bool(0.1) { 1.0 } else { 0.0 }).collect(),
            };
            // move off the initialization so targets and online critics differ
            if k % 4 == 3 {
                agent.update_on(&batch).expect("update");
                agent.update_on(&batch).expect("update");
            }
            let reference = scalar_reference_losses(&agent, &batch);
            let losses = agent.critic_losses(&batch).expect("losses");
            for (l, r) in losses.iter().zip(&reference) {
                worst = worst.max((l - r).abs());
            }
        }
    }
    finish("degeneracy equivalence", started, worst, 1e-10, batches, "[td3 and sac]".into())
}

/// A small configuration that trains quickly, for reproducibility checks.
pub fn smoke_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::new(Algorithm::Sac, Strategy::Learned, 5, EnvName::Pendulum);
    cfg.steps = 600;
    cfg.eval_interval = 200;
    cfg.eval_episodes = 2;
    cfg.seed = seed;
    cfg.overrides = AgentOverrides {
        critic_hidden: Some(vec![16, 16]),
        actor_hidden: Some(vec![16, 16]),
        n_cos: Some(8),
        batch_size: Some(16),
        learning_starts: Some(200),
        buffer_capacity: Some(1000),
        ..Default::default()
    };
    cfg
}

/// Runs each config twice under `work` and compares the metrics CSVs with
/// the wall-clock column removed.
pub fn check_determinism(configs: &[RunConfig], work: &Path) -> HarnessResult<CheckResult> {
    let started = Instant::now();
    let mut mismatches = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        let mut texts = Vec::new();
        for rep in 0..2 {
            let path = run_experiment(cfg, &work.join(format!("run{i}-{rep}")))?;
            texts.push(strip_wall_clock(&std::fs::read_to_string(path)?));
        }
        if texts[0] != texts[1] {
            mismatches.push(cfg.label());
        }
    }
    let detail = if mismatches.is_empty() {
        "[identical metrics]".to_string()
    } else {
        format!("[differs: {}]", mismatches.join(", "))
    };
    Ok(finish("determinism", started, mismatches.len() as f64, 0.0, configs.len(), detail))
}

/// Instance counts of the full suite, or reduced ones for `--fast`.
#[derive(Debug, Clone, Copy)]
pub struct SuiteSize {
    pub gradient_instances: usize,
    pub projection_instances: usize,
    pub tabular_updates: usize,
    pub contraction_instances: usize,
    pub fraction_functions: usize,
    pub degeneracy_batches: usize,
}

impl SuiteSize {
    pub const FULL: SuiteSize = SuiteSize {
        gradient_instances: 100,
        projection_instances: 50,
        tabular_updates: 200_000,
        contraction_instances: 20,
        fraction_functions: 20,
        degeneracy_batches: 100,
    };
    pub const FAST: SuiteSize = SuiteSize {
        gradient_instances: 10,
        projection_instances: 5,
        tabular_updates: 200_000,
        contraction_instances: 5,
        fraction_functions: 5,
        degeneracy_batches: 10,
    };
}

pub fn run_suite(size: SuiteSize, work: &Path, mut on_check: impl FnMut(&CheckResult)) -> HarnessResult<VerifyReport> {
    let mut checks = Vec::new();
    let mut push = |c: CheckResult| {
        on_check(&c);
        checks.push(c);
    };
    push(check_gradients(size.gradient_instances, 1));
    push(check_projection(size.projection_instances, 0.01, 2));
    push(check_tabular(size.tabular_updates, 3));
    push(check_contraction(size.contraction_instances, 4));
    push(check_fraction_gradient(size.fraction_functions, 5));
    push(check_degeneracy(size.degeneracy_batches, 6));
    push(check_determinism(&[smoke_config(7)], work)?);
    Ok(VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
