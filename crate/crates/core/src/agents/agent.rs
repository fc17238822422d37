use std::fs;
use std::path::Path;

use ndarray::{s, Array2, ArrayView2, Zip};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Actor, ActorKind, AgentConfig, Algorithm, Batch, ReplayBuffer, Transition, NUM_CRITICS};
use crate::critics::{DistCritic, Strategy};
use crate::distcore::{sample_fractions, FractionSet};
use crate::envs::{EnvSpec, Environment};
use crate::error::invalid;
use crate::nn::io::{load_mlp, read_blob, save_mlp, write_blob};
use crate::nn::OptimizerState;
use crate::rng::{stream, Stream};
use crate::{Error, Result};

/// Losses of one gradient update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    /// Mean over the twin critics.
    pub critic_loss: f64,
    /// Present on steps where the actor was updated.
    pub actor_loss: Option<f64>,
    /// Mean over the twin critics; learned strategy only.
    pub fpn_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub reward: f64,
    /// Return and length of an episode that ended on this step.
    pub episode_end: Option<(f64, usize)>,
    pub update: Option<UpdateStats>,
}

#[derive(Debug, Clone)]
struct Episode {
    observation: Vec<f64>,
    ret: f64,
    len: usize,
}

/// `r + (1 − done)·γ·(min(q₁, q₂) − α·log π)`, element-wise per sample.
/// `q1` and `q2` are `batch × n` values at shared fractions.
pub fn combine_targets(
    rewards: &[f64],
    dones: &[f64],
    gamma: f64,
    alpha: f64,
    q1: ArrayView2<f64>,
    q2: ArrayView2<f64>,
    log_probs: &[f64],
) -> Result<Array2<f64>> {
    let batch = rewards.len();
    if q1.dim() != q2.dim() {
        return Err(Error::Internal(format!(
            "twin critics disagree on fraction count: {:?} vs {:?}",
            q1.dim(),
            q2.dim()
        )));
    }
    if q1.nrows() != batch || dones.len() != batch || log_probs.len() != batch {
        return Err(invalid!("target inputs disagree on batch size"));
    }
    let mut out = Array2::zeros(q1.raw_dim());
    for b in 0..batch {
        let cont = (1.0 - dones[b]) * gamma;
        for i in 0..q1.ncols() {
            out[[b, i]] = rewards[b] + cont * (q1[[b, i]].min(q2[[b, i]]) - alpha * log_probs[b]);
        }
    }
    Ok(out)
}

/// Distributional TD3 or SAC with twin critics, target networks and replay.
///
/// Randomness comes from separate streams of the master seed: network
/// initialization, environment resets, action noise, fraction sampling and
/// replay sampling each draw from their own generator.
#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    spec: EnvSpec,
    actor: Actor,
    actor_target: Option<Actor>,
    critics: Vec<DistCritic>,
    critic_targets: Vec<DistCritic>,
    buffer: ReplayBuffer,
    env_steps: u64,
    critic_updates: u64,
    episode: Option<Episode>,
    env_rng: ChaCha8Rng,
    action_rng: ChaCha8Rng,
    fraction_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(config: AgentConfig, spec: EnvSpec, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init = stream(seed, Stream::Init);
        let kind = match config.algorithm {
            Algorithm::Td3 => ActorKind::Deterministic,
            Algorithm::Sac => ActorKind::Gaussian,
        };
        let (sd, ad) = (spec.observation_dim, spec.action_dim);
        let actor = Actor::new(
            kind,
            sd,
            ad,
            &config.actor_hidden,
            config.actor_activation,
            config.learning_rate,
            &mut init,
        )?;
        let critics = (0..NUM_CRITICS)
            .map(|_| {
                DistCritic::new(
                    config.critic.clone(),
                    sd,
                    ad,
                    config.learning_rate,
                    config.fpn_learning_rate,
                    &mut init,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let actor_target = (config.algorithm == Algorithm::Td3).then(|| actor.clone());
        Ok(Self {
            buffer: ReplayBuffer::new(config.buffer_capacity, sd, ad)?,
            critic_targets: critics.clone(),
            critics,
            actor,
            actor_target,
            config,
            spec,
            env_steps: 0,
            critic_updates: 0,
            episode: None,
            env_rng: stream(seed, Stream::Env),
            action_rng: stream(seed, Stream::Action),
            fraction_rng: stream(seed, Stream::Fractions),
            replay_rng: stream(seed, Stream::Replay),
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn actor(&self) -> &Actor {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Actor {
        &mut self.actor
    }

    pub fn actor_target(&self) -> Option<&Actor> {
        self.actor_target.as_ref()
    }

    pub fn critics(&self) -> &[DistCritic] {
        &self.critics
    }

    pub fn critics_mut(&mut self) -> &mut [DistCritic] {
        &mut self.critics
    }

    pub fn critic_targets(&self) -> &[DistCritic] {
        &self.critic_targets
    }

    pub fn critic_targets_mut(&mut self) -> &mut [DistCritic] {
        &mut self.critic_targets
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn critic_updates(&self) -> u64 {
        self.critic_updates
    }

    /// Current state of the action-noise stream; the next target build
    /// draws its next actions from exactly this generator.
    pub fn action_stream(&self) -> ChaCha8Rng {
        self.action_rng.clone()
    }

    /// Normalized action for data collection: uniform during warm-up, then
    /// the policy with exploration noise (TD3) or a policy sample (SAC).
    pub fn explore(&mut self, observation: &[f64]) -> Result<Vec<f64>> {
        let d = self.spec.action_dim;
        if (self.env_steps as usize) < self.config.learning_starts {
            return Ok((0..d).map(|_| self.action_rng.random_range(-1.0..=1.0)).collect());
        }
        let s = ArrayView2::from_shape((1, observation.len()), observation).map_err(|e| invalid!("{e}"))?;
        match self.config.algorithm {
            Algorithm::Td3 => {
                let noise = Normal::new(0.0, self.config.exploration_noise).map_err(|e| invalid!("{e}"))?;
                let a = self.actor.deterministic(s)?;
                Ok(a.iter().map(|&x| (x + noise.sample(&mut self.action_rng)).clamp(-1.0, 1.0)).collect())
            }
            Algorithm::Sac => Ok(self.actor.sample(s, &mut self.action_rng)?.0.into_raw_vec_and_offset().0),
        }
    }

    /// Collects one environment step, stores it, and runs one update once
    /// the warm-up threshold and a full batch are reached.
    pub fn train_step(&mut self, env: &mut dyn Environment) -> Result<StepReport> {
        if env.spec() != &self.spec {
            return Err(invalid!("environment does not match the agent's spec"));
        }
        let mut episode = match self.episode.take() {
            Some(e) => e,
            None => Episode {
                observation: env.reset(&mut self.env_rng),
                ret: 0.0,
                len: 0,
            },
        };
        let action = self.explore(&episode.observation)?;
        let step = env.step(&self.spec.scale_action(&action));
        self.buffer.push(&Transition {
            state: std::mem::take(&mut episode.observation),
            action,
            reward: step.reward,
            next_state: step.observation.clone(),
            done: step.terminated,
        })?;
        self.env_steps += 1;
        episode.ret += step.reward;
        episode.len += 1;
        let episode_end = if step.terminated || step.truncated {
            Some((episode.ret, episode.len))
        } else {
            episode.observation = step.observation;
            self.episode = Some(episode);
            None
        };
        let update = if self.env_steps as usize >= self.config.learning_starts
            && self.buffer.len() >= self.config.batch_size
        {
            Some(self.update()?)
        } else {
            None
        };
        Ok(StepReport {
            reward: step.reward,
            episode_end,
            update,
        })
    }

    /// One gradient update from a replay minibatch.
    pub fn update(&mut self) -> Result<UpdateStats> {
        let batch = self.buffer.sample(self.config.batch_size, &mut self.replay_rng)?;
        self.update_on(&batch)
    }

    /// One gradient update on a given batch: both critics against shared
    /// targets, the fraction proposers, and on schedule the actor and the
    /// target networks.
    pub fn update_on(&mut self, batch: &Batch) -> Result<UpdateStats> {
        let targets = self.build_target_distribution(batch)?;
        let learned = self.config.critic.strategy == Strategy::Learned;
        let mut critic_loss = 0.0;
        let mut fpn_loss = 0.0;
        for critic in &mut self.critics {
            let (loss, grads) =
                critic.critic_td_loss(batch.states.view(), batch.actions.view(), targets.view(), &mut self.fraction_rng)?;
            check_finite("critic loss", loss)?;
            if learned {
                let l = critic.fpn_update(batch.states.view(), batch.actions.view())?;
                check_finite("fraction loss", l)?;
                fpn_loss += l;
            }
            critic.apply_gradients(&grads)?;
            critic_loss += loss;
        }
        self.critic_updates += 1;
        let n = NUM_CRITICS as f64;
        let mut stats = UpdateStats {
            critic_loss: critic_loss / n,
            actor_loss: None,
            fpn_loss: learned.then_some(fpn_loss / n),
        };
        let delay = match self.config.algorithm {
            Algorithm::Td3 => self.config.policy_delay as u64,
            Algorithm::Sac => 1,
        };
        if self.critic_updates % delay == 0 {
            let (loss, grads) = self.actor_objective(batch.states.view())?;
            check_finite("actor loss", loss)?;
            self.actor.apply_gradients(&grads)?;
            stats.actor_loss = Some(loss);
            let tau = self.config.polyak;
            for (t, c) in self.critic_targets.iter_mut().zip(&self.critics) {
                t.polyak_from(c, tau)?;
            }
            if let Some(t) = &mut self.actor_target {
                t.polyak_from(&self.actor, tau)?;
            }
        }
        Ok(stats)
    }

    /// Next actions for the targets and their log-densities (zero for TD3).
    /// TD3 uses the target actor with clipped smoothing noise; SAC samples
    /// the online policy.
    pub fn next_actions<R: Rng + ?Sized>(&self, next_states: ArrayView2<f64>, rng: &mut R) -> Result<(Array2<f64>, Vec<f64>)> {
        match self.config.algorithm {
            Algorithm::Td3 => {
                let target = self.actor_target.as_ref().expect("TD3 keeps a target actor");
                let mut a = target.deterministic(next_states)?;
                let noise = Normal::new(0.0, self.config.target_noise).map_err(|e| invalid!("{e}"))?;
                let c = self.config.target_noise_clip;
                a.mapv_inplace(|x| (x + noise.sample(rng).clamp(-c, c)).clamp(-1.0, 1.0));
                Ok((a, vec![0.0; next_states.nrows()]))
            }
            Algorithm::Sac => self.actor.sample(next_states, rng),
        }
    }

    /// Target quantile values given the next actions: both target critics
    /// are evaluated at one shared fraction set per sample (fixed, freshly
    /// sampled, or proposed by the first target critic).
    pub fn target_values<R: Rng + ?Sized>(
        &self,
        batch: &Batch,
        next_actions: ArrayView2<f64>,
        log_probs: &[f64],
        rng: &mut R,
    ) -> Result<Array2<f64>> {
        let n = self.config.critic.n_atoms;
        let s2 = batch.next_states.view();
        let fractions: Option<Vec<FractionSet>> = match self.config.critic.strategy {
            Strategy::Fixed => None,
            Strategy::Sampled => Some((0..batch.len()).map(|_| sample_fractions(n, rng)).collect::<Result<_>>()?),
            Strategy::Learned => Some(self.critic_targets[0].propose_fractions(s2, next_actions)?),
        };
        let q1 = self.critic_targets[0].predict_batch(s2, next_actions, fractions.as_deref(), rng)?;
        let q2 = self.critic_targets[1].predict_batch(s2, next_actions, fractions.as_deref(), rng)?;
        let alpha = match self.config.algorithm {
            Algorithm::Td3 => 0.0,
            Algorithm::Sac => self.config.alpha,
        };
        combine_targets(
            &batch.rewards,
            &batch.dones,
            self.config.gamma,
            alpha,
            q1.values.view(),
            q2.values.view(),
            log_probs,
        )
    }

    /// Per-sample target quantile values, drawing next actions from the
    /// action stream and fractions from the fraction stream.
    pub fn build_target_distribution(&mut self, batch: &Batch) -> Result<Array2<f64>> {
        let mut rng = self.action_rng.clone();
        let (a2, logp) = self.next_actions(batch.next_states.view(), &mut rng)?;
        self.action_rng = rng;
        let mut frac = self.fraction_rng.clone();
        let targets = self.target_values(batch, a2.view(), &logp, &mut frac)?;
        self.fraction_rng = frac;
        Ok(targets)
    }

    /// TD loss of each online critic on `batch` against freshly built
    /// targets, without updating anything but the random streams.
    pub fn critic_losses(&mut self, batch: &Batch) -> Result<Vec<f64>> {
        let targets = self.build_target_distribution(batch)?;
        let mut out = Vec::with_capacity(NUM_CRITICS);
        for critic in &mut self.critics {
            let (loss, _) =
                critic.critic_td_loss(batch.states.view(), batch.actions.view(), targets.view(), &mut self.fraction_rng)?;
            out.push(loss);
        }
        Ok(out)
    }

    /// Actor loss and gradient. TD3 maximizes the first critic's mean; SAC
    /// maximizes the smaller of the two critic means minus `α·log π`.
    /// Critic parameters are left untouched.
    pub fn actor_objective(&mut self, states: ArrayView2<f64>) -> Result<(f64, Vec<f64>)> {
        let Self {
            config,
            actor,
            critics,
            action_rng,
            fraction_rng,
            ..
        } = self;
        let sd = states.ncols();
        let (alpha, used) = match config.algorithm {
            Algorithm::Td3 => (0.0, 1),
            Algorithm::Sac => (config.alpha, NUM_CRITICS),
        };
        actor.objective_grad(states, alpha, action_rng, |actions| {
            let batch = actions.nrows();
            let mut preds = Vec::with_capacity(used);
            for critic in critics[..used].iter_mut() {
                preds.push(critic.forward_batch(states, actions, None, fraction_rng)?);
            }
            let means: Vec<Vec<f64>> = preds.iter().map(|p| p.means()).collect();
            // per sample, the critic whose mean is smallest
            let pick: Vec<usize> = (0..batch)
                .map(|b| (1..used).fold(0, |best, k| if means[k][b] < means[best][b] { k } else { best }))
                .collect();
            let q: Vec<f64> = (0..batch).map(|b| means[pick[b]][b]).collect();
            let mut dq = Array2::zeros((batch, actions.ncols()));
            for (k, (critic, pred)) in critics[..used].iter_mut().zip(&preds).enumerate() {
                let mut d_values = Array2::zeros(pred.values.raw_dim());
                for b in (0..batch).filter(|&b| pick[b] == k) {
                    for (d, w) in d_values.row_mut(b).iter_mut().zip(pred.fractions[b].widths()) {
                        *d = w;
                    }
                }
                let d_in = critic.backward(d_values.view(), None)?;
                Zip::from(&mut dq).and(&d_in.slice(s![.., sd..])).for_each(|g, &x| *g += x);
            }
            Ok((q, dq))
        })
    }

    /// Writes weights, optimizer states and `agent.json` into `dir`.
    pub fn save_checkpoint(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        save_mlp(self.actor.net(), dir, "actor")?;
        save_optimizer(self.actor.optimizer(), dir, "actor_optim")?;
        if let Some(t) = &self.actor_target {
            save_mlp(t.net(), dir, "actor_target")?;
        }
        for (k, (c, t)) in self.critics.iter().zip(&self.critic_targets).enumerate() {
            c.save(dir, &format!("critic_{k}"))?;
            c.save_optimizers(dir, &format!("critic_{k}_optim"))?;
            t.save(dir, &format!("critic_target_{k}"))?;
        }
        let manifest = AgentCheckpoint {
            config: self.config.clone(),
            spec: self.spec.clone(),
            env_steps: self.env_steps,
            critic_updates: self.critic_updates,
        };
        fs::write(dir.join("agent.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    /// Restores networks and optimizer states saved by
    /// [`Agent::save_checkpoint`]. Replay contents and random streams are
    /// not part of a checkpoint; they restart from `seed`.
    pub fn load_checkpoint(dir: impl AsRef<Path>, seed: u64) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: AgentCheckpoint = serde_json::from_str(&fs::read_to_string(dir.join("agent.json"))?)?;
        let mut agent = Agent::new(manifest.config, manifest.spec, seed)?;
        let lr = agent.config.learning_rate;
        let fpn_lr = agent.config.fpn_learning_rate;
        agent.actor = Actor::from_net(agent.actor.kind(), agent.spec.action_dim, load_mlp(dir, "actor")?, lr)?;
        load_optimizer(agent.actor.optimizer_mut(), dir, "actor_optim")?;
        if agent.actor_target.is_some() {
            agent.actor_target = Some(Actor::from_net(
                ActorKind::Deterministic,
                agent.spec.action_dim,
                load_mlp(dir, "actor_target")?,
                lr,
            )?);
        }
        for k in 0..NUM_CRITICS {
            let mut c = DistCritic::load(dir, &format!("critic_{k}"), lr, fpn_lr)?;
            c.load_optimizers(dir, &format!("critic_{k}_optim"))?;
            agent.critics[k] = c;
            agent.critic_targets[k] = DistCritic::load(dir, &format!("critic_target_{k}"), lr, fpn_lr)?;
        }
        agent.env_steps = manifest.env_steps;
        agent.critic_updates = manifest.critic_updates;
        Ok(agent)
    }
}

/// JSON side of an agent checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub config: AgentConfig,
    pub spec: EnvSpec,
    pub env_steps: u64,
    pub critic_updates: u64,
}

fn save_optimizer(o: &OptimizerState, dir: &Path, stem: &str) -> Result<()> {
    write_blob(dir.join(format!("{stem}.bin")), &o.moments())?;
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(o)?)?;
    Ok(())
}

fn load_optimizer(o: &mut OptimizerState, dir: &Path, stem: &str) -> Result<()> {
    let saved: OptimizerState = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    let mut restored = OptimizerState::new(saved.kind, saved.lr, o.num_params());
    restored.step = saved.step;
    restored.restore_moments(&read_blob(dir.join(format!("{stem}.bin")))?)?;
    *o = restored;
    Ok(())
}

fn check_finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged(format!("{what} is {v}")))
    }
}

/// Runs `policy` (observation → normalized action) for `episodes` episodes
/// and returns the mean and the per-episode undiscounted returns.
pub fn evaluate_policy(
    env: &mut dyn Environment,
    episodes: usize,
    rng: &mut dyn RngCore,
    mut policy: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<(f64, Vec<f64>)> {
    if episodes == 0 {
        return Err(invalid!("at least one evaluation episode is required"));
    }
    let spec = env.spec().clone();
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset(rng);
        let mut ret = 0.0;
        loop {
            let action = policy(&obs)?;
            let step = env.step(&spec.scale_action(&action));
            ret += step.reward;
            if step.terminated || step.truncated {
                break;
            }
            obs = step.observation;
        }
        returns.push(ret);
    }
    let mean = returns.iter().sum::<f64>() / episodes as f64;
    Ok((mean, returns))
}

/// Noise-free evaluation of `actor`.
pub fn evaluate(actor: &Actor, env: &mut dyn Environment, episodes: usize, rng: &mut dyn RngCore) -> Result<(f64, Vec<f64>)> {
    evaluate_policy(env, episodes, rng, |obs| actor.act(obs))
}

/// Returns of a policy drawing uniform normalized actions.
pub fn random_policy_returns(env: &mut dyn Environment, episodes: usize, rng: &mut ChaCha8Rng) -> Result<(f64, Vec<f64>)> {
    let d = env.spec().action_dim;
    let mut action_rng = ChaCha8Rng::seed_from_u64(rng.random());
    evaluate_policy(env, episodes, rng, |_| Ok((0..d).map(|_| action_rng.random_range(-1.0..=1.0)).collect()))
}
