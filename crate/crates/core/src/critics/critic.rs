use std::fs;
use std::path::Path;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CriticConfig, FractionProposer, LossKind, Strategy};
use crate::distcore::{fixed_fractions, pairwise_loss_into, sample_fractions, FractionSet, QuantileDistribution};
use crate::error::invalid;
use crate::nn::io::{read_blob, write_blob, MlpManifest};
use crate::nn::{Activation, CosineEmbedding, Mlp, OptimizerState};
use crate::{Error, Result};

/// Quantile values for a batch: one fraction set and one row of values per
/// sample.
#[derive(Debug, Clone)]
pub struct BatchQuantiles {
    pub fractions: Vec<FractionSet>,
    /// `batch × n_atoms`.
    pub values: Array2<f64>,
}

impl BatchQuantiles {
    pub fn len(&self) -> usize {
        self.fractions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fractions.is_empty()
    }

    pub fn distribution(&self, i: usize) -> Result<QuantileDistribution> {
        QuantileDistribution::new(self.fractions[i].clone(), self.values.row(i).to_vec())
    }

    /// Fraction-weighted means, one per sample.
    pub fn means(&self) -> Vec<f64> {
        self.fractions
            .iter()
            .zip(self.values.rows())
            .map(|(f, v)| f.widths().zip(v).map(|(w, v)| w * v).sum())
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Cache {
    trunk_out: Array2<f64>,
    /// Embedding output and fractions per sample, for the embedded strategies.
    embedded: Option<(Array2<f64>, usize)>,
}

/// Distributional critic `(s, a) ↦ Z(s, a)`.
///
/// Value parameters (trunk, head, embedding) are trained by Adam from
/// [`DistCritic::critic_td_loss`]; the fraction proposer, if any, by its own
/// RMSprop through [`DistCritic::fpn_update`]. Gradients use one flat
/// buffer laid out as `[trunk | head | embedding]`.
#[derive(Debug, Clone)]
pub struct DistCritic {
    config: CriticConfig,
    state_dim: usize,
    action_dim: usize,
    trunk: Mlp,
    head: Mlp,
    embedding: Option<CosineEmbedding>,
    fpn: Option<FractionProposer>,
    optimizers: Vec<OptimizerState>,
    cache: Option<Cache>,
}

fn net_shapes(config: &CriticConfig, input_dim: usize) -> (Vec<usize>, Vec<Activation>, Vec<usize>, Vec<Activation>) {
    let act = config.activation;
    let width = config.hidden[0];
    let out = match config.strategy {
        Strategy::Fixed => config.n_atoms,
        Strategy::Sampled | Strategy::Learned => 1,
    };
    let mut head_sizes = config.hidden.clone();
    head_sizes.push(out);
    let mut head_acts = vec![act; config.hidden.len() - 1];
    head_acts.push(Activation::Identity);
    (vec![input_dim, width], vec![act], head_sizes, head_acts)
}

/// Row `b·k + j` of the result is `features[b] ⊙ embedded[b·k + j]`.
fn combine(features: ArrayView2<f64>, embedded: ArrayView2<f64>, k: usize) -> Array2<f64> {
    let mut out = embedded.to_owned();
    for (b, f) in features.rows().into_iter().enumerate() {
        let mut block = out.slice_mut(s![b * k..(b + 1) * k, ..]);
        block *= &f;
    }
    out
}

fn head_at(head: &Mlp, embedding: &CosineEmbedding, features: ArrayView2<f64>, taus: &[f64], k: usize) -> Result<Array2<f64>> {
    let batch = features.nrows();
    if taus.len() != batch * k {
        return Err(invalid!("{} fractions for {batch} samples of {k}", taus.len()));
    }
    let emb = embedding.infer(taus)?;
    let out = head.infer(combine(features, emb.view(), k).view())?;
    Ok(out.into_shape_with_order((batch, k)).unwrap())
}

impl DistCritic {
    /// `lr` drives the value networks; `fpn_lr` is only used by `Learned`.
    pub fn new<R: Rng + ?Sized>(
        config: CriticConfig,
        state_dim: usize,
        action_dim: usize,
        lr: f64,
        fpn_lr: f64,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if state_dim == 0 || action_dim == 0 {
            return Err(invalid!("state and action dimensions must be positive"));
        }
        let (ts, ta, hs, ha) = net_shapes(&config, state_dim + action_dim);
        let trunk = Mlp::new(&ts, &ta, rng)?;
        let head = Mlp::new(&hs, &ha, rng)?;
        let embedding = match config.strategy {
            Strategy::Fixed => None,
            _ => Some(CosineEmbedding::new(config.n_cos, config.hidden[0], rng)?),
        };
        let fpn = match config.strategy {
            Strategy::Learned => Some(FractionProposer::new(config.hidden[0], config.n_atoms, fpn_lr, rng)?),
            _ => None,
        };
        Self::assemble(config, state_dim, action_dim, trunk, head, embedding, fpn, lr)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        config: CriticConfig,
        state_dim: usize,
        action_dim: usize,
        trunk: Mlp,
        head: Mlp,
        embedding: Option<CosineEmbedding>,
        fpn: Option<FractionProposer>,
        lr: f64,
    ) -> Result<Self> {
        if !(lr >= 0.0) {
            return Err(invalid!("learning rate must be non-negative, got {lr}"));
        }
        let mut optimizers = vec![
            OptimizerState::adam(lr, trunk.num_params()),
            OptimizerState::adam(lr, head.num_params()),
        ];
        if let Some(e) = &embedding {
            optimizers.push(OptimizerState::adam(lr, e.linear().num_params()));
        }
        Ok(Self {
            config,
            state_dim,
            action_dim,
            trunk,
            head,
            embedding,
            fpn,
            optimizers,
            cache: None,
        })
    }

    pub fn config(&self) -> &CriticConfig {
        &self.config
    }

    pub fn strategy(&self) -> Strategy {
        self.config.strategy
    }

    pub fn n_atoms(&self) -> usize {
        self.config.n_atoms
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn trunk(&self) -> &Mlp {
        &self.trunk
    }

    pub fn head(&self) -> &Mlp {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut Mlp {
        self.cache = None;
        &mut self.head
    }

    pub fn trunk_mut(&mut self) -> &mut Mlp {
        self.cache = None;
        &mut self.trunk
    }

    pub fn embedding(&self) -> Option<&CosineEmbedding> {
        self.embedding.as_ref()
    }

    pub fn fpn(&self) -> Option<&FractionProposer> {
        self.fpn.as_ref()
    }

    pub fn fpn_mut(&mut self) -> Option<&mut FractionProposer> {
        self.fpn.as_mut()
    }

    pub fn optimizers(&self) -> &[OptimizerState] {
        &self.optimizers
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        for o in &mut self.optimizers {
            o.lr = lr;
        }
    }

    /// Trunk, head and embedding parameters; the layout of every gradient
    /// buffer this critic produces.
    pub fn num_value_params(&self) -> usize {
        self.trunk.num_params() + self.head.num_params() + self.embedding.as_ref().map_or(0, |e| e.linear().num_params())
    }

    pub fn value_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_value_params());
        out.extend_from_slice(self.trunk.params());
        out.extend_from_slice(self.head.params());
        if let Some(e) = &self.embedding {
            out.extend_from_slice(e.linear().params());
        }
        out
    }

    pub fn set_value_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_value_params() {
            return Err(invalid!("expected {} value parameters, got {}", self.num_value_params(), params.len()));
        }
        self.cache = None;
        let (t, rest) = params.split_at(self.trunk.num_params());
        let (h, e) = rest.split_at(self.head.num_params());
        self.trunk.set_params(t)?;
        self.head.set_params(h)?;
        if let Some(emb) = &mut self.embedding {
            emb.linear_mut().set_params(e)?;
        }
        Ok(())
    }

    fn inputs(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<Array2<f64>> {
        if states.ncols() != self.state_dim || actions.ncols() != self.action_dim {
            return Err(invalid!(
                "critic expects state/action widths {}/{}, got {}/{}",
                self.state_dim,
                self.action_dim,
                states.ncols(),
                actions.ncols()
            ));
        }
        if states.nrows() != actions.nrows() {
            return Err(invalid!("{} states but {} actions", states.nrows(), actions.nrows()));
        }
        if states.nrows() == 0 {
            return Err(invalid!("empty batch"));
        }
        Ok(concatenate(Axis(1), &[states, actions]).unwrap())
    }

    fn resolve_fractions<R: Rng + ?Sized>(
        &self,
        features: ArrayView2<f64>,
        given: Option<&[FractionSet]>,
        rng: &mut R,
    ) -> Result<Vec<FractionSet>> {
        let batch = features.nrows();
        let n = self.config.n_atoms;
        if let Some(given) = given {
            if given.len() != batch {
                return Err(invalid!("{} fraction sets for a batch of {batch}", given.len()));
            }
            if let Some(f) = given.iter().find(|f| f.len() != n) {
                return Err(invalid!("fraction set has {} intervals, critic has {n} atoms", f.len()));
            }
            if self.config.strategy == Strategy::Fixed {
                let fixed = fixed_fractions(n)?;
                let differs = given.iter().any(|f| {
                    f.boundaries().iter().zip(fixed.boundaries()).any(|(a, b)| (a - b).abs() > 1e-12)
                });
                if differs {
                    return Err(invalid!("a fixed-fraction critic only evaluates equidistant fractions"));
                }
            }
            return Ok(given.to_vec());
        }
        match self.config.strategy {
            Strategy::Fixed => Ok(vec![fixed_fractions(n)?; batch]),
            Strategy::Sampled => (0..batch).map(|_| sample_fractions(n, rng)).collect(),
            Strategy::Learned => self.fpn.as_ref().expect("learned critic has a proposer").propose(features),
        }
    }

    fn flat_midpoints(fractions: &[FractionSet]) -> Vec<f64> {
        fractions.iter().flat_map(|f| f.midpoints().iter().copied()).collect()
    }

    /// Batched prediction without touching the backward cache. Fractions
    /// are taken from `fractions` when given, otherwise from the strategy.
    pub fn predict_batch<R: Rng + ?Sized>(
        &self,
        states: ArrayView2<f64>,
        actions: ArrayView2<f64>,
        fractions: Option<&[FractionSet]>,
        rng: &mut R,
    ) -> Result<BatchQuantiles> {
        let x = self.inputs(states, actions)?;
        let h = self.trunk.infer(x.view())?;
        let fractions = self.resolve_fractions(h.view(), fractions, rng)?;
        let values = match &self.embedding {
            None => self.head.infer(h.view())?,
            Some(e) => head_at(&self.head, e, h.view(), &Self::flat_midpoints(&fractions), self.config.n_atoms)?,
        };
        Ok(BatchQuantiles { fractions, values })
    }

    pub fn predict<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        action: &[f64],
        fractions: Option<&FractionSet>,
        rng: &mut R,
    ) -> Result<QuantileDistribution> {
        let s = ArrayView2::from_shape((1, state.len()), state).unwrap();
        let a = ArrayView2::from_shape((1, action.len()), action).unwrap();
        let given = fractions.map(std::slice::from_ref);
        self.predict_batch(s, a, given, rng)?.distribution(0)
    }

    /// Caching forward pass; pair with [`DistCritic::backward`].
    pub fn forward_batch<R: Rng + ?Sized>(
        &mut self,
        states: ArrayView2<f64>,
        actions: ArrayView2<f64>,
        fractions: Option<&[FractionSet]>,
        rng: &mut R,
    ) -> Result<BatchQuantiles> {
        self.cache = None;
        let x = self.inputs(states, actions)?;
        let h = self.trunk.forward(x.view())?;
        let fractions = self.resolve_fractions(h.view(), fractions, rng)?;
        let n = self.config.n_atoms;
        let batch = h.nrows();
        let (values, embedded) = match &mut self.embedding {
            None => (self.head.forward(h.view())?, None),
            Some(e) => {
                let emb = e.forward(&Self::flat_midpoints(&fractions))?;
                let out = self.head.forward(combine(h.view(), emb.view(), n).view())?;
                (out.into_shape_with_order((batch, n)).unwrap(), Some((emb, n)))
            }
        };
        self.cache = Some(Cache { trunk_out: h, embedded });
        Ok(BatchQuantiles { fractions, values })
    }

    /// Backpropagates `∂L/∂values` (`batch × n_atoms`) through the cached
    /// forward pass. Parameter gradients are added into `grads` when given.
    /// Returns `∂L/∂[state, action]`.
    pub fn backward(&mut self, d_values: ArrayView2<f64>, mut grads: Option<&mut [f64]>) -> Result<Array2<f64>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("critic backward without a cached forward pass".into()))?;
        let batch = cache.trunk_out.nrows();
        if d_values.dim() != (batch, self.config.n_atoms) {
            return Err(invalid!("value gradient shape {:?}, expected {:?}", d_values.dim(), (batch, self.config.n_atoms)));
        }
        if let Some(g) = grads.as_deref() {
            if g.len() != self.num_value_params() {
                return Err(invalid!("gradient buffer has {} entries, expected {}", g.len(), self.num_value_params()));
            }
        }
        let nt = self.trunk.num_params();
        let nh = self.head.num_params();
        let (g_trunk, g_head, g_emb) = match grads.as_deref_mut() {
            Some(g) => {
                let (t, rest) = g.split_at_mut(nt);
                let (h, e) = rest.split_at_mut(nh);
                (Some(t), Some(h), Some(e))
            }
            None => (None, None, None),
        };
        let d_features = match (cache.embedded, &mut self.embedding) {
            (None, _) => match g_head {
                Some(g) => self.head.backward_accumulate(d_values, g)?,
                None => self.head.backward_input(d_values)?,
            },
            (Some((emb, k)), Some(embedding)) => {
                let flat = Array2::from_shape_vec((batch * k, 1), d_values.iter().copied().collect()).unwrap();
                let d_comb = match g_head {
                    Some(g) => self.head.backward_accumulate(flat.view(), g)?,
                    None => self.head.backward_input(flat.view())?,
                };
                let mut d_h = Array2::zeros(cache.trunk_out.raw_dim());
                for b in 0..batch {
                    let block = d_comb.slice(s![b * k..(b + 1) * k, ..]);
                    let e_block = emb.slice(s![b * k..(b + 1) * k, ..]);
                    d_h.row_mut(b).assign(&(&block * &e_block).sum_axis(Axis(0)));
                }
                if let Some(g) = g_emb {
                    let d_emb = combine(cache.trunk_out.view(), d_comb.view(), k);
                    embedding.backward_accumulate(d_emb.view(), g)?;
                }
                d_h
            }
            (Some(_), None) => return Err(Error::Internal("embedding cache without an embedding".into())),
        };
        match g_trunk {
            Some(g) => self.trunk.backward_accumulate(d_features.view(), g),
            None => self.trunk.backward_input(d_features.view()),
        }
    }

    /// Mean over the batch of the per-sample TD loss against the rows of
    /// `targets`, with the gradient in the value parameters. Targets are
    /// constants; nothing is updated.
    pub fn critic_td_loss<R: Rng + ?Sized>(
        &mut self,
        states: ArrayView2<f64>,
        actions: ArrayView2<f64>,
        targets: ArrayView2<f64>,
        rng: &mut R,
    ) -> Result<(f64, Vec<f64>)> {
        self.critic_td_loss_at(states, actions, targets, None, rng)
    }

    /// [`Self::critic_td_loss`] at given fractions. The gradient never flows
    /// into the fractions, so this is the function it differentiates.
    pub fn critic_td_loss_at<R: Rng + ?Sized>(
        &mut self,
        states: ArrayView2<f64>,
        actions: ArrayView2<f64>,
        targets: ArrayView2<f64>,
        fractions: Option<&[FractionSet]>,
        rng: &mut R,
    ) -> Result<(f64, Vec<f64>)> {
        if states.nrows() == 0 {
            return Err(invalid!("empty batch"));
        }
        if targets.nrows() != states.nrows() || targets.ncols() == 0 {
            return Err(invalid!("{} target rows of width {} for a batch of {}", targets.nrows(), targets.ncols(), states.nrows()));
        }
        let pred = self.forward_batch(states, actions, fractions, rng)?;
        let batch = pred.len();
        let n = self.config.n_atoms;
        let scale = 1.0 / batch as f64;
        let mut d_values = Array2::zeros((batch, n));
        let mut grad_row = vec![0.0; n];
        let mut total = 0.0;
        for b in 0..batch {
            let y = targets.row(b).to_vec();
            let theta = pred.values.row(b).to_vec();
            let loss = match self.config.loss {
                LossKind::Quantile => {
                    pairwise_loss_into(pred.fractions[b].midpoints(), &theta, &y, self.config.kappa, &mut grad_row)
                }
                LossKind::Squared => squared_loss_into(&theta, &y, &mut grad_row),
            };
            total += loss;
            for (d, g) in d_values.row_mut(b).iter_mut().zip(&grad_row) {
                *d = g * scale;
            }
        }
        let mut grads = vec![0.0; self.num_value_params()];
        self.backward(d_values.view(), Some(&mut grads))?;
        Ok((total * scale, grads))
    }

    /// One Adam step on the value parameters.
    pub fn apply_gradients(&mut self, grads: &[f64]) -> Result<()> {
        if grads.len() != self.num_value_params() {
            return Err(invalid!("expected {} gradients, got {}", self.num_value_params(), grads.len()));
        }
        self.cache = None;
        let (t, rest) = grads.split_at(self.trunk.num_params());
        let (h, e) = rest.split_at(self.head.num_params());
        self.optimizers[0].step(self.trunk.params_mut(), t)?;
        self.optimizers[1].step(self.head.params_mut(), h)?;
        if let Some(emb) = &mut self.embedding {
            self.optimizers[2].step(emb.linear_mut().params_mut(), e)?;
        }
        Ok(())
    }

    /// Quantile values at arbitrary fractions: `taus` is `batch × k`.
    /// Only the embedded strategies can do this.
    pub fn quantiles_at(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>, taus: ArrayView2<f64>) -> Result<Array2<f64>> {
        let embedding = self
            .embedding
            .as_ref()
            .ok_or_else(|| invalid!("a fixed-fraction critic cannot evaluate arbitrary fractions"))?;
        let x = self.inputs(states, actions)?;
        if taus.nrows() != x.nrows() {
            return Err(invalid!("{} fraction rows for a batch of {}", taus.nrows(), x.nrows()));
        }
        let h = self.trunk.infer(x.view())?;
        let flat: Vec<f64> = taus.iter().copied().collect();
        head_at(&self.head, embedding, h.view(), &flat, taus.ncols())
    }

    /// Fractions the proposer picks for each `(s, a)`.
    pub fn propose_fractions(&self, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<Vec<FractionSet>> {
        let fpn = self
            .fpn
            .as_ref()
            .ok_or_else(|| Error::State(format!("{} critic has no fraction proposer", self.config.strategy)))?;
        let x = self.inputs(states, actions)?;
        fpn.propose(self.trunk.infer(x.view())?.view())
    }

    /// One RMSprop step of the fraction proposer against this critic's own
    /// quantile function. Only the proposer's parameters change.
    pub fn fpn_update(&mut self, states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Result<f64> {
        if self.fpn.is_none() {
            return Err(Error::State(format!("fpn_update on a {} critic", self.config.strategy)));
        }
        let x = self.inputs(states, actions)?;
        let h = self.trunk.infer(x.view())?;
        let Self { fpn, head, embedding, .. } = self;
        let (fpn, embedding) = (fpn.as_mut().unwrap(), embedding.as_ref().unwrap());
        fpn.update(h.view(), |taus, k| head_at(head, embedding, h.view(), taus, k))
    }

    /// Soft target update of every network, fraction proposer included.
    pub fn polyak_from(&mut self, online: &DistCritic, tau: f64) -> Result<()> {
        if online.config != self.config {
            return Err(invalid!("polyak update between differently configured critics"));
        }
        self.cache = None;
        self.trunk.polyak_from(&online.trunk, tau)?;
        self.head.polyak_from(&online.head, tau)?;
        if let (Some(t), Some(o)) = (&mut self.embedding, &online.embedding) {
            t.linear_mut().polyak_from(o.linear(), tau)?;
        }
        if let (Some(t), Some(o)) = (&mut self.fpn, &online.fpn) {
            t.layer_mut().polyak_from(o.layer(), tau)?;
        }
        Ok(())
    }

    fn networks(&self) -> Vec<(&'static str, &Mlp)> {
        let mut nets = vec![("trunk", &self.trunk), ("head", &self.head)];
        if let Some(e) = &self.embedding {
            nets.push(("embedding", e.linear()));
        }
        if let Some(f) = &self.fpn {
            nets.push(("fpn", f.layer()));
        }
        nets
    }

    /// Writes `<stem>.bin` (all parameters, network after network) and
    /// `<stem>.json`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let nets = self.networks();
        let manifest = CriticManifest {
            strategy: self.config.strategy,
            n_atoms: self.config.n_atoms,
            state_dim: self.state_dim,
            action_dim: self.action_dim,
            config: self.config.clone(),
            networks: nets.iter().map(|(name, net)| (name.to_string(), MlpManifest::of(net))).collect(),
        };
        let params: Vec<f64> = nets.iter().flat_map(|(_, n)| n.params().iter().copied()).collect();
        write_blob(dir.join(format!("{stem}.bin")), &params)?;
        fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    /// Restores a critic written by [`DistCritic::save`]. Optimizer moments
    /// start fresh; see [`DistCritic::save_optimizers`].
    pub fn load(dir: impl AsRef<Path>, stem: &str, lr: f64, fpn_lr: f64) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: CriticManifest = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        if manifest.strategy != manifest.config.strategy || manifest.n_atoms != manifest.config.n_atoms {
            return Err(invalid!("critic manifest header disagrees with its config"));
        }
        manifest.config.validate()?;
        let params = read_blob(dir.join(format!("{stem}.bin")))?;
        let declared: usize = manifest.networks.iter().map(|(_, m)| m.num_params).sum();
        if declared != params.len() {
            return Err(invalid!("manifest declares {declared} parameters but blob holds {}", params.len()));
        }
        let mut offset = 0;
        let mut take = |name: &str| -> Result<Option<Mlp>> {
            let Some((_, m)) = manifest.networks.iter().find(|(n, _)| n == name) else {
                return Ok(None);
            };
            let net = Mlp::from_params(&m.layer_sizes, &m.activations, params[offset..offset + m.num_params].to_vec())?;
            offset += m.num_params;
            Ok(Some(net))
        };
        let trunk = take("trunk")?.ok_or_else(|| invalid!("checkpoint has no trunk"))?;
        let head = take("head")?.ok_or_else(|| invalid!("checkpoint has no head"))?;
        let embedding = take("embedding")?.map(CosineEmbedding::from_linear).transpose()?;
        let fpn = take("fpn")?.map(|l| FractionProposer::from_layer(l, fpn_lr)).transpose()?;
        let config = manifest.config;
        let (ts, _, hs, _) = net_shapes(&config, manifest.state_dim + manifest.action_dim);
        if trunk.sizes() != ts || head.sizes() != hs {
            return Err(invalid!("checkpoint network shapes do not match its config"));
        }
        if embedding.is_some() != (config.strategy != Strategy::Fixed) || fpn.is_some() != (config.strategy == Strategy::Learned) {
            return Err(invalid!("checkpoint networks do not match strategy {}", config.strategy));
        }
        Self::assemble(config, manifest.state_dim, manifest.action_dim, trunk, head, embedding, fpn, lr)
    }

    /// Writes `<stem>.bin` with all optimizer moments and `<stem>.json` with
    /// their settings and step counts.
    pub fn save_optimizers(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let mut states = self.optimizers.clone();
        if let Some(f) = &self.fpn {
            states.push(f.optimizer().clone());
        }
        let moments: Vec<f64> = states.iter().flat_map(|o| o.moments()).collect();
        write_blob(dir.join(format!("{stem}.bin")), &moments)?;
        fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&states)?)?;
        Ok(())
    }

    pub fn load_optimizers(&mut self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        let saved: Vec<OptimizerState> = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        let moments = read_blob(dir.join(format!("{stem}.bin")))?;
        let mut current: Vec<&mut OptimizerState> = self.optimizers.iter_mut().collect();
        if let Some(f) = &mut self.fpn {
            current.push(f.optimizer_mut());
        }
        if saved.len() != current.len() {
            return Err(invalid!("{} saved optimizers for {} networks", saved.len(), current.len()));
        }
        let mut offset = 0;
        for (cur, s) in current.into_iter().zip(saved) {
            let len = cur.moments().len();
            if offset + len > moments.len() {
                return Err(invalid!("optimizer blob too short"));
            }
            let mut restored = OptimizerState::new(s.kind, s.lr, cur.num_params());
            restored.step = s.step;
            restored.restore_moments(&moments[offset..offset + len])?;
            *cur = restored;
            offset += len;
        }
        if offset != moments.len() {
            return Err(invalid!("optimizer blob has {} trailing values", moments.len() - offset));
        }
        Ok(())
    }
}

/// `(1/M) Σⱼ Σᵢ ½(yⱼ − θᵢ)²`; `grad` is overwritten with `∂/∂θᵢ`.
fn squared_loss_into(values: &[f64], targets: &[f64], grad: &mut [f64]) -> f64 {
    let inv_m = 1.0 / targets.len() as f64;
    let mut loss = 0.0;
    for (&theta, g) in values.iter().zip(grad.iter_mut()) {
        let mut d = 0.0;
        for &y in targets {
            let u = y - theta;
            loss += 0.5 * u * u * inv_m;
            d -= u;
        }
        *g = d * inv_m;
    }
    loss
}

/// JSON side of a critic checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticManifest {
    pub strategy: Strategy,
    pub n_atoms: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    pub config: CriticConfig,
    /// Networks in blob order.
    pub networks: Vec<(String, MlpManifest)>,
}
