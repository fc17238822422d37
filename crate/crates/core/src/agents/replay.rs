use ndarray::Array2;
use rand::Rng;

use crate::error::invalid;
use crate::Result;

/// One environment interaction. Actions are stored in the normalized
/// `[-1, 1]` box the actor works in.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True termination only; time-limit truncation is not terminal.
    pub done: bool,
}

/// Column-stacked minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Array2<f64>,
    /// `1.0` for terminal transitions, else `0.0`.
    pub dones: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(items: &[Transition]) -> Result<Self> {
        let first = items.first().ok_or_else(|| invalid!("empty batch"))?;
        let (sd, ad) = (first.state.len(), first.action.len());
        if items.iter().any(|t| t.state.len() != sd || t.next_state.len() != sd || t.action.len() != ad) {
            return Err(invalid!("transitions of mixed dimensions"));
        }
        let rows = |f: &dyn Fn(&Transition) -> &[f64], w: usize| {
            Array2::from_shape_vec((items.len(), w), items.iter().flat_map(|t| f(t).iter().copied()).collect()).unwrap()
        };
        Ok(Self {
            states: rows(&|t| &t.state, sd),
            actions: rows(&|t| &t.action, ad),
            rewards: items.iter().map(|t| t.reward).collect(),
            next_states: rows(&|t| &t.next_state, sd),
            dones: items.iter().map(|t| if t.done { 1.0 } else { 0.0 }).collect(),
        })
    }
}

/// Fixed-capacity ring buffer with FIFO eviction and uniform sampling.
/// Storage grows on demand up to the capacity.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    dones: Vec<f64>,
    /// Slot the next push writes once the buffer is full.
    head: usize,
}

impl ReplayBuffer {
    pub const DEFAULT_CAPACITY: usize = 1_000_000;

    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid!("replay capacity must be positive"));
        }
        Ok(Self {
            capacity,
            state_dim,
            action_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
            head: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: &Transition) -> Result<()> {
        if t.state.len() != self.state_dim || t.next_state.len() != self.state_dim || t.action.len() != self.action_dim {
            return Err(invalid!("transition dimensions do not match the buffer"));
        }
        let finite = t.state.iter().chain(&t.action).chain(&t.next_state).all(|v| v.is_finite());
        if !finite || !t.reward.is_finite() {
            return Err(invalid!("transition contains non-finite values"));
        }
        let done = if t.done { 1.0 } else { 0.0 };
        if self.len() < self.capacity {
            self.states.extend_from_slice(&t.state);
            self.actions.extend_from_slice(&t.action);
            self.rewards.push(t.reward);
            self.next_states.extend_from_slice(&t.next_state);
            self.dones.push(done);
        } else {
            let i = self.head;
            let (sd, ad) = (self.state_dim, self.action_dim);
            self.states[i * sd..(i + 1) * sd].copy_from_slice(&t.state);
            self.actions[i * ad..(i + 1) * ad].copy_from_slice(&t.action);
            self.rewards[i] = t.reward;
            self.next_states[i * sd..(i + 1) * sd].copy_from_slice(&t.next_state);
            self.dones[i] = done;
            self.head = (self.head + 1) % self.capacity;
        }
        Ok(())
    }

    /// Transition at age order `i` (0 is the oldest still stored).
    pub fn get(&self, i: usize) -> Option<Transition> {
        if i >= self.len() {
            return None;
        }
        let slot = if self.len() < self.capacity { i } else { (self.head + i) % self.capacity };
        Some(self.slot(slot))
    }

    fn slot(&self, i: usize) -> Transition {
        let (sd, ad) = (self.state_dim, self.action_dim);
        Transition {
            state: self.states[i * sd..(i + 1) * sd].to_vec(),
            action: self.actions[i * ad..(i + 1) * ad].to_vec(),
            reward: self.rewards[i],
            next_state: self.next_states[i * sd..(i + 1) * sd].to_vec(),
            done: self.dones[i] != 0.0,
        }
    }

    /// `batch_size` indices drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch> {
        if batch_size == 0 {
            return Err(invalid!("batch size must be positive"));
        }
        if self.len() < batch_size {
            return Err(invalid!("buffer holds {} transitions, batch needs {batch_size}", self.len()));
        }
        let (sd, ad) = (self.state_dim, self.action_dim);
        let mut states = Array2::zeros((batch_size, sd));
        let mut actions = Array2::zeros((batch_size, ad));
        let mut next_states = Array2::zeros((batch_size, sd));
        let mut rewards = Vec::with_capacity(batch_size);
        let mut dones = Vec::with_capacity(batch_size);
        for b in 0..batch_size {
            let i = rng.random_range(0..self.len());
            for (dst, src) in states.row_mut(b).iter_mut().zip(&self.states[i * sd..(i + 1) * sd]) {
                *dst = *src;
            }
            for (dst, src) in actions.row_mut(b).iter_mut().zip(&self.actions[i * ad..(i + 1) * ad]) {
                *dst = *src;
            }
            for (dst, src) in next_states.row_mut(b).iter_mut().zip(&self.next_states[i * sd..(i + 1) * sd]) {
                *dst = *src;
            }
            rewards.push(self.rewards[i]);
            dones.push(self.dones[i]);
        }
        Ok(Batch {
            states,
            actions,
            rewards,
            next_states,
            dones,
        })
    }
}
