use ndarray::{Array2, ArrayView2};

use super::categorical::{categorical_projection, kl_loss, Support};
use super::per::PrioritizedBuffer;
use super::policy::{argmax, ddqn_target, dqn_target, epsilon_decay, select_action};
use super::replay::{NStepBuffer, ReplayBuffer, Transition};
use super::{AgentConfig, AgentError};
use crate::nn::{distribution_head, expected_values, stack_rows, Adam, Network, NetworkSpec, OutputActivation};
use crate::rng::{derive_seed, seeded, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// ε-greedy (or noisy) exploration.
    Train,
    /// Greedy with noise cleared; learning continues.
    Eval,
}

/// How the most recent action was chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionInfo {
    pub epsilon: f64,
    pub noise_active: bool,
    pub action: usize,
}

#[derive(Debug, Clone)]
enum Replay {
    Uniform(ReplayBuffer<Transition>),
    Prioritized(PrioritizedBuffer<Transition>),
}

impl Replay {
    fn len(&self) -> usize {
        match self {
            Replay::Uniform(b) => b.len(),
            Replay::Prioritized(b) => b.len(),
        }
    }
}

/// Batch of transitions laid out for the networks.
struct Batch {
    states: Array2<f64>,
    next_states: Array2<f64>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
    discounts: Vec<f64>,
}

impl Batch {
    fn gather<'a>(items: impl Iterator<Item = &'a Transition>, obs_len: usize) -> Self {
        let items: Vec<&Transition> = items.collect();
        Self {
            states: stack_rows(items.iter().map(|t| t.state.as_slice()), obs_len),
            next_states: stack_rows(items.iter().map(|t| t.next_state.as_slice()), obs_len),
            actions: items.iter().map(|t| t.action).collect(),
            rewards: items.iter().map(|t| t.reward).collect(),
            discounts: items.iter().map(|t| t.discount).collect(),
        }
    }
}

/// DQN with independently switchable double targets, dueling heads,
/// prioritized replay, multistep returns, noisy layers and a categorical
/// value distribution. All switches on gives Rainbow.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    cfg: AgentConfig,
    obs_len: usize,
    actions: usize,
    online: Network,
    target: Network,
    opt: Adam,
    replay: Replay,
    nstep: NStepBuffer,
    support: Option<Support>,
    epsilon: f64,
    mode: Mode,
    env_steps: u64,
    updates: u64,
    explore_rng: Rng,
    replay_rng: Rng,
    noise_rng: Rng,
    last_action: Option<ActionInfo>,
}

impl DqnAgent {
    pub fn new(cfg: AgentConfig, obs_len: usize, actions: usize, seed: u64) -> Result<Self, AgentError> {
        cfg.validate()?;
        let f = cfg.flags;
        let support = if f.categorical {
            Some(Support::new(cfg.v_min, cfg.v_max, cfg.atoms)?)
        } else {
            None
        };
        let spec = NetworkSpec {
            inputs: obs_len,
            hidden: cfg.hidden.clone(),
            actions,
            atoms: support.map_or(1, |s| s.atoms),
            dueling: f.dueling,
            noisy: f.noisy,
            sigma0: cfg.sigma0,
            output: OutputActivation::Identity,
        };
        let online = Network::new(spec, &mut seeded(derive_seed(seed, "net_init")))?;
        let target = online.clone();
        let mut opt = Adam::new(cfg.lr, &online);
        opt.clip_norm = cfg.clip_norm;
        let replay = if f.per {
            Replay::Prioritized(PrioritizedBuffer::new(
                cfg.buffer_capacity,
                cfg.alpha,
                cfg.beta,
                cfg.per_offset,
            ))
        } else {
            Replay::Uniform(ReplayBuffer::new(cfg.buffer_capacity))
        };
        let epsilon = if f.noisy { 0.0 } else { cfg.epsilon_start };
        Ok(Self {
            nstep: NStepBuffer::new(cfg.backup_steps(), cfg.gamma),
            cfg,
            obs_len,
            actions,
            online,
            target,
            opt,
            replay,
            support,
            epsilon,
            mode: Mode::Train,
            env_steps: 0,
            updates: 0,
            explore_rng: seeded(derive_seed(seed, "exploration")),
            replay_rng: seeded(derive_seed(seed, "replay")),
            noise_rng: seeded(derive_seed(seed, "noise")),
            last_action: None,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Exploration rate used in training mode.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn last_action(&self) -> Option<ActionInfo> {
        self.last_action
    }

    pub fn online(&self) -> &Network {
        &self.online
    }

    pub fn target(&self) -> &Network {
        &self.target
    }

    pub fn support(&self) -> Option<&Support> {
        self.support.as_ref()
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    /// Replace both networks, e.g. from a checkpoint.
    pub fn load_network(&mut self, net: Network) -> Result<(), AgentError> {
        if net.spec() != self.online.spec() {
            return Err(AgentError::Nn(crate::nn::NnError::ArchitectureMismatch));
        }
        self.online = net;
        self.target.copy_from(&self.online)?;
        self.opt = Adam::new(self.cfg.lr, &self.online);
        self.opt.clip_norm = self.cfg.clip_norm;
        Ok(())
    }

    fn scalar_values(&self, net: &Network, x: ArrayView2<f64>) -> Result<Array2<f64>, AgentError> {
        let out = net.infer(x)?;
        Ok(match &self.support {
            Some(s) => expected_values(distribution_head(out.view(), s.atoms).view(), &s.values()),
            None => out,
        })
    }

    /// Action values `Q(s, ·)` (expectations for distributional agents)
    /// under the current noise state.
    pub fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        let x = ArrayView2::from_shape((1, obs.len()), obs).map_err(|_| AgentError::Shape)?;
        Ok(self.scalar_values(&self.online, x)?.into_raw_vec_and_offset().0)
    }

    /// Per-action atom probabilities, or an error for scalar agents.
    pub fn distribution(&self, obs: &[f64]) -> Result<Vec<Vec<f64>>, AgentError> {
        let s = self
            .support
            .ok_or_else(|| AgentError::Unsupported("agent is not distributional".into()))?;
        let x = ArrayView2::from_shape((1, obs.len()), obs).map_err(|_| AgentError::Shape)?;
        let p = distribution_head(self.online.infer(x)?.view(), s.atoms);
        Ok(p.row(0)
            .to_vec()
            .chunks(s.atoms)
            .map(|c| c.to_vec())
            .collect())
    }

    pub fn act(&mut self, obs: &[f64]) -> Result<usize, AgentError> {
        let epsilon = match self.mode {
            Mode::Train => {
                if self.cfg.flags.noisy {
                    self.online.sample_noise(&mut self.noise_rng);
                }
                self.epsilon
            }
            Mode::Eval => {
                self.online.clear_noise();
                0.0
            }
        };
        let q = self.q_values(obs)?;
        let action = select_action(&q, epsilon, &mut self.explore_rng);
        self.last_action = Some(ActionInfo {
            epsilon,
            noise_active: self.online.noise_active(),
            action,
        });
        Ok(action)
    }

    /// Store one step of experience and learn from it. Returns the training
    /// loss when an update happened.
    pub fn observe(
        &mut self,
        state: &[f64],
        action: usize,
        reward: f64,
        next_state: &[f64],
    ) -> Result<Option<f64>, AgentError> {
        if action >= self.actions {
            return Err(AgentError::InvalidAction(action));
        }
        if state.len() != self.obs_len || next_state.len() != self.obs_len {
            return Err(AgentError::Shape);
        }
        if !reward.is_finite() {
            return Err(AgentError::Config(format!("non-finite reward {reward}")));
        }
        let reward = match self.cfg.reward_clip {
            Some(c) => reward.clamp(-c, c),
            None => reward,
        };
        if let Some(t) = self.nstep.push(state, action, reward, next_state) {
            match &mut self.replay {
                Replay::Uniform(b) => {
                    b.push(t);
                }
                Replay::Prioritized(b) => {
                    b.push(t);
                }
            }
        }
        self.env_steps += 1;
        let loss = if self.replay.len() >= self.cfg.batch_size {
            Some(self.train_step()?)
        } else {
            None
        };
        if self.env_steps % self.cfg.target_sync == 0 {
            self.sync_target()?;
        }
        self.epsilon = epsilon_decay(self.epsilon, self.cfg.epsilon_decay, self.cfg.epsilon_min);
        Ok(loss)
    }

    pub fn sync_target(&mut self) -> Result<(), AgentError> {
        self.target.copy_from(&self.online)?;
        Ok(())
    }

    fn current_beta(&self) -> f64 {
        match self.cfg.beta_anneal_steps {
            Some(n) if n > 0 => {
                let frac = (self.updates as f64 / n as f64).min(1.0);
                self.cfg.beta + (1.0 - self.cfg.beta) * frac
            }
            _ => self.cfg.beta,
        }
    }

    /// One gradient update on a sampled batch.
    pub fn train_step(&mut self) -> Result<f64, AgentError> {
        let b = self.cfg.batch_size;
        let beta = self.current_beta();
        let (slots, weights, batch) = match &mut self.replay {
            Replay::Uniform(buf) => {
                let slots = buf.sample(b, &mut self.replay_rng)?;
                let batch = Batch::gather(slots.iter().map(|&s| buf.get(s).expect("sampled")), self.obs_len);
                (slots, vec![1.0; b], batch)
            }
            Replay::Prioritized(buf) => {
                buf.beta = beta;
                let sample = buf.sample(b, &mut self.replay_rng)?;
                let batch = Batch::gather(
                    sample.slots.iter().map(|&s| buf.get(s).expect("sampled")),
                    self.obs_len,
                );
                (sample.slots, sample.weights, batch)
            }
        };

        if self.cfg.flags.noisy {
            self.online.sample_noise(&mut self.noise_rng);
            self.target.sample_noise(&mut self.noise_rng);
        }

        let (loss, errors) = match self.support {
            Some(support) => self.categorical_update(&batch, &weights, &support)?,
            None => self.scalar_update(&batch, &weights)?,
        };
        self.opt.step(&mut self.online);
        self.updates += 1;

        if let Replay::Prioritized(buf) = &mut self.replay {
            buf.update(&slots, &errors);
        }
        Ok(loss)
    }

    fn scalar_update(&mut self, batch: &Batch, weights: &[f64]) -> Result<(f64, Vec<f64>), AgentError> {
        let b = batch.actions.len() as f64;
        let q_next_target = self.target.infer(batch.next_states.view())?;
        let y = if self.cfg.flags.double {
            let q_next_online = self.online.infer(batch.next_states.view())?;
            ddqn_target(&batch.rewards, &batch.discounts, q_next_online.view(), q_next_target.view())
        } else {
            dqn_target(&batch.rewards, &batch.discounts, q_next_target.view())
        };
        self.online.zero_grad();
        let q = self.online.forward(batch.states.view())?;
        let mut dq = Array2::zeros(q.raw_dim());
        let mut loss = 0.0;
        let mut errors = Vec::with_capacity(batch.actions.len());
        for (i, (&a, &w)) in batch.actions.iter().zip(weights).enumerate() {
            let delta = q[[i, a]] - y[i];
            loss += w * delta * delta;
            dq[[i, a]] = 2.0 * w * delta / b;
            errors.push(delta);
        }
        self.online.backward(dq.view())?;
        Ok((loss / b, errors))
    }

    fn categorical_update(
        &mut self,
        batch: &Batch,
        weights: &[f64],
        support: &Support,
    ) -> Result<(f64, Vec<f64>), AgentError> {
        let n = support.atoms;
        let z = support.values();
        let b = batch.actions.len() as f64;
        let p_next_target = distribution_head(self.target.infer(batch.next_states.view())?.view(), n);
        let selector = if self.cfg.flags.double {
            distribution_head(self.online.infer(batch.next_states.view())?.view(), n)
        } else {
            p_next_target.clone()
        };
        let next_q = expected_values(selector.view(), &z);

        self.online.zero_grad();
        let logits = self.online.forward(batch.states.view())?;
        let p = distribution_head(logits.view(), n);
        let mut dlogits = Array2::zeros(logits.raw_dim());
        let mut loss = 0.0;
        let mut errors = Vec::with_capacity(batch.actions.len());
        for (i, (&a, &w)) in batch.actions.iter().zip(weights).enumerate() {
            let a_star = argmax(&next_q.row(i).to_vec());
            let next = p_next_target.row(i);
            let next = &next.as_slice().expect("contiguous")[a_star * n..(a_star + 1) * n];
            let m = categorical_projection(next, batch.rewards[i], batch.discounts[i], support);
            let row = p.row(i);
            let pred = &row.as_slice().expect("contiguous")[a * n..(a + 1) * n];
            let kl = kl_loss(&m, pred);
            loss += w * kl;
            errors.push(kl);
            for k in 0..n {
                dlogits[[i, a * n + k]] = w * (pred[k] - m[k]) / b;
            }
        }
        self.online.backward(dlogits.view())?;
        Ok((loss / b, errors))
    }
}

/// Plain DQN written without any of the optional components. Kept as the
/// reference path the composable agent must reproduce exactly when every
/// switch is off.
#[derive(Debug, Clone)]
pub struct PlainDqn {
    cfg: AgentConfig,
    obs_len: usize,
    online: Network,
    target: Network,
    opt: Adam,
    buffer: ReplayBuffer<Transition>,
    epsilon: f64,
    steps: u64,
    explore_rng: Rng,
    replay_rng: Rng,
}

impl PlainDqn {
    pub fn new(cfg: AgentConfig, obs_len: usize, actions: usize, seed: u64) -> Result<Self, AgentError> {
        cfg.validate()?;
        let spec = NetworkSpec::mlp(obs_len, &cfg.hidden, actions);
        let online = Network::new(spec, &mut seeded(derive_seed(seed, "net_init")))?;
        let target = online.clone();
        let mut opt = Adam::new(cfg.lr, &online);
        opt.clip_norm = cfg.clip_norm;
        Ok(Self {
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            epsilon: cfg.epsilon_start,
            cfg,
            obs_len,
            online,
            target,
            opt,
            steps: 0,
            explore_rng: seeded(derive_seed(seed, "exploration")),
            replay_rng: seeded(derive_seed(seed, "replay")),
        })
    }

    pub fn online(&self) -> &Network {
        &self.online
    }

    pub fn target(&self) -> &Network {
        &self.target
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn act(&mut self, obs: &[f64]) -> Result<usize, AgentError> {
        let q = self.online.infer_one(obs)?;
        Ok(select_action(&q, self.epsilon, &mut self.explore_rng))
    }

    pub fn observe(
        &mut self,
        state: &[f64],
        action: usize,
        reward: f64,
        next_state: &[f64],
    ) -> Result<Option<f64>, AgentError> {
        self.buffer.push(Transition {
            state: state.to_vec(),
            action,
            reward,
            next_state: next_state.to_vec(),
            discount: self.cfg.gamma,
        });
        self.steps += 1;
        let mut loss = None;
        if self.buffer.len() >= self.cfg.batch_size {
            let slots = self.buffer.sample(self.cfg.batch_size, &mut self.replay_rng)?;
            let batch = Batch::gather(
                slots.iter().map(|&s| self.buffer.get(s).expect("sampled")),
                self.obs_len,
            );
            let b = slots.len() as f64;
            let q_next = self.target.infer(batch.next_states.view())?;
            self.online.zero_grad();
            let q = self.online.forward(batch.states.view())?;
            let mut dq = Array2::zeros(q.raw_dim());
            let mut total = 0.0;
            for i in 0..slots.len() {
                let row = q_next.row(i).to_vec();
                let y = batch.rewards[i] + batch.discounts[i] * row[argmax(&row)];
                let delta = q[[i, batch.actions[i]]] - y;
                total += delta * delta;
                dq[[i, batch.actions[i]]] = 2.0 * delta / b;
            }
            self.online.backward(dq.view())?;
            self.opt.step(&mut self.online);
            loss = Some(total / b);
        }
        if self.steps % self.cfg.target_sync == 0 {
            self.target.copy_from(&self.online)?;
        }
        self.epsilon = epsilon_decay(self.epsilon, self.cfg.epsilon_decay, self.cfg.epsilon_min);
        Ok(loss)
    }
}
