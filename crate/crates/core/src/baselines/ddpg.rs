//! Deterministic policy gradients with a tanh-bounded actor.

use ndarray::{s, Array2, Axis};
use rand_distr::{Distribution, Normal};

use super::BaselineError;
use crate::agents::ReplayBuffer;
use crate::nn::{self, Adam, Network, NetworkSpec, OutputActivation};
use crate::rng::{derive_seed, seeded, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgConfig {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    /// Exploration noise standard deviation as a fraction of `X_max`.
    pub noise_std: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            tau: 0.005,
            noise_std: 0.1,
            batch_size: 64,
            buffer_capacity: 50_000,
            hidden: vec![64, 64],
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<(), BaselineError> {
        if !(self.gamma >= 0.0 && self.gamma <= 1.0) {
            return Err(BaselineError::Config("gamma must be in [0, 1]".into()));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(BaselineError::Config("learning rates must be positive".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(BaselineError::Config("tau must be in (0, 1]".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(BaselineError::Config("noise std must be non-negative".into()));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(BaselineError::Config("buffer must hold at least one batch".into()));
        }
        Ok(())
    }
}

/// Stored transition; `action` is normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DdpgTransition {
    pub state: Vec<f64>,
    pub action: f64,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    cfg: DdpgConfig,
    obs_len: usize,
    max_power: f64,
    actor: Network,
    critic: Network,
    actor_target: Network,
    critic_target: Network,
    actor_opt: Adam,
    critic_opt: Adam,
    replay: ReplayBuffer<DdpgTransition>,
    replay_rng: Rng,
    updates: u64,
}

impl DdpgAgent {
    pub fn new(cfg: DdpgConfig, obs_len: usize, max_power: f64, seed: u64) -> Result<Self, BaselineError> {
        cfg.validate()?;
        if !(max_power > 0.0) {
            return Err(BaselineError::Config("max power must be positive".into()));
        }
        let mut init = seeded(derive_seed(seed, "net_init"));
        let mut actor_spec = NetworkSpec::mlp(obs_len, &cfg.hidden, 1);
        actor_spec.output = OutputActivation::Tanh;
        let actor = Network::new(actor_spec, &mut init)?;
        let critic = Network::new(NetworkSpec::mlp(obs_len + 1, &cfg.hidden, 1), &mut init)?;
        Ok(Self {
            actor_opt: Adam::new(cfg.actor_lr, &actor),
            critic_opt: Adam::new(cfg.critic_lr, &critic),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            replay: ReplayBuffer::new(cfg.buffer_capacity),
            replay_rng: seeded(derive_seed(seed, "replay")),
            cfg,
            obs_len,
            max_power,
            updates: 0,
        })
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.cfg
    }

    pub fn actor(&self) -> &Network {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Network {
        &mut self.actor
    }

    pub fn critic(&self) -> &Network {
        &self.critic
    }

    pub fn actor_target(&self) -> &Network {
        &self.actor_target
    }

    pub fn critic_target(&self) -> &Network {
        &self.critic_target
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    fn check(&self, obs: &[f64]) -> Result<(), BaselineError> {
        if obs.len() != self.obs_len {
            return Err(BaselineError::Config(format!(
                "observation has {} values, expected {}",
                obs.len(),
                self.obs_len
            )));
        }
        Ok(())
    }

    /// Battery power in MW. Exploration adds `N(0, noise_std · X_max)` before
    /// clamping to `±X_max`.
    pub fn act(&self, obs: &[f64], explore: bool, rng: &mut Rng) -> Result<f64, BaselineError> {
        self.check(obs)?;
        let mu = self.actor.infer_one(obs)?[0] * self.max_power;
        let std = self.cfg.noise_std * self.max_power;
        let x = if explore && std > 0.0 {
            mu + Normal::new(0.0, std).expect("positive std").sample(rng)
        } else {
            mu
        };
        Ok(x.clamp(-self.max_power, self.max_power))
    }

    /// Store a transition and train once the buffer holds a batch.
    pub fn observe(
        &mut self,
        state: &[f64],
        power: f64,
        reward: f64,
        next_state: &[f64],
    ) -> Result<Option<(f64, f64)>, BaselineError> {
        self.check(state)?;
        self.check(next_state)?;
        self.replay.push(DdpgTransition {
            state: state.to_vec(),
            action: (power / self.max_power).clamp(-1.0, 1.0),
            reward,
            next_state: next_state.to_vec(),
        });
        if self.replay.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let slots = self.replay.sample(self.cfg.batch_size, &mut self.replay_rng)?;
        let batch: Vec<DdpgTransition> = slots
            .iter()
            .map(|&i| self.replay.get(i).expect("sampled slot").clone())
            .collect();
        Ok(Some(self.train_on(&batch)?))
    }

    /// One critic update, one actor update and soft target updates.
    /// Returns `(critic loss, actor loss)`.
    pub fn train_on(&mut self, batch: &[DdpgTransition]) -> Result<(f64, f64), BaselineError> {
        let critic_loss = self.critic_update(batch)?;
        let states = nn::stack_rows(batch.iter().map(|t| t.state.as_slice()), self.obs_len);
        self.actor.zero_grad();
        let actor_loss = self.actor_backward(&states)?;
        self.actor_opt.step(&mut self.actor);
        self.actor_target.soft_update(&self.actor, self.cfg.tau)?;
        self.critic_target.soft_update(&self.critic, self.cfg.tau)?;
        self.updates += 1;
        Ok((critic_loss, actor_loss))
    }

    /// Critic targets `r + γ Q̂(s', μ̂(s'))`.
    pub fn critic_targets(&self, batch: &[DdpgTransition]) -> Result<Vec<f64>, BaselineError> {
        let next = nn::stack_rows(batch.iter().map(|t| t.next_state.as_slice()), self.obs_len);
        let a = self.actor_target.infer(next.view())?;
        let q = self.critic_target.infer(with_action(&next, &a).view())?;
        Ok(batch
            .iter()
            .zip(q.column(0))
            .map(|(t, q)| t.reward + self.cfg.gamma * q)
            .collect())
    }

    fn critic_update(&mut self, batch: &[DdpgTransition]) -> Result<f64, BaselineError> {
        let y = self.critic_targets(batch)?;
        let states = nn::stack_rows(batch.iter().map(|t| t.state.as_slice()), self.obs_len);
        let actions = Array2::from_shape_fn((batch.len(), 1), |(i, _)| batch[i].action);
        let target = Array2::from_shape_fn((batch.len(), 1), |(i, _)| y[i]);
        self.critic.zero_grad();
        let q = self.critic.forward(with_action(&states, &actions).view())?;
        let (loss, dy) = nn::mse_loss(&q, &target);
        self.critic.backward(dy.view())?;
        self.critic_opt.step(&mut self.critic);
        Ok(loss)
    }

    /// Accumulate actor gradients of `-mean Q(s, μ(s))` and return that loss.
    /// Critic gradients touched on the way are cleared.
    pub(crate) fn actor_backward(&mut self, states: &Array2<f64>) -> Result<f64, BaselineError> {
        let n = states.nrows() as f64;
        let mu = self.actor.forward(states.view())?;
        let q = self.critic.forward(with_action(states, &mu).view())?;
        let loss = -q.sum() / n;
        let dq = Array2::from_elem(q.raw_dim(), -1.0 / n);
        let dx = self.critic.backward(dq.view())?;
        self.critic.zero_grad();
        let da = dx.slice(s![.., self.obs_len..]).to_owned();
        self.actor.backward(da.view())?;
        Ok(loss)
    }
}

fn with_action(states: &Array2<f64>, actions: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[states.view(), actions.view()]).expect("row counts match")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn small() -> DdpgConfig {
        DdpgConfig {
            hidden: vec![8, 8],
            batch_size: 4,
            buffer_capacity: 64,
            ..DdpgConfig::default()
        }
    }

    fn batch(rng: &mut Rng, n: usize) -> Vec<DdpgTransition> {
        (0..n)
            .map(|_| DdpgTransition {
                state: (0..3).map(|_| rng.random()).collect(),
                action: rng.random_range(-1.0..1.0),
                reward: rng.random_range(-1.0..1.0),
                next_state: (0..3).map(|_| rng.random()).collect(),
            })
            .collect()
    }

    #[test]
    fn deterministic_without_exploration() {
        let agent = DdpgAgent::new(small(), 3, 2.0, 1).unwrap();
        let obs = [0.1, 0.5, 0.9];
        let a = agent.act(&obs, false, &mut seeded(1)).unwrap();
        let b = agent.act(&obs, false, &mut seeded(2)).unwrap();
        assert_eq!(a, b);
        assert!(a.abs() <= 2.0);
    }

    #[test]
    fn zero_noise_matches_deterministic_path() {
        let cfg = DdpgConfig {
            noise_std: 0.0,
            ..small()
        };
        let agent = DdpgAgent::new(cfg, 3, 2.0, 1).unwrap();
        let obs = [0.3, 0.2, 0.1];
        assert_eq!(
            agent.act(&obs, true, &mut seeded(3)).unwrap(),
            agent.act(&obs, false, &mut seeded(3)).unwrap()
        );
    }

    #[test]
    fn saturated_actor_outputs_max_power() {
        let mut agent = DdpgAgent::new(small(), 3, 2.0, 1).unwrap();
        let last = agent.actor_mut().params_mut().len() - 1;
        agent.actor_mut().params_mut()[last].value.fill(1e6);
        let mut rng = seeded(4);
        assert_eq!(agent.act(&[0.0; 3], false, &mut rng).unwrap(), 2.0);
        for _ in 0..100 {
            let x = agent.act(&[0.0; 3], true, &mut rng).unwrap();
            assert!((-2.0..=2.0).contains(&x));
        }
    }

    #[test]
    fn zero_discount_targets_are_rewards() {
        let cfg = DdpgConfig { gamma: 0.0, ..small() };
        let agent = DdpgAgent::new(cfg, 3, 2.0, 1).unwrap();
        let b = batch(&mut seeded(5), 6);
        let y = agent.critic_targets(&b).unwrap();
        assert_eq!(y, b.iter().map(|t| t.reward).collect::<Vec<_>>());
    }

    #[test]
    fn unit_tau_is_a_hard_copy() {
        let cfg = DdpgConfig { tau: 1.0, ..small() };
        let mut agent = DdpgAgent::new(cfg, 3, 2.0, 1).unwrap();
        agent.train_on(&batch(&mut seeded(6), 4)).unwrap();
        let same = |a: &Network, b: &Network| a.params().iter().zip(b.params()).all(|(x, y)| x.value == y.value);
        assert!(same(agent.actor(), agent.actor_target()));
        assert!(same(agent.critic(), agent.critic_target()));
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        let mut agent = DdpgAgent::new(small(), 3, 2.0, 2).unwrap();
        let mut rng = seeded(7);
        let x = Array2::from_shape_fn((5, 4), |_| rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_fn((5, 1), |_| rng.random_range(-1.0..1.0));
        let err = nn::gradient_check(&mut agent.critic, x.view(), 1e-6, |out| nn::mse_loss(out, &y)).unwrap();
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let mut agent = DdpgAgent::new(small(), 3, 2.0, 3).unwrap();
        let mut rng = seeded(8);
        let states = Array2::from_shape_fn((6, 3), |_| rng.random::<f64>());
        agent.actor.zero_grad();
        agent.actor_backward(&states).unwrap();
        let analytic: Vec<Array2<f64>> = agent.actor.params().iter().map(|p| p.grad.clone()).collect();
        let loss = |a: &DdpgAgent| {
            let mu = a.actor.infer(states.view()).unwrap();
            -a.critic.infer(with_action(&states, &mu).view()).unwrap().sum() / 6.0
        };
        let eps = 1e-6;
        let mut worst: f64 = 0.0;
        for k in 0..analytic.len() {
            for idx in 0..analytic[k].len() {
                let (r, c) = (idx / analytic[k].ncols(), idx % analytic[k].ncols());
                let orig = agent.actor.params()[k].value[[r, c]];
                agent.actor.params_mut()[k].value[[r, c]] = orig + eps;
                let plus = loss(&agent);
                agent.actor.params_mut()[k].value[[r, c]] = orig - eps;
                let minus = loss(&agent);
                agent.actor.params_mut()[k].value[[r, c]] = orig;
                let num = (plus - minus) / (2.0 * eps);
                let a = analytic[k][[r, c]];
                worst = worst.max((a - num).abs() / a.abs().max(num.abs()).max(1e-6));
            }
        }
        assert!(worst <= 1e-4, "{worst}");
        assert!(agent.critic.params().iter().all(|p| p.grad.iter().all(|g| *g == 0.0)));
    }

    #[test]
    fn learns_a_bandit() {
        // Reward peaks at action 0.5; with γ = 0 the actor should move there.
        let cfg = DdpgConfig {
            gamma: 0.0,
            actor_lr: 1e-2,
            critic_lr: 1e-2,
            noise_std: 0.5,
            batch_size: 32,
            buffer_capacity: 1000,
            hidden: vec![32, 32],
            ..DdpgConfig::default()
        };
        let mut agent = DdpgAgent::new(cfg, 1, 1.0, 4).unwrap();
        let mut rng = seeded(9);
        for _ in 0..6000 {
            let a = agent.act(&[1.0], true, &mut rng).unwrap();
            let r = -(a - 0.5) * (a - 0.5);
            agent.observe(&[1.0], a, r, &[1.0]).unwrap();
        }
        let a = agent.act(&[1.0], false, &mut rng).unwrap();
        assert!((a - 0.5).abs() < 0.1, "{a}");
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut agent = DdpgAgent::new(small(), 3, 2.0, 5).unwrap();
            let mut rng = seeded(10);
            let mut s = vec![0.5; 3];
            let mut losses = Vec::new();
            for _ in 0..20 {
                let a = agent.act(&s, true, &mut rng).unwrap();
                let next: Vec<f64> = (0..3).map(|_| rng.random()).collect();
                losses.push(agent.observe(&s, a, a * s[0], &next).unwrap());
                s = next;
            }
            (losses, agent.actor().clone())
        };
        assert_eq!(run(), run());
    }
}
