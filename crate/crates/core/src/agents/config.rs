use std::fmt;
use std::str::FromStr;

use super::AgentError;

/// Members of the DQN family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Dqn,
    Ddqn,
    D3qn,
    Per,
    MultiStep,
    Noisy,
    C51,
    Rainbow,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Dqn,
        Algorithm::Ddqn,
        Algorithm::D3qn,
        Algorithm::Per,
        Algorithm::MultiStep,
        Algorithm::Noisy,
        Algorithm::C51,
        Algorithm::Rainbow,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Dqn => "dqn",
            Algorithm::Ddqn => "ddqn",
            Algorithm::D3qn => "d3qn",
            Algorithm::Per => "per",
            Algorithm::MultiStep => "ms",
            Algorithm::Noisy => "nn",
            Algorithm::C51 => "c51",
            Algorithm::Rainbow => "rainbow",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| AgentError::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    pub double: bool,
    pub dueling: bool,
    pub per: bool,
    pub multistep: bool,
    pub noisy: bool,
    pub categorical: bool,
}

impl Flags {
    pub fn all() -> Self {
        Self {
            double: true,
            dueling: true,
            per: true,
            multistep: true,
            noisy: true,
            categorical: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epsilon_start: f64,
    pub epsilon_min: f64,
    /// Multiplicative decay applied after every environment step.
    pub epsilon_decay: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Anneal β linearly to 1 over this many training updates.
    pub beta_anneal_steps: Option<u64>,
    /// Backup length when `flags.multistep` is set.
    pub n_steps: usize,
    pub sigma0: f64,
    pub atoms: usize,
    pub v_min: f64,
    pub v_max: f64,
    /// Hard target update period in environment steps.
    pub target_sync: u64,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub per_offset: f64,
    pub clip_norm: Option<f64>,
    pub reward_clip: Option<f64>,
    pub flags: Flags,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: 1e-3,
            batch_size: 64,
            epsilon_start: 1.0,
            epsilon_min: 0.01,
            epsilon_decay: 0.0005,
            alpha: 0.7,
            beta: 0.5,
            beta_anneal_steps: None,
            n_steps: 1,
            sigma0: 0.5,
            atoms: 51,
            v_min: -10.0,
            v_max: 10.0,
            target_sync: 200,
            buffer_capacity: 50_000,
            hidden: vec![64, 64],
            per_offset: 1e-3,
            clip_norm: None,
            reward_clip: None,
            flags: Flags::default(),
        }
    }
}

impl AgentConfig {
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        let mut cfg = Self::default();
        let f = &mut cfg.flags;
        match algorithm {
            Algorithm::Dqn => {}
            Algorithm::Ddqn => f.double = true,
            Algorithm::D3qn => {
                f.double = true;
                f.dueling = true;
            }
            Algorithm::Per => f.per = true,
            Algorithm::MultiStep => {
                f.multistep = true;
                cfg.n_steps = 2;
            }
            Algorithm::Noisy => f.noisy = true,
            Algorithm::C51 => f.categorical = true,
            Algorithm::Rainbow => {
                cfg.flags = Flags::all();
                cfg.n_steps = 1;
                cfg.per_offset = 1e-6;
            }
        }
        cfg
    }

    /// Backup length actually used.
    pub fn backup_steps(&self) -> usize {
        if self.flags.multistep {
            self.n_steps
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let err = |m: String| Err(AgentError::Config(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return err(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if !(self.lr > 0.0) {
            return err(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return err("buffer capacity must hold at least one batch".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon_min)
            || !(self.epsilon_min..=1.0).contains(&self.epsilon_start)
        {
            return err("epsilon must satisfy 0 <= min <= start <= 1".into());
        }
        if !(0.0..1.0).contains(&self.epsilon_decay) {
            return err(format!("epsilon decay must be in [0, 1), got {}", self.epsilon_decay));
        }
        if self.flags.categorical && (!(self.v_min < self.v_max) || self.atoms < 2) {
            return err("categorical support needs v_min < v_max and >= 2 atoms".into());
        }
        if self.n_steps == 0 {
            return err("n_steps must be >= 1".into());
        }
        if self.target_sync == 0 {
            return err("target sync period must be >= 1".into());
        }
        if !(self.per_offset > 0.0) {
            return err("PER offset must be positive".into());
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return err("PER exponents must be non-negative".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rainbow_enables_everything_with_one_step() {
        let c = AgentConfig::for_algorithm(Algorithm::Rainbow);
        assert_eq!(c.flags, Flags::all());
        assert_eq!(c.backup_steps(), 1);
        assert_eq!(c.per_offset, 1e-6);
    }

    #[test]
    fn multistep_uses_two_steps() {
        let c = AgentConfig::for_algorithm(Algorithm::MultiStep);
        assert_eq!(c.backup_steps(), 2);
        assert_eq!(AgentConfig::default().backup_steps(), 1);
    }

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
            AgentConfig::for_algorithm(a).validate().unwrap();
        }
        assert!("a2c".parse::<Algorithm>().is_err());
    }

    #[test]
    fn invalid_configs() {
        let mut c = AgentConfig::default();
        c.gamma = 0.0;
        assert!(c.validate().is_err());
        let mut c = AgentConfig::for_algorithm(Algorithm::C51);
        c.v_min = 10.0;
        assert!(c.validate().is_err());
    }
}
