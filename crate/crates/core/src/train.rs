//! Hyperparameters and logs shared by both learning agents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::{Decay, EpsilonSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Gaiqn,
    Magaqn,
    Random,
    Greedy,
    Oracle,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Gaiqn => "gaiqn",
            Algorithm::Magaqn => "magaqn",
            Algorithm::Random => "random",
            Algorithm::Greedy => "greedy",
            Algorithm::Oracle => "oracle",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub updates_per_episode: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub gamma: f64,
    pub soft_update: f64,
    /// 0.01 for GAIQN and 0.001 for MAGAQN when unset.
    pub learning_rate: Option<f64>,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_anneal_steps: u64,
    /// Linear for GAIQN and exponential for MAGAQN when unset.
    pub epsilon_decay: Option<Decay>,
    /// Weight of each colliding antenna pair in the reward.
    pub penalty: f64,
    /// Initial importance-sampling exponent, annealed linearly to 1.
    pub beta_start: f64,
    pub embedding: usize,
    pub hidden: usize,
    pub gat_layers: usize,
    /// Quantile levels per forward pass on the online side.
    pub quantiles: usize,
    /// Quantile levels on the target side.
    pub target_quantiles: usize,
    pub cosine_features: usize,
    pub huber_kappa: f64,
    /// Pick the bootstrap action with the online network and score it with
    /// the target network. When false the target network does both.
    pub double_q: bool,
    /// Reuse the online quantile levels on the target side.
    pub shared_quantiles: bool,
    /// Rescale the gradient when its norm exceeds this value.
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            updates_per_episode: 1,
            batch_size: 64,
            buffer_capacity: 5000,
            gamma: 0.98,
            soft_update: 0.005,
            learning_rate: None,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_anneal_steps: 10_000,
            epsilon_decay: None,
            penalty: 0.5,
            beta_start: 0.4,
            embedding: 256,
            hidden: 256,
            gat_layers: 1,
            quantiles: 64,
            target_quantiles: 64,
            cosine_features: 32,
            huber_kappa: 1.0,
            double_q: true,
            shared_quantiles: false,
            max_grad_norm: None,
        }
    }
}

impl TrainConfig {
    /// Fill the algorithm-dependent defaults.
    pub fn resolved(&self, algorithm: Algorithm) -> Self {
        let magaqn = algorithm == Algorithm::Magaqn;
        Self {
            learning_rate: Some(self.learning_rate.unwrap_or(if magaqn { 0.001 } else { 0.01 })),
            epsilon_decay: Some(self.epsilon_decay.unwrap_or(if magaqn { Decay::Exp } else { Decay::Linear })),
            ..self.clone()
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate.unwrap_or(0.01)
    }

    pub fn epsilon(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            anneal_steps: self.epsilon_anneal_steps,
            decay: self.epsilon_decay.unwrap_or(Decay::Linear),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail("gamma must lie in (0, 1)");
        }
        if !(self.soft_update > 0.0 && self.soft_update < 1.0) {
            return fail("soft_update must lie in (0, 1)");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return fail("batch_size must be positive and at most buffer_capacity");
        }
        if self.embedding == 0 || self.hidden == 0 || self.gat_layers == 0 {
            return fail("network widths and gat_layers must be positive");
        }
        if self.quantiles == 0 || self.target_quantiles == 0 || self.cosine_features == 0 {
            return fail("quantile counts and cosine_features must be positive");
        }
        if self.shared_quantiles && self.quantiles != self.target_quantiles {
            return fail("shared_quantiles needs quantiles == target_quantiles");
        }
        if !(self.huber_kappa > 0.0) {
            return fail("huber_kappa must be positive");
        }
        if !(self.penalty >= 0.0) {
            return fail("penalty must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.beta_start) {
            return fail("beta_start must lie in [0, 1]");
        }
        if self.learning_rate.is_some_and(|lr| !(lr > 0.0)) {
            return fail("learning_rate must be positive");
        }
        if self.max_grad_norm.is_some_and(|g| !(g > 0.0)) {
            return fail("max_grad_norm must be positive");
        }
        self.epsilon().validate()
    }
}

/// Reward of one slot split into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reward {
    /// `erank - penalty`.
    pub value: f64,
    pub erank: f64,
    /// `alpha x colliding pairs`, non-negative.
    pub penalty: f64,
}

impl Reward {
    pub fn new(erank: f64, colliding_pairs: usize, alpha: f64) -> Self {
        let penalty = alpha * colliding_pairs as f64;
        Self { value: erank - penalty, erank, penalty }
    }
}

/// One row of `train_log.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub cum_reward: f64,
    pub mean_erank: f64,
    /// Mean over slots of `penalty x colliding pairs`.
    pub mean_penalty: f64,
}

/// Mean of the `mean_erank` column over the last `n` episodes.
pub fn tail_mean_erank(log: &[EpisodeLog], n: usize) -> f64 {
    let tail = &log[log.len().saturating_sub(n)..];
    tail.iter().map(|r| r.mean_erank).sum::<f64>() / tail.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_defaults() {
        let g = TrainConfig::default().resolved(Algorithm::Gaiqn);
        assert_eq!(g.learning_rate, Some(0.01));
        assert_eq!(g.epsilon_decay, Some(Decay::Linear));
        let m = TrainConfig::default().resolved(Algorithm::Magaqn);
        assert_eq!(m.learning_rate, Some(0.001));
        assert_eq!(m.epsilon_decay, Some(Decay::Exp));
        let custom = TrainConfig { learning_rate: Some(0.5), ..TrainConfig::default() };
        assert_eq!(custom.resolved(Algorithm::Magaqn).learning_rate, Some(0.5));
        assert!(g.validate().is_ok());
        assert!(TrainConfig { gamma: 1.0, ..g }.validate().is_err());
    }
}
