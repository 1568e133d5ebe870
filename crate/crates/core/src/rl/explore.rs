use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::Selection;

/// Indices of the `k` largest values, best first; ties go to the lower index.
pub fn topk_indices(values: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > values.len() {
        return Err(Error::SelectionTooLarge { k, available: values.len() });
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

/// `k` distinct positions uniformly at random.
pub fn random_distinct<R: Rng + ?Sized>(available: usize, k: usize, rng: &mut R) -> Result<Selection> {
    if k > available {
        return Err(Error::SelectionTooLarge { k, available });
    }
    Ok(Selection::new(sample(rng, available, k).into_vec()))
}

/// With probability `epsilon` a uniform draw of `k` distinct positions,
/// otherwise the top-k positions by `values`.
pub fn topk_epsilon_greedy<R: Rng + ?Sized>(values: &[f64], k: usize, epsilon: f64, rng: &mut R) -> Result<Selection> {
    if k > values.len() {
        return Err(Error::SelectionTooLarge { k, available: values.len() });
    }
    if rng.random::<f64>() < epsilon {
        random_distinct(values.len(), k, rng)
    } else {
        Ok(Selection::new(topk_indices(values, k)?))
    }
}

/// Exploration rate as a function of the environment step count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    /// Steps to go from `start` to `end`.
    pub anneal_steps: u64,
    pub decay: Decay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decay {
    Linear,
    /// `start * exp(-t ln(start/end) / anneal_steps)`, floored at `end`.
    Exp,
}

impl EpsilonSchedule {
    pub fn linear(anneal_steps: u64) -> Self {
        Self { start: 1.0, end: 0.05, anneal_steps, decay: Decay::Linear }
    }

    pub fn exp(anneal_steps: u64) -> Self {
        Self { start: 1.0, end: 0.05, anneal_steps, decay: Decay::Exp }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.start)
            && (0.0..=1.0).contains(&self.end)
            && self.end <= self.start
            && (self.decay == Decay::Linear || self.end > 0.0);
        if !ok {
            return Err(Error::Config("exploration schedule needs 0 <= end <= start <= 1 (end > 0 for exp)".into()));
        }
        Ok(())
    }

    pub fn value(&self, step: u64) -> f64 {
        if step >= self.anneal_steps {
            return self.end;
        }
        let frac = step as f64 / self.anneal_steps as f64;
        match self.decay {
            Decay::Linear => (self.start + (self.end - self.start) * frac).max(self.end),
            Decay::Exp => (self.start * (-frac * (self.start / self.end).ln()).exp()).max(self.end),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{Purpose, SeedStream};

    #[test]
    fn greedy_top_two() {
        let mut rng = SeedStream::new(0).rng(0, 0, Purpose::Exploration);
        let s = topk_epsilon_greedy(&[0.1, 0.9, 0.5, 0.7], 2, 0.0, &mut rng).unwrap();
        assert_eq!(s.indices(), &[1, 3]);
        let all = topk_epsilon_greedy(&[0.3, 0.3, 0.3], 3, 0.0, &mut rng).unwrap();
        assert_eq!(all.indices(), &[0, 1, 2]);
        assert!(topk_epsilon_greedy(&[0.3], 2, 0.0, &mut rng).is_err());
    }

    #[test]
    fn random_branch_is_distinct() {
        let mut rng = SeedStream::new(1).rng(0, 0, Purpose::Exploration);
        for _ in 0..200 {
            let s = topk_epsilon_greedy(&[0.0; 10], 6, 1.0, &mut rng).unwrap();
            assert!(s.check(10).is_ok());
            assert_eq!(s.len(), 6);
        }
    }

    #[test]
    fn schedules() {
        let lin = EpsilonSchedule::linear(10_000);
        assert_eq!(lin.value(0), 1.0);
        assert!((lin.value(5_000) - 0.525).abs() < 1e-12);
        assert_eq!(lin.value(10_000), 0.05);
        assert_eq!(lin.value(50_000), 0.05);
        let exp = EpsilonSchedule::exp(10_000);
        assert!((exp.value(10_000) - 0.05).abs() < 1e-12);
        assert!((exp.value(5_000) - 0.05f64.sqrt()).abs() < 1e-12);
        let mut prev = 1.0;
        for t in (0..20_000).step_by(97) {
            assert!(exp.value(t) <= prev && lin.value(t) <= lin.value(t.saturating_sub(97)));
            prev = exp.value(t);
        }
    }
}
