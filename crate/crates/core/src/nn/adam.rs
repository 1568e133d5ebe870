use serde::{Deserialize, Serialize};

use super::params::ParameterSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_rate(learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam with bias correction and no weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    first: ParameterSet,
    second: ParameterSet,
    steps: i32,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParameterSet) -> Self {
        Self { config, first: params.zeros_like(), second: params.zeros_like(), steps: 0 }
    }

    pub fn steps(&self) -> i32 {
        self.steps
    }

    pub fn step(&mut self, params: &mut ParameterSet, grads: &ParameterSet) {
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        self.steps += 1;
        let c1 = 1.0 - beta1.powi(self.steps);
        let c2 = 1.0 - beta2.powi(self.steps);
        for id in params.ids().collect::<Vec<_>>() {
            let g = grads.get(id);
            let m = self.first.get_mut(id);
            m.zip_mut_with(g, |m, &g| *m = beta1 * *m + (1.0 - beta1) * g);
            let v = self.second.get_mut(id);
            v.zip_mut_with(g, |v, &g| *v = beta2 * *v + (1.0 - beta2) * g * g);
            let m = self.first.get(id);
            let v = self.second.get(id);
            let w = params.get_mut(id);
            ndarray::Zip::from(w).and(m).and(v).for_each(|w, &m, &v| {
                *w -= learning_rate * (m / c1) / ((v / c2).sqrt() + epsilon);
            });
        }
    }
}
