//! Graph attention implicit quantile network (GAIQN) for MA placement.
//!
//! The state is the MA user graph. A GAT layer and sum pooling give the graph
//! embedding `z`, which is modulated by a cosine embedding of sampled quantile
//! levels and fed to a dueling head with one output per candidate position.
//! The agent places all `M_ma` antennas at once by taking the top-`M_ma`
//! positions of the mean-over-quantiles values, so no two antennas can share
//! a position.
//!
//! The quantile value of a joint action is the mean of its positions'
//! quantile values.

use std::sync::Arc;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{build_ma_graph, GraphConfig, GraphObservation};
use crate::linalg::{effective_rank, ChannelMatrix};
use crate::nn::checkpoint::save_checkpoint;
use crate::nn::cosine::{modulate, modulate_backward, CosineCache};
use crate::nn::dueling::DuelingCache;
use crate::nn::gat::{graph_pool, graph_pool_backward, GatCache};
use crate::nn::loss::{quantile_huber_loss, quantile_huber_loss_grad};
use crate::nn::{Adam, AdamConfig, CosineEmbedding, DuelingHead, GatLayer, ParameterSet};
use crate::rl::{beta_schedule, topk_epsilon_greedy, topk_indices, PrioritizedBuffer};
use crate::scenario::bs_position;
use crate::seed::{Purpose, SeedStream};
use crate::selection::Selection;
use crate::system::MaSystem;
use crate::train::{EpisodeLog, Reward, TrainConfig};

/// `erank(H_ma) - alpha x (colliding antenna pairs)`.
pub fn ma_reward(h: &ChannelMatrix, selection: &Selection, alpha: f64) -> Result<Reward> {
    Ok(Reward::new(effective_rank(h)?, selection.collision_pairs(), alpha))
}

/// Draw `k` quantile levels uniformly from the open interval (0, 1).
pub fn sample_taus<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    (0..k)
        .map(|_| loop {
            let t: f64 = rng.random();
            if t > 0.0 {
                break t;
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaiqnNet {
    pub gat: Vec<GatLayer>,
    pub cosine: CosineEmbedding,
    pub head: DuelingHead,
    pub features: usize,
    pub actions: usize,
}

#[derive(Debug, Clone)]
pub struct GaiqnCache {
    gat: Vec<Vec<GatCache>>,
    vertices: Vec<usize>,
    pooled: Array2<f64>,
    phi: Array2<f64>,
    offsets: Vec<usize>,
    cosine: CosineCache,
    head: DuelingCache,
}

impl GaiqnNet {
    pub fn new<R: Rng + ?Sized>(features: usize, actions: usize, cfg: &TrainConfig, rng: &mut R) -> (Self, ParameterSet) {
        let mut p = ParameterSet::new();
        let mut gat = Vec::with_capacity(cfg.gat_layers);
        let mut width = features;
        for l in 0..cfg.gat_layers {
            gat.push(GatLayer::new(&mut p, &format!("gat{l}"), width, cfg.embedding, rng));
            width = cfg.embedding;
        }
        let cosine = CosineEmbedding::new(&mut p, "cosine", cfg.cosine_features, cfg.embedding, rng);
        let head = DuelingHead::new(&mut p, "head", cfg.embedding, cfg.hidden, actions, rng);
        (Self { gat, cosine, head, features, actions }, p)
    }

    /// Quantile values for a batch of graphs. Sample `b` uses levels
    /// `taus[b]`; its rows in the `(sum_b K_b) x I_pos` output are contiguous.
    pub fn forward(&self, p: &ParameterSet, obs: &[&GraphObservation], taus: &[Vec<f64>]) -> Result<(Array2<f64>, GaiqnCache)> {
        if obs.len() != taus.len() {
            return Err(Error::Dimension { expected: obs.len(), got: taus.len() });
        }
        let width = self.cosine.dense.outputs;
        let mut gat_caches = Vec::with_capacity(obs.len());
        let mut pooled = Array2::zeros((obs.len(), width));
        for (b, o) in obs.iter().enumerate() {
            if o.feature_width() != self.features {
                return Err(Error::Dimension { expected: self.features, got: o.feature_width() });
            }
            let mut x = o.features.clone();
            let mut caches = Vec::with_capacity(self.gat.len());
            for layer in &self.gat {
                let (y, c) = layer.forward(p, &x, &o.adjacency);
                caches.push(c);
                x = y;
            }
            pooled.row_mut(b).assign(&graph_pool(&x));
            gat_caches.push(caches);
        }
        let mut offsets = vec![0];
        let mut all_taus = Vec::new();
        for t in taus {
            all_taus.extend_from_slice(t);
            offsets.push(all_taus.len());
        }
        let (phi, cosine) = self.cosine.forward(p, &all_taus);
        let mut z = Array2::zeros(phi.dim());
        for b in 0..obs.len() {
            let rows = s![offsets[b]..offsets[b + 1], ..];
            z.slice_mut(rows).assign(&modulate(pooled.row(b), &phi.slice(rows).to_owned()));
        }
        let (q, head) = self.head.forward(p, &z);
        let vertices = obs.iter().map(|o| o.vertices()).collect();
        Ok((q, GaiqnCache { gat: gat_caches, vertices, pooled, phi, offsets, cosine, head }))
    }

    pub fn backward(&self, p: &ParameterSet, cache: &GaiqnCache, d_q: &Array2<f64>, g: &mut ParameterSet) {
        let d_z = self.head.backward(p, &cache.head, d_q, g);
        let mut d_phi = Array2::zeros(cache.phi.dim());
        for b in 0..cache.vertices.len() {
            let rows = s![cache.offsets[b]..cache.offsets[b + 1], ..];
            let (d_pooled, d_phi_b) =
                modulate_backward(cache.pooled.row(b), &cache.phi.slice(rows).to_owned(), &d_z.slice(rows).to_owned());
            d_phi.slice_mut(rows).assign(&d_phi_b);
            let mut d_x = graph_pool_backward(cache.vertices[b], &d_pooled);
            for (layer, c) in self.gat.iter().zip(&cache.gat[b]).rev() {
                d_x = layer.backward(p, c, &d_x, g);
            }
        }
        self.cosine.backward(p, &cache.cosine, &d_phi, g);
    }

    /// `K x I_pos` quantile values of one graph.
    pub fn quantile_values(&self, p: &ParameterSet, obs: &GraphObservation, taus: &[f64]) -> Result<Array2<f64>> {
        Ok(self.forward(p, &[obs], &[taus.to_vec()])?.0)
    }

    /// `Q(s, a)`: mean over the quantile levels.
    pub fn q_values(&self, p: &ParameterSet, obs: &GraphObservation, taus: &[f64]) -> Result<Vec<f64>> {
        Ok(mean_rows(self.quantile_values(p, obs, taus)?.view()))
    }
}

pub(crate) fn mean_rows(z: ArrayView2<'_, f64>) -> Vec<f64> {
    z.mean_axis(Axis(0)).map(|m| m.to_vec()).unwrap_or_default()
}

/// Quantile values of a joint action: per level, the mean over its positions.
pub fn joint_quantiles(z: ArrayView2<'_, f64>, action: &Selection) -> Vec<f64> {
    let m = action.len() as f64;
    z.rows().into_iter().map(|row| action.indices().iter().map(|&i| row[i]).sum::<f64>() / m).collect()
}

/// `delta[k, k'] = r + gamma Z'(s', a*, tau'_k') - Z(s, a, tau_k)`; the
/// bootstrap term is dropped for terminal transitions.
pub fn quantile_td_errors(reward: f64, gamma: f64, terminal: bool, online: &[f64], target_next: &[f64]) -> Array2<f64> {
    let boot = if terminal { 0.0 } else { gamma };
    Array2::from_shape_fn((online.len(), target_next.len()), |(k, j)| reward + boot * target_next[j] - online[k])
}

#[derive(Debug, Clone)]
pub struct GaiqnTransition {
    pub state: Arc<GraphObservation>,
    pub action: Selection,
    pub reward: f64,
    /// `None` for the last slot of an episode.
    pub next_state: Option<Arc<GraphObservation>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub loss: f64,
    pub mean_abs_td: f64,
}

#[derive(Debug, Clone)]
pub struct GaiqnAgent {
    pub net: GaiqnNet,
    pub online: ParameterSet,
    pub target: ParameterSet,
    pub adam: Adam,
    pub buffer: PrioritizedBuffer<GaiqnTransition>,
    pub antennas: usize,
    pub cfg: TrainConfig,
}

impl GaiqnAgent {
    pub fn new(features: usize, actions: usize, antennas: usize, cfg: &TrainConfig, seeds: &SeedStream) -> Result<Self> {
        if antennas == 0 || antennas > actions {
            return Err(Error::SelectionTooLarge { k: antennas, available: actions });
        }
        let mut rng = seeds.rng(0, 0, Purpose::Init);
        let (net, online) = GaiqnNet::new(features, actions, cfg, &mut rng);
        Ok(Self {
            adam: Adam::new(AdamConfig::with_rate(cfg.learning_rate()), &online),
            target: online.clone(),
            net,
            online,
            buffer: PrioritizedBuffer::new(cfg.buffer_capacity),
            antennas,
            cfg: cfg.clone(),
        })
    }

    pub fn q_values<R: Rng + ?Sized>(&self, obs: &GraphObservation, rng: &mut R) -> Result<Vec<f64>> {
        let taus = sample_taus(self.cfg.quantiles, rng);
        self.net.q_values(&self.online, obs, &taus)
    }

    pub fn act(&self, obs: &GraphObservation, epsilon: f64, quantile_rng: &mut ChaCha8Rng, explore_rng: &mut ChaCha8Rng) -> Result<Selection> {
        let q = self.q_values(obs, quantile_rng)?;
        topk_epsilon_greedy(&q, self.antennas, epsilon, explore_rng)
    }

    /// One prioritized minibatch step. `None` while the buffer is smaller than
    /// a batch.
    pub fn update<R: Rng + ?Sized>(&mut self, beta: f64, rng: &mut R) -> Result<Option<UpdateStats>> {
        let cfg = &self.cfg;
        let Some(batch) = self.buffer.sample(cfg.batch_size, beta, rng) else {
            return Ok(None);
        };
        let items: Vec<GaiqnTransition> = batch.indices.iter().map(|&i| self.buffer.get(i).clone()).collect();
        let taus: Vec<Vec<f64>> = items.iter().map(|_| sample_taus(cfg.quantiles, rng)).collect();
        let target_taus: Vec<Vec<f64>> = if cfg.shared_quantiles {
            taus.clone()
        } else {
            items.iter().map(|_| sample_taus(cfg.target_quantiles, rng)).collect()
        };

        // Bootstrap quantiles for the non-terminal transitions.
        let live: Vec<usize> = (0..items.len()).filter(|&i| items[i].next_state.is_some()).collect();
        let mut target_next = vec![vec![0.0; cfg.target_quantiles]; items.len()];
        if !live.is_empty() {
            let next: Vec<&GraphObservation> = live.iter().map(|&i| items[i].next_state.as_deref().expect("live")).collect();
            let live_target_taus: Vec<Vec<f64>> = live.iter().map(|&i| target_taus[i].clone()).collect();
            let (z_target, _) = self.net.forward(&self.target, &next, &live_target_taus)?;
            let z_select = if cfg.double_q {
                let live_taus: Vec<Vec<f64>> = live.iter().map(|&i| taus[i].clone()).collect();
                Some(self.net.forward(&self.online, &next, &live_taus)?.0)
            } else {
                None
            };
            let mut row_t = 0;
            let mut row_s = 0;
            for &i in &live {
                let kt = target_taus[i].len();
                let zt = z_target.slice(s![row_t..row_t + kt, ..]);
                let q = match &z_select {
                    Some(z) => mean_rows(z.slice(s![row_s..row_s + taus[i].len(), ..])),
                    None => mean_rows(zt),
                };
                let best = Selection::new(topk_indices(&q, self.antennas)?);
                target_next[i] = joint_quantiles(zt, &best);
                row_t += kt;
                row_s += taus[i].len();
            }
        }

        let states: Vec<&GraphObservation> = items.iter().map(|t| t.state.as_ref()).collect();
        let (z, cache) = self.net.forward(&self.online, &states, &taus)?;
        let n = items.len() as f64;
        let mut d_q = Array2::zeros(z.dim());
        let mut loss = 0.0;
        let mut priorities = Vec::with_capacity(items.len());
        let mut row = 0;
        for (i, t) in items.iter().enumerate() {
            let k = taus[i].len();
            let zs = z.slice(s![row..row + k, ..]);
            let online = joint_quantiles(zs, &t.action);
            let delta = quantile_td_errors(t.reward, cfg.gamma, t.next_state.is_none(), &online, &target_next[i]);
            let w = batch.weights[i];
            loss += w * quantile_huber_loss(&delta, &taus[i], cfg.huber_kappa) / n;
            let d_delta = quantile_huber_loss_grad(&delta, &taus[i], cfg.huber_kappa);
            let per_position = 1.0 / t.action.len() as f64;
            for kk in 0..k {
                let d_online = -d_delta.row(kk).sum() * w / n;
                for &a in t.action.indices() {
                    d_q[(row + kk, a)] += d_online * per_position;
                }
            }
            priorities.push(delta.iter().map(|d| d.abs()).sum::<f64>() / delta.len() as f64);
            row += k;
        }
        let mut grads = self.online.zeros_like();
        self.net.backward(&self.online, &cache, &d_q, &mut grads);
        if let Some(max) = cfg.max_grad_norm {
            let norm = grads.norm();
            if norm > max {
                grads.scale(max / norm);
            }
        }
        self.adam.step(&mut self.online, &grads);
        self.target.soft_update(&self.online, cfg.soft_update);
        self.buffer.update_priorities(&batch.indices, &priorities);
        let mean_abs_td = priorities.iter().sum::<f64>() / n;
        Ok(Some(UpdateStats { loss, mean_abs_td }))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        save_checkpoint(&self.online, path)
    }
}

/// Feature width of the MA graph for `system` under `graph`.
pub fn ma_feature_width(system: &MaSystem, graph: &GraphConfig) -> usize {
    3 + graph.channel_features.width(system.antennas)
}

/// Runs one episode. With `learn`, transitions are stored and the
/// configured number of updates follows the slot loop.
fn run_episode(
    agent: &mut GaiqnAgent,
    system: &MaSystem,
    graph: &GraphConfig,
    seeds: &SeedStream,
    episode: u64,
    epsilon: &mut dyn FnMut() -> f64,
    learn: bool,
) -> Result<(Vec<Reward>, Vec<GaiqnTransition>)> {
    let settings = graph.settings(system.area.side);
    let bs = bs_position(&system.area);
    let mut previous: Option<ChannelMatrix> = None;
    let mut rewards = Vec::with_capacity(system.area.slots);
    let mut steps: Vec<(Arc<GraphObservation>, Selection, f64)> = Vec::with_capacity(system.area.slots);
    for t in 0..system.area.slots as u64 {
        let slot = system.slot(seeds, episode, t)?;
        let obs = Arc::new(build_ma_graph(&slot.users, previous.as_ref(), system.antennas, [bs[0], bs[1]], &settings)?);
        let mut q_rng = seeds.rng(episode, t, Purpose::Quantiles);
        let mut x_rng = seeds.rng(episode, t, Purpose::Exploration);
        let action = agent.act(&obs, epsilon(), &mut q_rng, &mut x_rng)?;
        let h = slot.table.select_colliding(&action)?;
        let reward = ma_reward(&h, &action, agent.cfg.penalty)?;
        rewards.push(reward);
        if learn {
            steps.push((obs, action, reward.value));
        }
        previous = Some(h);
    }
    let mut transitions = Vec::with_capacity(steps.len());
    for i in 0..steps.len() {
        let next_state = steps.get(i + 1).map(|s| s.0.clone());
        let (state, action, reward) = steps[i].clone();
        transitions.push(GaiqnTransition { state, action, reward, next_state });
    }
    Ok((rewards, transitions))
}

pub(crate) fn summarize(episode: usize, rewards: &[Reward]) -> EpisodeLog {
    let n = rewards.len().max(1) as f64;
    EpisodeLog {
        episode,
        cum_reward: rewards.iter().map(|r| r.value).sum(),
        mean_erank: rewards.iter().map(|r| r.erank).sum::<f64>() / n,
        mean_penalty: rewards.iter().map(|r| r.penalty).sum::<f64>() / n,
    }
}

/// Train from scratch: `cfg.episodes` episodes of `T` slots each, one
/// environment step per slot and `cfg.updates_per_episode` minibatch updates
/// after every episode. `on_episode` sees each log row as it is produced.
pub fn train_gaiqn(
    system: &MaSystem,
    cfg: &TrainConfig,
    graph: &GraphConfig,
    seeds: &SeedStream,
    mut on_episode: impl FnMut(&EpisodeLog),
) -> Result<(GaiqnAgent, Vec<EpisodeLog>)> {
    cfg.validate()?;
    graph.validate()?;
    let mut agent = GaiqnAgent::new(ma_feature_width(system, graph), system.candidates(), system.antennas, cfg, seeds)?;
    let schedule = cfg.epsilon();
    let mut step: u64 = 0;
    let mut log = Vec::with_capacity(cfg.episodes);
    for e in 0..cfg.episodes {
        let mut eps = || {
            let v = schedule.value(step);
            step += 1;
            v
        };
        let (rewards, transitions) = run_episode(&mut agent, system, graph, seeds, e as u64, &mut eps, true)?;
        for t in transitions {
            agent.buffer.push(t);
        }
        let beta = beta_schedule(cfg.beta_start, e, cfg.episodes);
        for u in 0..cfg.updates_per_episode {
            let mut rng = seeds.rng(e as u64, u as u64, Purpose::Replay);
            agent.update(beta, &mut rng)?;
        }
        let row = summarize(e, &rewards);
        on_episode(&row);
        log.push(row);
    }
    Ok((agent, log))
}

/// Greedy rollouts of a trained agent; returns the effective rank of every
/// slot. Environment draws come from `env_seeds`, quantile levels from
/// `policy_seeds`.
pub fn evaluate_gaiqn(
    agent: &GaiqnAgent,
    system: &MaSystem,
    graph: &GraphConfig,
    env_seeds: &SeedStream,
    policy_seeds: &SeedStream,
    episodes: usize,
) -> Result<Vec<f64>> {
    let settings = graph.settings(system.area.side);
    let bs = bs_position(&system.area);
    let mut out = Vec::with_capacity(episodes * system.area.slots);
    for e in 0..episodes as u64 {
        let mut previous: Option<ChannelMatrix> = None;
        for t in 0..system.area.slots as u64 {
            let slot = system.slot(env_seeds, e, t)?;
            let obs = build_ma_graph(&slot.users, previous.as_ref(), system.antennas, [bs[0], bs[1]], &settings)?;
            let mut q_rng = policy_seeds.rng(e, t, Purpose::Quantiles);
            let mut x_rng = policy_seeds.rng(e, t, Purpose::Exploration);
            let action = agent.act(&obs, 0.0, &mut q_rng, &mut x_rng)?;
            let h = slot.channel(&action)?;
            out.push(effective_rank(&h)?);
            previous = Some(h);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn reward_penalty() {
        let h = ChannelMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let r = ma_reward(&h, &Selection::new(vec![0, 1]), 0.5).unwrap();
        assert_eq!(r.value, r.erank);
        assert_eq!(r.penalty, 0.0);
        let r = ma_reward(&h, &Selection::new(vec![3, 3]), 0.5).unwrap();
        assert!((r.value - (r.erank - 0.5)).abs() < 1e-15);
        let h3 = ChannelMatrix::from_real(3, 1, &[1.0, 1.0, 1.0]);
        let r = ma_reward(&h3, &Selection::new(vec![2, 2, 2]), 0.5).unwrap();
        assert!((r.penalty - 1.5).abs() < 1e-15);
    }

    #[test]
    fn td_errors() {
        let d = quantile_td_errors(1.0, 0.98, true, &[0.25, -0.5], &[9.0, 9.0, 9.0]);
        assert_eq!(d.dim(), (2, 3));
        assert!(d.row(0).iter().all(|&v| v == 0.75));
        assert!(d.row(1).iter().all(|&v| v == 1.5));
        let g0 = quantile_td_errors(1.0, 0.0, false, &[0.25], &[9.0]);
        assert_eq!(g0[(0, 0)], 0.75);
        let live = quantile_td_errors(2.0, 0.5, false, &[1.0], &[3.0]);
        assert_eq!(live[(0, 0)], 2.0 + 0.5 * 3.0 - 1.0);
    }

    #[test]
    fn joint_quantile_is_mean_of_positions() {
        let z = arr2(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        assert_eq!(joint_quantiles(z.view(), &Selection::new(vec![0, 2])), vec![2.0, 5.0]);
    }

    #[test]
    fn taus_in_open_interval() {
        let mut rng = SeedStream::new(3).rng(0, 0, Purpose::Quantiles);
        let t = sample_taus(1000, &mut rng);
        assert!(t.iter().all(|&x| x > 0.0 && x < 1.0));
    }
}
