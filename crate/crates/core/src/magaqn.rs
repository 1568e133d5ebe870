//! Multi-agent graph attention Q network (MAGAQN) for PA placement.
//!
//! Each waveguide is an agent with its own parameters and replay buffer. An
//! agent sees the graph of users in its region, embeds it with a GAT layer
//! and sum pooling, advances a GRU hidden state once per slot and scores
//! every candidate position with a dueling head. All agents receive the same
//! reward.
//!
//! Replay uses stored hidden states: a transition keeps the GRU state the
//! agent had when it acted, and an update replays that single step.

use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::gaiqn::summarize;
use crate::graph::{build_pa_observations, GraphConfig, GraphObservation};
use crate::linalg::{effective_rank, ChannelMatrix};
use crate::nn::checkpoint::save_checkpoint;
use crate::nn::dueling::DuelingCache;
use crate::nn::gat::{graph_pool, graph_pool_backward, GatCache};
use crate::nn::gru::GruCache;
use crate::nn::{Adam, AdamConfig, DuelingHead, GatLayer, Gru, ParameterSet};
use crate::rl::{beta_schedule, topk_epsilon_greedy, topk_indices, PrioritizedBuffer};
use crate::seed::{Purpose, SeedStream};
use crate::selection::Selection;
use crate::system::PaSystem;
use crate::train::{EpisodeLog, Reward, TrainConfig};

/// `erank(H_pa) - alpha x (same-waveguide colliding pairs, all waveguides)`.
pub fn pa_reward(h: &ChannelMatrix, selections: &[Selection], alpha: f64) -> Result<Reward> {
    let pairs = selections.iter().map(Selection::collision_pairs).sum();
    Ok(Reward::new(effective_rank(h)?, pairs, alpha))
}

/// Scalar residual `r + gamma Q'(o', a*) - Q(o, a)`.
pub fn td_residual(reward: f64, gamma: f64, terminal: bool, online: f64, target_next: f64) -> f64 {
    let boot = if terminal { 0.0 } else { gamma * target_next };
    reward + boot - online
}

/// Mean of the selected positions' values.
pub fn joint_value(q: &[f64], action: &Selection) -> f64 {
    action.indices().iter().map(|&i| q[i]).sum::<f64>() / action.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagaqnNet {
    pub gat: Vec<GatLayer>,
    pub gru: Gru,
    pub head: DuelingHead,
    pub features: usize,
    pub actions: usize,
}

#[derive(Debug, Clone)]
pub struct MagaqnCache {
    gat: Vec<Vec<GatCache>>,
    vertices: Vec<usize>,
    gru: GruCache,
    head: DuelingCache,
}

impl MagaqnNet {
    pub fn new<R: Rng + ?Sized>(features: usize, actions: usize, cfg: &TrainConfig, rng: &mut R) -> (Self, ParameterSet) {
        let mut p = ParameterSet::new();
        let mut gat = Vec::with_capacity(cfg.gat_layers);
        let mut width = features;
        for l in 0..cfg.gat_layers {
            gat.push(GatLayer::new(&mut p, &format!("gat{l}"), width, cfg.embedding, rng));
            width = cfg.embedding;
        }
        let gru = Gru::new(&mut p, "gru", cfg.embedding, cfg.embedding, rng);
        let head = DuelingHead::new(&mut p, "head", cfg.embedding, cfg.hidden, actions, rng);
        (Self { gat, gru, head, features, actions }, p)
    }

    pub fn hidden_width(&self) -> usize {
        self.gru.hidden
    }

    /// Batched step: row `b` of `hidden` is the GRU state before `obs[b]`.
    /// Returns `B x I_pos` values and the next hidden states.
    pub fn forward(
        &self,
        p: &ParameterSet,
        obs: &[&GraphObservation],
        hidden: &Array2<f64>,
    ) -> Result<(Array2<f64>, Array2<f64>, MagaqnCache)> {
        if hidden.dim() != (obs.len(), self.hidden_width()) {
            return Err(Error::Dimension { expected: obs.len() * self.hidden_width(), got: hidden.len() });
        }
        let mut pooled = Array2::zeros((obs.len(), self.gru.inputs));
        let mut gat_caches = Vec::with_capacity(obs.len());
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
        let (next, gru) = self.gru.forward(p, &pooled, hidden);
        let (q, head) = self.head.forward(p, &next);
        let vertices = obs.iter().map(|o| o.vertices()).collect();
        Ok((q, next, MagaqnCache { gat: gat_caches, vertices, gru, head }))
    }

    /// Gradient of the values only; the incoming hidden state is a constant.
    pub fn backward(&self, p: &ParameterSet, cache: &MagaqnCache, d_q: &Array2<f64>, g: &mut ParameterSet) {
        let d_next = self.head.backward(p, &cache.head, d_q, g);
        let (d_pooled, _) = self.gru.backward(p, &cache.gru, &d_next, g);
        for (b, caches) in cache.gat.iter().enumerate() {
            let d_row: Array1<f64> = d_pooled.row(b).to_owned();
            let mut d_x = graph_pool_backward(cache.vertices[b], &d_row);
            for (layer, c) in self.gat.iter().zip(caches).rev() {
                d_x = layer.backward(p, c, &d_x, g);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PaTransition {
    pub observation: Arc<GraphObservation>,
    pub hidden: Array1<f64>,
    pub action: Selection,
    pub reward: f64,
    /// Next observation and the hidden state produced while acting; `None`
    /// for the last slot of an episode.
    pub next: Option<(Arc<GraphObservation>, Array1<f64>)>,
}

#[derive(Debug, Clone)]
pub struct MagaqnAgent {
    pub net: MagaqnNet,
    pub online: ParameterSet,
    pub target: ParameterSet,
    pub adam: Adam,
    pub buffer: PrioritizedBuffer<PaTransition>,
    pub hidden: Array1<f64>,
    pub antennas: usize,
}

impl MagaqnAgent {
    pub fn new<R: Rng + ?Sized>(features: usize, actions: usize, antennas: usize, cfg: &TrainConfig, rng: &mut R) -> Result<Self> {
        if antennas == 0 || antennas > actions {
            return Err(Error::SelectionTooLarge { k: antennas, available: actions });
        }
        let (net, online) = MagaqnNet::new(features, actions, cfg, rng);
        Ok(Self {
            adam: Adam::new(AdamConfig::with_rate(cfg.learning_rate()), &online),
            target: online.clone(),
            hidden: Array1::zeros(net.hidden_width()),
            net,
            online,
            buffer: PrioritizedBuffer::new(cfg.buffer_capacity),
            antennas,
        })
    }

    pub fn reset(&mut self) {
        self.hidden.fill(0.0);
    }

    /// Values at the current hidden state, and the hidden state after `obs`.
    pub fn q_values(&self, obs: &GraphObservation) -> Result<(Vec<f64>, Array1<f64>)> {
        let h = self.hidden.clone().insert_axis(Axis(0));
        let (q, next, _) = self.net.forward(&self.online, &[obs], &h)?;
        Ok((q.row(0).to_vec(), next.row(0).to_owned()))
    }

    /// Pick `M_pa` distinct positions and advance the hidden state.
    pub fn act<R: Rng + ?Sized>(&mut self, obs: &GraphObservation, epsilon: f64, rng: &mut R) -> Result<Selection> {
        let (q, next) = self.q_values(obs)?;
        self.hidden = next;
        topk_epsilon_greedy(&q, self.antennas, epsilon, rng)
    }

    pub fn update<R: Rng + ?Sized>(&mut self, cfg: &TrainConfig, beta: f64, rng: &mut R) -> Result<Option<f64>> {
        let Some(batch) = self.buffer.sample(cfg.batch_size, beta, rng) else {
            return Ok(None);
        };
        let items: Vec<PaTransition> = batch.indices.iter().map(|&i| self.buffer.get(i).clone()).collect();
        let width = self.net.hidden_width();
        let stack = |rows: &[&Array1<f64>]| {
            let mut m = Array2::zeros((rows.len(), width));
            for (r, h) in rows.iter().enumerate() {
                m.row_mut(r).assign(h);
            }
            m
        };

        let live: Vec<usize> = (0..items.len()).filter(|&i| items[i].next.is_some()).collect();
        let mut target_next = vec![0.0; items.len()];
        if !live.is_empty() {
            let next_obs: Vec<&GraphObservation> = live.iter().map(|&i| items[i].next.as_ref().expect("live").0.as_ref()).collect();
            let next_h: Vec<&Array1<f64>> = live.iter().map(|&i| &items[i].next.as_ref().expect("live").1).collect();
            let h = stack(&next_h);
            let (q_target, _, _) = self.net.forward(&self.target, &next_obs, &h)?;
            let q_select = if cfg.double_q { self.net.forward(&self.online, &next_obs, &h)?.0 } else { q_target.clone() };
            for (r, &i) in live.iter().enumerate() {
                let best = Selection::new(topk_indices(&q_select.row(r).to_vec(), self.antennas)?);
                target_next[i] = joint_value(&q_target.row(r).to_vec(), &best);
            }
        }

        let obs: Vec<&GraphObservation> = items.iter().map(|t| t.observation.as_ref()).collect();
        let hidden: Vec<&Array1<f64>> = items.iter().map(|t| &t.hidden).collect();
        let (q, _, cache) = self.net.forward(&self.online, &obs, &stack(&hidden))?;
        let n = items.len() as f64;
        let mut d_q = Array2::zeros(q.dim());
        let mut loss = 0.0;
        let mut priorities = Vec::with_capacity(items.len());
        for (b, t) in items.iter().enumerate() {
            let online = joint_value(&q.row(b).to_vec(), &t.action);
            let delta = td_residual(t.reward, cfg.gamma, t.next.is_none(), online, target_next[b]);
            let w = batch.weights[b];
            loss += w * delta * delta / n;
            let d_online = -2.0 * w * delta / n / t.action.len() as f64;
            for &a in t.action.indices() {
                d_q[(b, a)] += d_online;
            }
            priorities.push(delta.abs());
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
        Ok(Some(loss))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(&self.online, path)
    }
}

/// Per-agent random streams, so one agent's draws never shift another's.
pub fn agent_seeds(seeds: &SeedStream, k: usize) -> SeedStream {
    seeds.fork(0x4147_0000 + k as u64)
}

pub fn pa_feature_width(system: &PaSystem, graph: &GraphConfig) -> usize {
    3 + graph.channel_features.width(system.layout.waveguides)
}

/// One joint action per agent, in waveguide order. Every agent's hidden
/// state advances by one slot.
pub fn select_pa_actions<R: Rng>(
    agents: &mut [MagaqnAgent],
    observations: &[GraphObservation],
    epsilon: f64,
    rngs: &mut [R],
) -> Result<Vec<Selection>> {
    if agents.len() != observations.len() || agents.len() != rngs.len() {
        return Err(Error::Dimension { expected: agents.len(), got: observations.len() });
    }
    agents.iter_mut().zip(observations).zip(rngs.iter_mut()).map(|((a, o), r)| a.act(o, epsilon, r)).collect()
}

pub fn new_agents(system: &PaSystem, cfg: &TrainConfig, graph: &GraphConfig, seeds: &SeedStream) -> Result<Vec<MagaqnAgent>> {
    let features = pa_feature_width(system, graph);
    (0..system.layout.waveguides)
        .map(|k| {
            let mut rng = agent_seeds(seeds, k).rng(0, 0, Purpose::Init);
            MagaqnAgent::new(features, system.candidates(), system.layout.antennas_per_waveguide, cfg, &mut rng)
        })
        .collect()
}

struct Step {
    observations: Vec<Arc<GraphObservation>>,
    hidden: Vec<Array1<f64>>,
    actions: Vec<Selection>,
}

/// Runs one episode with every agent, returning the slot rewards. With
/// `store`, each agent's transitions go into its own buffer.
fn run_episode(
    agents: &mut [MagaqnAgent],
    system: &PaSystem,
    graph: &GraphConfig,
    env_seeds: &SeedStream,
    policy_seeds: &[SeedStream],
    episode: u64,
    epsilon: &mut dyn FnMut() -> f64,
    penalty: f64,
    store: bool,
) -> Result<Vec<Reward>> {
    let settings = graph.settings(system.area.side);
    for a in agents.iter_mut() {
        a.reset();
    }
    let mut previous: Option<ChannelMatrix> = None;
    let mut rewards = Vec::with_capacity(system.area.slots);
    let mut steps: Vec<Step> = Vec::with_capacity(system.area.slots);
    for t in 0..system.area.slots as u64 {
        let slot = system.slot(env_seeds, episode, t)?;
        let mut km = env_seeds.rng(episode, t, Purpose::KMeans);
        let (observations, _) = build_pa_observations(&slot.users, previous.as_ref(), &system.layout, &settings, &mut km)?;
        let hidden: Vec<Array1<f64>> = agents.iter().map(|a| a.hidden.clone()).collect();
        let eps = epsilon();
        let mut rngs: Vec<_> = policy_seeds.iter().map(|s| s.rng(episode, t, Purpose::Exploration)).collect();
        let actions = select_pa_actions(agents, &observations, eps, &mut rngs)?;
        let h = slot.table.assemble_colliding(&actions)?;
        rewards.push(pa_reward(&h, &actions, penalty)?);
        if store {
            steps.push(Step { observations: observations.into_iter().map(Arc::new).collect(), hidden, actions });
        }
        previous = Some(h);
    }
    if store {
        for (i, step) in steps.iter().enumerate() {
            for (k, agent) in agents.iter_mut().enumerate() {
                let next = steps.get(i + 1).map(|s| (s.observations[k].clone(), s.hidden[k].clone()));
                agent.buffer.push(PaTransition {
                    observation: step.observations[k].clone(),
                    hidden: step.hidden[k].clone(),
                    action: step.actions[k].clone(),
                    reward: rewards[i].value,
                    next,
                });
            }
        }
    }
    Ok(rewards)
}

/// Train all agents from scratch. Agent updates after each episode run in
/// parallel; each agent draws from its own replay stream.
pub fn train_magaqn(
    system: &PaSystem,
    cfg: &TrainConfig,
    graph: &GraphConfig,
    seeds: &SeedStream,
    mut on_episode: impl FnMut(&EpisodeLog),
) -> Result<(Vec<MagaqnAgent>, Vec<EpisodeLog>)> {
    use rayon::prelude::*;

    cfg.validate()?;
    graph.validate()?;
    let mut agents = new_agents(system, cfg, graph, seeds)?;
    let policy: Vec<SeedStream> = (0..agents.len()).map(|k| agent_seeds(seeds, k)).collect();
    let schedule = cfg.epsilon();
    let mut step: u64 = 0;
    let mut log = Vec::with_capacity(cfg.episodes);
    for e in 0..cfg.episodes {
        let mut eps = || {
            let v = schedule.value(step);
            step += 1;
            v
        };
        let rewards = run_episode(&mut agents, system, graph, seeds, &policy, e as u64, &mut eps, cfg.penalty, true)?;
        let beta = beta_schedule(cfg.beta_start, e, cfg.episodes);
        agents.par_iter_mut().zip(&policy).try_for_each(|(agent, s)| -> Result<()> {
            for u in 0..cfg.updates_per_episode {
                let mut rng = s.rng(e as u64, u as u64, Purpose::Replay);
                agent.update(cfg, beta, &mut rng)?;
            }
            Ok(())
        })?;
        let row = summarize(e, &rewards);
        on_episode(&row);
        log.push(row);
    }
    Ok((agents, log))
}

/// Greedy rollouts; effective rank of every slot.
pub fn evaluate_magaqn(
    agents: &mut [MagaqnAgent],
    system: &PaSystem,
    graph: &GraphConfig,
    env_seeds: &SeedStream,
    policy_seeds: &SeedStream,
    episodes: usize,
) -> Result<Vec<f64>> {
    let policy: Vec<SeedStream> = (0..agents.len()).map(|k| agent_seeds(policy_seeds, k)).collect();
    let mut out = Vec::with_capacity(episodes * system.area.slots);
    for e in 0..episodes as u64 {
        let rewards = run_episode(agents, system, graph, env_seeds, &policy, e, &mut || 0.0, 0.0, false)?;
        out.extend(rewards.iter().map(|r| r.erank));
    }
    for a in agents.iter_mut() {
        a.reset();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_penalties_add_across_waveguides() {
        let h = ChannelMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let clean = pa_reward(&h, &[Selection::new(vec![0, 1]), Selection::new(vec![0, 1])], 0.5).unwrap();
        assert_eq!(clean.value, clean.erank);
        let one = pa_reward(&h, &[Selection::new(vec![0, 1]), Selection::new(vec![4, 4])], 0.5).unwrap();
        assert!((one.value - (one.erank - 0.5)).abs() < 1e-15);
        let two = pa_reward(&h, &[Selection::new(vec![2, 2]), Selection::new(vec![4, 4])], 0.5).unwrap();
        assert!((two.penalty - 1.0).abs() < 1e-15);
    }

    #[test]
    fn residuals() {
        assert_eq!(td_residual(2.0, 0.98, true, 0.5, 100.0), 1.5);
        assert_eq!(td_residual(2.0, 0.0, false, 0.5, 100.0), 1.5);
        assert_eq!(td_residual(1.0, 0.5, false, 0.25, 2.0), 1.75);
    }

    #[test]
    fn empty_region_gives_defined_values() {
        let cfg = TrainConfig { embedding: 8, hidden: 8, ..TrainConfig::default() };
        let mut rng = SeedStream::new(1).rng(0, 0, Purpose::Init);
        let mut agent = MagaqnAgent::new(5, 6, 2, &cfg, &mut rng).unwrap();
        let obs = GraphObservation { features: Array2::zeros((0, 5)), adjacency: Array2::from_elem((0, 0), false), users: vec![] };
        let (q, _) = agent.q_values(&obs).unwrap();
        assert!(q.iter().all(|v| v.is_finite()));
        let a = agent.act(&obs, 0.0, &mut rng).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.collision_pairs(), 0);
    }
}
