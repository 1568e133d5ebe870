use flexrank::gaiqn::{train_gaiqn, GaiqnAgent};
use flexrank::graph::{GraphConfig, GraphObservation};
use flexrank::ma::FadingConfig;
use flexrank::magaqn::{new_agents, select_pa_actions, train_magaqn};
use flexrank::nn::{GatLayer, ParameterSet};
use flexrank::pa::PaConfig;
use flexrank::rl::topk_indices;
use flexrank::scenario::{AreaConfig, Mobility};
use flexrank::seed::{Purpose, SeedStream};
use flexrank::system::{MaSystem, PaSystem};
use flexrank::train::{Algorithm, TrainConfig};
use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

fn small_train(algorithm: Algorithm, episodes: usize) -> TrainConfig {
    TrainConfig {
        episodes,
        updates_per_episode: 2,
        batch_size: 8,
        buffer_capacity: 500,
        embedding: 8,
        hidden: 8,
        quantiles: 4,
        target_quantiles: 4,
        cosine_features: 4,
        epsilon_anneal_steps: 50,
        ..TrainConfig::default()
    }
    .resolved(algorithm)
}

fn ma_system(mobility: Mobility) -> MaSystem {
    MaSystem::new(AreaConfig { users: 6, slots: 5, ..AreaConfig::default() }, FadingConfig::default(), 3, 3, 3, mobility).unwrap()
}

fn pa_system(mobility: Mobility) -> PaSystem {
    let cfg = PaConfig { waveguides: 3, antennas_per_waveguide: 2, ..PaConfig::default() };
    PaSystem::new(AreaConfig { users: 8, slots: 4, ..AreaConfig::default() }, &cfg, 7, 0.1, mobility).unwrap()
}

#[test]
fn gaiqn_buffer_actions_are_distinct_and_rewards_are_eranks() {
    let system = ma_system(Mobility::Stationary);
    let seeds = SeedStream::new(12);
    let (agent, log) = train_gaiqn(&system, &small_train(Algorithm::Gaiqn, 20), &GraphConfig::default(), &seeds, |_| {}).unwrap();
    let slot = system.slot(&seeds, 0, 0).unwrap();
    assert_eq!(agent.buffer.len(), 100);
    for t in agent.buffer.iter() {
        assert_eq!(t.action.len(), 3);
        assert_eq!(t.action.collision_pairs(), 0);
        assert_eq!(t.reward, slot.effective_rank(&t.action).unwrap());
    }
    for row in &log {
        assert_eq!(row.mean_penalty, 0.0);
        assert!((row.cum_reward - 5.0 * row.mean_erank).abs() < 1e-12);
    }
}

#[test]
fn gaiqn_episode_ends_are_terminal() {
    let system = ma_system(Mobility::Iid);
    let (agent, _) = train_gaiqn(&system, &small_train(Algorithm::Gaiqn, 4), &GraphConfig::default(), &SeedStream::new(1), |_| {}).unwrap();
    for (i, t) in agent.buffer.iter().enumerate() {
        assert_eq!(t.next_state.is_none(), i % 5 == 4);
    }
}

#[test]
fn gaiqn_training_is_deterministic() {
    let system = ma_system(Mobility::Iid);
    let cfg = small_train(Algorithm::Gaiqn, 8);
    let seeds = SeedStream::new(99);
    let (a, log_a) = train_gaiqn(&system, &cfg, &GraphConfig::default(), &seeds, |_| {}).unwrap();
    let (b, log_b) = train_gaiqn(&system, &cfg, &GraphConfig::default(), &seeds, |_| {}).unwrap();
    assert_eq!(log_a, log_b);
    for ((_, x), (_, y)) in a.online.iter().zip(b.online.iter()) {
        assert_eq!(x, y);
    }
}

#[test]
fn scalar_q_is_mean_of_quantiles() {
    let system = ma_system(Mobility::Iid);
    let seeds = SeedStream::new(4);
    let cfg = small_train(Algorithm::Gaiqn, 1);
    let agent = GaiqnAgent::new(3 + 3, 9, 3, &cfg, &seeds).unwrap();
    let obs = observation(&mut seeds.rng(0, 0, Purpose::Custom(0)), 6, 6);
    let taus = [0.1, 0.35, 0.6, 0.9];
    let z = agent.net.quantile_values(&agent.online, &obs, &taus).unwrap();
    let q = agent.net.q_values(&agent.online, &obs, &taus).unwrap();
    for (i, qi) in q.iter().enumerate() {
        let mean = z.column(i).mean().unwrap();
        assert!((qi - mean).abs() < 1e-12);
    }
    assert_eq!(system.candidates(), q.len());
}

fn observation(rng: &mut impl rand::Rng, v: usize, features: usize) -> GraphObservation {
    let mut adjacency = Array2::from_elem((v, v), false);
    for i in 0..v {
        adjacency[(i, i)] = true;
        for j in 0..i {
            let e = rng.random_bool(0.4);
            adjacency[(i, j)] = e;
            adjacency[(j, i)] = e;
        }
    }
    let features = Array2::from_shape_fn((v, features), |_| StandardNormal.sample(rng));
    GraphObservation { features, adjacency, users: (0..v).collect() }
}

#[test]
fn gat_is_permutation_equivariant() {
    let mut rng = SeedStream::new(8).rng(0, 0, Purpose::Init);
    let mut p = ParameterSet::new();
    let layer = GatLayer::new(&mut p, "gat", 4, 5, &mut rng);
    let obs = observation(&mut rng, 6, 4);
    let perm = [3usize, 0, 5, 1, 4, 2];
    let x2 = Array2::from_shape_fn((6, 4), |(r, c)| obs.features[(perm[r], c)]);
    let a2 = Array2::from_shape_fn((6, 6), |(r, c)| obs.adjacency[(perm[r], perm[c])]);
    let (y, _) = layer.forward(&p, &obs.features, &obs.adjacency);
    let (y2, _) = layer.forward(&p, &x2, &a2);
    for r in 0..6 {
        for c in 0..5 {
            assert!((y2[(r, c)] - y[(perm[r], c)]).abs() < 1e-12);
        }
    }
}

#[test]
fn magaqn_agents_share_rewards_and_start_from_zero_state() {
    let system = pa_system(Mobility::Iid);
    let seeds = SeedStream::new(5);
    let cfg = small_train(Algorithm::Magaqn, 6);
    let (agents, log) = train_magaqn(&system, &cfg, &GraphConfig::default(), &seeds, |_| {}).unwrap();
    assert_eq!(agents.len(), 3);
    let n = agents[0].buffer.len();
    assert_eq!(n, 24);
    for i in 0..n {
        let first = agents[0].buffer.get(i);
        for a in &agents {
            let t = a.buffer.get(i);
            assert_eq!(t.reward, first.reward);
            assert_eq!(t.action.len(), 2);
            assert_eq!(t.action.collision_pairs(), 0);
            if i % 4 == 0 {
                assert!(t.hidden.iter().all(|&h| h == 0.0));
            }
            assert_eq!(t.next.is_none(), i % 4 == 3);
        }
    }
    assert!(log.iter().all(|r| r.mean_penalty == 0.0));
    let (again, log2) = train_magaqn(&system, &cfg, &GraphConfig::default(), &seeds, |_| {}).unwrap();
    assert_eq!(log, log2);
    assert_eq!(agents[2].online.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>(), again[2].online.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>());
}

#[test]
fn perturbing_one_agent_leaves_the_others_alone() {
    let system = pa_system(Mobility::Iid);
    let seeds = SeedStream::new(6);
    let cfg = small_train(Algorithm::Magaqn, 1);
    let graph = GraphConfig::default();
    let mut agents = new_agents(&system, &cfg, &graph, &seeds).unwrap();
    let mut rng = seeds.rng(0, 0, Purpose::Custom(3));
    let width = 3 + 3;
    let observations: Vec<GraphObservation> = (0..3).map(|_| observation(&mut rng, 4, width)).collect();
    let before_q: Vec<Vec<f64>> = agents.iter().zip(&observations).map(|(a, o)| a.q_values(o).unwrap().0).collect();
    let mut rngs: Vec<_> = (0..3).map(|k| seeds.rng(0, k, Purpose::Exploration)).collect();
    let before = select_pa_actions(&mut agents, &observations, 0.0, &mut rngs).unwrap();
    for a in agents.iter_mut() {
        a.reset();
    }
    let ids: Vec<_> = agents[1].online.ids().collect();
    for id in ids {
        agents[1].online.get_mut(id).mapv_inplace(|v| v * -3.0 + 0.5);
    }
    let after_q: Vec<Vec<f64>> = agents.iter().zip(&observations).map(|(a, o)| a.q_values(o).unwrap().0).collect();
    let mut rngs: Vec<_> = (0..3).map(|k| seeds.rng(0, k, Purpose::Exploration)).collect();
    let after = select_pa_actions(&mut agents, &observations, 0.0, &mut rngs).unwrap();
    assert_eq!(before_q[0], after_q[0]);
    assert_eq!(before_q[2], after_q[2]);
    assert_ne!(before_q[1], after_q[1]);
    assert_eq!(before[0], after[0]);
    assert_eq!(before[2], after[2]);
    assert!(agents.iter().all(|a| a.hidden.iter().any(|&h| h != 0.0)));
}

#[test]
fn empty_region_still_acts() {
    let system = pa_system(Mobility::Iid);
    let seeds = SeedStream::new(2);
    let mut agents = new_agents(&system, &small_train(Algorithm::Magaqn, 1), &GraphConfig::default(), &seeds).unwrap();
    let empty = GraphObservation { features: Array2::zeros((0, 6)), adjacency: Array2::from_elem((0, 0), false), users: vec![] };
    let (q, next) = agents[0].q_values(&empty).unwrap();
    assert!(q.iter().all(|v| v.is_finite()));
    assert_eq!(next.len(), agents[0].net.hidden_width());
    let mut rng = seeds.rng(0, 0, Purpose::Exploration);
    let sel = agents[0].act(&empty, 0.0, &mut rng).unwrap();
    assert_eq!(sel.len(), 2);
    assert_eq!(sel.collision_pairs(), 0);
}

#[test]
fn top_two_of_three_values() {
    assert_eq!(topk_indices(&[0.3, 0.8, 0.1], 2).unwrap(), vec![1, 0]);
}
