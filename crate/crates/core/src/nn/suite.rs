//! Finite-difference checks of every layer and of both agent networks.
//!
//! Each probe draws fresh parameters and inputs, contracts the output with a
//! random matrix to get a scalar loss and compares the backward pass with
//! central differences, inputs included. Probe points that sit within one
//! step of a ReLU or LeakyReLU kink are redrawn: there the one-sided
//! differences disagree and the central difference is meaningless.

use ndarray::{Array2, Axis};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::cosine::{modulate, modulate_backward};
use super::gradcheck::{numeric_gradient_check, GradCheckReport, DEFAULT_STEP};
use super::loss::{quantile_huber_loss, quantile_huber_loss_grad};
use super::params::ParameterSet;
use super::{CosineEmbedding, Dense, DuelingHead, GatLayer, Gru};
use crate::gaiqn::GaiqnNet;
use crate::graph::GraphObservation;
use crate::magaqn::MagaqnNet;
use crate::seed::{Purpose, SeedStream};
use crate::train::TrainConfig;

pub const DEFAULT_PROBES: usize = 10;
pub const TOLERANCE: f64 = 1e-4;

/// Largest redraw count before a layer is reported as unsmooth.
const MAX_REDRAWS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCheck {
    pub layer: String,
    pub probes: usize,
    pub redraws: usize,
    pub scalars: usize,
    pub max_relative_error: f64,
    pub worst: Option<String>,
}

impl LayerCheck {
    pub fn passed(&self) -> bool {
        self.probes > 0 && self.max_relative_error < TOLERANCE
    }
}

type LossFn = Box<dyn Fn(&ParameterSet) -> (f64, ParameterSet)>;

fn normal(rng: &mut dyn RngCore, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut *rng))
}

/// True when forward and backward one-sided differences agree for every
/// scalar, i.e. no kink lies within `step` of the point.
fn locally_smooth(params: &ParameterSet, step: f64, loss: &dyn Fn(&ParameterSet) -> f64) -> bool {
    let base = loss(params);
    let mut probe = params.clone();
    for id in params.ids().collect::<Vec<_>>() {
        for flat in 0..params.get(id).len() {
            let original = params.get(id).as_slice_memory_order().expect("contiguous")[flat];
            let set = |p: &mut ParameterSet, v: f64| p.get_mut(id).as_slice_memory_order_mut().expect("contiguous")[flat] = v;
            set(&mut probe, original + step);
            let forward = (loss(&probe) - base) / step;
            set(&mut probe, original - step);
            let backward = (base - loss(&probe)) / step;
            set(&mut probe, original);
            if (forward - backward).abs() > 1e-3 * forward.abs().max(backward.abs()).max(1.0) {
                return false;
            }
        }
    }
    true
}

fn dense_probe(rng: &mut dyn RngCore) -> (ParameterSet, LossFn) {
    let mut p = ParameterSet::new();
    let layer = Dense::new(&mut p, "dense", 4, 3, rng);
    let x = p.add("input", normal(rng, 5, 4));
    let c = normal(rng, 5, 3);
    let f = move |q: &ParameterSet| {
        let y = layer.forward(q, q.get(x));
        let mut g = q.zeros_like();
        let dx = layer.backward(q, q.get(x), &c, &mut g);
        *g.get_mut(x) += &dx;
        ((&y * &c).sum(), g)
    };
    (p, Box::new(f))
}

fn random_adjacency(rng: &mut dyn RngCore, v: usize) -> Array2<bool> {
    let mut a = Array2::from_elem((v, v), false);
    for i in 0..v {
        a[(i, i)] = true;
        for j in 0..i {
            let e = rng.random_bool(0.5);
            a[(i, j)] = e;
            a[(j, i)] = e;
        }
    }
    a
}

fn gat_probe(rng: &mut dyn RngCore) -> (ParameterSet, LossFn) {
    let mut p = ParameterSet::new();
    let layer = GatLayer::new(&mut p, "gat", 4, 3, rng);
    let x = p.add("input", normal(rng, 5, 4));
    let adjacency = random_adjacency(rng, 5);
    let c = normal(rng, 5, 3);
    let f = move |q: &ParameterSet| {
        let (y, cache) = layer.forward(q, q.get(x), &adjacency);
        let mut g = q.zeros_like();
        let dx = layer.backward(q, &cache, &c, &mut g);
        *g.get_mut(x) += &dx;
        ((&y * &c).sum(), g)
    };
    (p, Box::new(f))
}

fn cosine_probe(rng: &mut dyn RngCore) -> (ParameterSet, LossFn) {
    let mut p = ParameterSet::new();
    let layer = CosineEmbedding::new(&mut p, "cosine", 6, 5, rng);
    let z = p.add("input", normal(rng, 1, 5));
    let taus: Vec<f64> = (0..4).map(|_| rng.random_range(0.01..0.99)).collect();
    let c = normal(rng, 4, 5);
    let f = move |q: &ParameterSet| {
        let (phi, cache) = layer.forward(q, &taus);
        let zrow = q.get(z).row(0).to_owned();
        let y = modulate(zrow.view(), &phi);
        let mut g = q.zeros_like();
        let (dz, dphi) = modulate_backward(zrow.view(), &phi, &c);
        layer.backward(q, &cache, &dphi, &mut g);
        *g.get_mut(z) += &dz.insert_axis(Axis(0));
        ((&y * &c).sum(), g)
    };
    (p, Box::new(f))
}

fn dueling_probe(rng: &mut dyn RngCore) -> (ParameterSet, LossFn) {
    let mut p = ParameterSet::new();
    let head = DuelingHead::new(&mut p, "head", 4, 5, 6, rng);
    let x = p.add("input", normal(rng, 3, 4));
    let c = normal(rng, 3, 6);
    let f = move |q: &ParameterSet| {
        let (y, cache) = head.forward(q, q.get(x));
        let mut g = q.zeros_like();
        let dx = head.backward(q, &cache, &c, &mut g);
        *g.get_mut(x) += &dx;
        ((&y * &c).sum(), g)
    };
    (p, Box::new(f))
}

fn gru_probe(rng: &mut dyn RngCore) -> (ParameterSet, LossFn) {
    let mut p = ParameterSet::new();
    let cell = Gru::new(&mut p, "gru", 3, 4, rng);
    let z = p.add("input", normal(rng, 2, 3));
    let h = p.add("hidden", normal(rng, 2, 4).mapv(f64::tanh));
    let c = normal(rng, 2, 4);
    let f = move |q: &ParameterSet| {
        let (y, cache) = cell.forward(q, q.get(z), q.get(h));
        let mut g = q.zeros_like();
        let (dz, dh) = cell.backward(q, &cache, &c, &mut g);
        *g.get_mut(z) += &dz;
        *g.get_mut(h) += &dh;
        ((&y * &c).sum(), g)
    };
    (p, Box::new(f))
}

fn huber_probe(rng: &mut dyn RngCore) -> (ParameterSet, LossFn) {
    let mut p = ParameterSet::new();
    let delta = p.add("delta", normal(rng, 3, 4).mapv(|v| 2.0 * v));
    let taus: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..0.99)).collect();
    let kappa = 1.0;
    let f = move |q: &ParameterSet| {
        let mut g = q.zeros_like();
        *g.get_mut(delta) += &quantile_huber_loss_grad(q.get(delta), &taus, kappa);
        (quantile_huber_loss(q.get(delta), &taus, kappa), g)
    };
    (p, Box::new(f))
}

fn tiny_train_config() -> TrainConfig {
    TrainConfig { embedding: 5, hidden: 4, cosine_features: 3, quantiles: 3, target_quantiles: 3, ..TrainConfig::default() }
}

fn random_graph(rng: &mut dyn RngCore, v: usize, features: usize) -> GraphObservation {
    GraphObservation { features: normal(rng, v, features), adjacency: random_adjacency(rng, v), users: (0..v).collect() }
}

fn gaiqn_probe(rng: &mut dyn RngCore) -> (ParameterSet, LossFn) {
    let cfg = tiny_train_config();
    let (net, p) = GaiqnNet::new(4, 6, &cfg, rng);
    let graphs = [random_graph(rng, 3, 4), random_graph(rng, 4, 4)];
    let taus: Vec<Vec<f64>> = (0..2).map(|_| (0..3).map(|_| rng.random_range(0.01..0.99)).collect()).collect();
    let c = normal(rng, 6, 6);
    let f = move |q: &ParameterSet| {
        let refs: Vec<&GraphObservation> = graphs.iter().collect();
        let (z, cache) = net.forward(q, &refs, &taus).expect("shapes");
        let mut g = q.zeros_like();
        net.backward(q, &cache, &c, &mut g);
        ((&z * &c).sum(), g)
    };
    (p, Box::new(f))
}

fn magaqn_probe(rng: &mut dyn RngCore) -> (ParameterSet, LossFn) {
    let cfg = tiny_train_config();
    let (net, p) = MagaqnNet::new(4, 6, &cfg, rng);
    let graphs = [random_graph(rng, 3, 4), random_graph(rng, 2, 4)];
    let hidden = normal(rng, 2, net.hidden_width()).mapv(f64::tanh);
    let c = normal(rng, 2, 6);
    let f = move |q: &ParameterSet| {
        let refs: Vec<&GraphObservation> = graphs.iter().collect();
        let (y, _, cache) = net.forward(q, &refs, &hidden).expect("shapes");
        let mut g = q.zeros_like();
        net.backward(q, &cache, &c, &mut g);
        ((&y * &c).sum(), g)
    };
    (p, Box::new(f))
}

type Probe = fn(&mut dyn RngCore) -> (ParameterSet, LossFn);

pub fn probes() -> Vec<(&'static str, Probe)> {
    vec![
        ("dense", dense_probe as Probe),
        ("gat", gat_probe),
        ("cosine_embedding", cosine_probe),
        ("dueling", dueling_probe),
        ("gru", gru_probe),
        ("quantile_huber", huber_probe),
        ("gaiqn_network", gaiqn_probe),
        ("magaqn_network", magaqn_probe),
    ]
}

/// `probes` smooth probe points of one layer.
pub fn check_layer(name: &str, probe: Probe, probes: usize, seeds: &SeedStream) -> LayerCheck {
    let mut out = LayerCheck { layer: name.into(), probes: 0, redraws: 0, scalars: 0, max_relative_error: 0.0, worst: None };
    let mut draw = 0u64;
    while out.probes < probes && out.redraws < MAX_REDRAWS {
        let mut rng = seeds.rng(draw, 0, Purpose::Init);
        draw += 1;
        let (params, f) = probe(&mut rng);
        if !locally_smooth(&params, DEFAULT_STEP, &|q| f(q).0) {
            out.redraws += 1;
            continue;
        }
        let report: GradCheckReport = numeric_gradient_check(&params, DEFAULT_STEP, &f);
        out.probes += 1;
        out.scalars += report.checked;
        if report.max_relative_error >= out.max_relative_error {
            out.max_relative_error = report.max_relative_error;
            out.worst = report.worst.map(|(n, i)| format!("{n}[{i}]"));
        }
    }
    out
}

/// Every layer and both networks.
pub fn gradient_suite(seed: u64, probes: usize) -> Vec<LayerCheck> {
    self::probes()
        .into_iter()
        .enumerate()
        .map(|(i, (name, probe))| check_layer(name, probe, probes, &SeedStream::new(seed).fork(i as u64)))
        .collect()
}
