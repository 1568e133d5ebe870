//! Per-slot user graphs.
//!
//! Vertices are users. In the MA system one graph covers every user and two
//! users are linked when they are close (`d <= d_threshold`) or seen from the
//! BS under similar angles (`|theta_n - theta_n'| <= theta_threshold`). In the
//! PA system each waveguide gets its own graph over the users of its region,
//! the band between its two neighbouring waveguides; users are split into
//! `M_pa` K-means clusters and edges only join users of the same cluster, with
//! angles measured from the cluster centroid.
//!
//! Feature rows are `[x/D, y/D, z/D, |h_n| / max|H|]`, with `h_n` the user's
//! column of the previous slot's channel (zeros before the first placement).

use ndarray::{Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans::{kmeans, ClusterAssignment};
use crate::linalg::ChannelMatrix;
use crate::pa::PaLayout;
use crate::scenario::{angle_between, UserState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphThresholds {
    /// Distance threshold (m).
    pub distance: f64,
    /// Angle threshold (rad).
    pub angle: f64,
}

impl Default for GraphThresholds {
    fn default() -> Self {
        Self { distance: 20.0, angle: 0.3 }
    }
}

impl GraphThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance > 0.0 && self.angle > 0.0) {
            return Err(Error::Config("graph thresholds must be positive".into()));
        }
        Ok(())
    }

    /// Edge rule shared by both systems.
    pub fn linked(&self, a: [f64; 2], b: [f64; 2], theta_a: f64, theta_b: f64) -> bool {
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        d <= self.distance || (theta_a - theta_b).abs() <= self.angle
    }
}

/// How complex channel entries become real features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelFeatures {
    /// `|h|`, one column per channel row.
    #[default]
    Magnitude,
    /// Real and imaginary parts, two columns per channel row.
    RealImag,
}

impl ChannelFeatures {
    pub fn width(self, channel_rows: usize) -> usize {
        match self {
            ChannelFeatures::Magnitude => channel_rows,
            ChannelFeatures::RealImag => 2 * channel_rows,
        }
    }
}

/// Graph section of an experiment config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub distance_threshold: f64,
    pub angle_threshold: f64,
    pub channel_features: ChannelFeatures,
}

impl Default for GraphConfig {
    fn default() -> Self {
        let t = GraphThresholds::default();
        Self { distance_threshold: t.distance, angle_threshold: t.angle, channel_features: ChannelFeatures::Magnitude }
    }
}

impl GraphConfig {
    pub fn settings(&self, side: f64) -> GraphSettings {
        GraphSettings {
            thresholds: GraphThresholds { distance: self.distance_threshold, angle: self.angle_threshold },
            features: self.channel_features,
            side,
        }
    }

    pub fn validate(&self) -> Result<()> {
        GraphThresholds { distance: self.distance_threshold, angle: self.angle_threshold }.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSettings {
    pub thresholds: GraphThresholds,
    pub features: ChannelFeatures,
    /// Area side used to scale positions.
    pub side: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphObservation {
    /// `V x F`.
    pub features: Array2<f64>,
    /// `V x V`, symmetric, ones on the diagonal.
    pub adjacency: Array2<bool>,
    /// Global user index of each vertex.
    pub users: Vec<usize>,
}

impl GraphObservation {
    pub fn vertices(&self) -> usize {
        self.users.len()
    }

    pub fn feature_width(&self) -> usize {
        self.features.ncols()
    }

    pub fn neighbours(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        let row: ArrayView1<'_, bool> = self.adjacency.row(v);
        row.into_iter().enumerate().filter(|(_, &e)| e).map(|(j, _)| j).collect::<Vec<_>>().into_iter()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&e| e).count()
    }
}

fn feature_rows(
    users: &[UserState],
    members: &[usize],
    channel: Option<&ChannelMatrix>,
    channel_rows: usize,
    settings: &GraphSettings,
) -> Result<Array2<f64>> {
    let width = 3 + settings.features.width(channel_rows);
    let mut x = Array2::zeros((members.len(), width));
    let scale = match channel {
        Some(h) => {
            if h.rows() != channel_rows {
                return Err(Error::Dimension { expected: channel_rows, got: h.rows() });
            }
            if h.cols() != users.len() {
                return Err(Error::Dimension { expected: users.len(), got: h.cols() });
            }
            let m = h.max_abs();
            if m > 0.0 {
                1.0 / m
            } else {
                0.0
            }
        }
        None => 0.0,
    };
    for (v, &n) in members.iter().enumerate() {
        for c in 0..3 {
            x[(v, c)] = users[n].position[c] / settings.side;
        }
        if let Some(h) = channel {
            for m in 0..channel_rows {
                let z = h.0[(m, n)] * scale;
                match settings.features {
                    ChannelFeatures::Magnitude => x[(v, 3 + m)] = z.norm(),
                    ChannelFeatures::RealImag => {
                        x[(v, 3 + 2 * m)] = z.re;
                        x[(v, 4 + 2 * m)] = z.im;
                    }
                }
            }
        }
    }
    Ok(x)
}

/// Graph state of the MA system. `channel` is the previous slot's `H_ma`
/// (`channel_rows = M_ma` rows) or `None` in the first slot.
pub fn build_ma_graph(
    users: &[UserState],
    channel: Option<&ChannelMatrix>,
    channel_rows: usize,
    bs_xy: [f64; 2],
    settings: &GraphSettings,
) -> Result<GraphObservation> {
    let members: Vec<usize> = (0..users.len()).collect();
    let features = feature_rows(users, &members, channel, channel_rows, settings)?;
    let theta: Vec<f64> = users.iter().map(|u| angle_between(u.xy(), bs_xy)).collect();
    let n = users.len();
    let adjacency = Array2::from_shape_fn((n, n), |(a, b)| {
        a == b || settings.thresholds.linked(users[a].xy(), users[b].xy(), theta[a], theta[b])
    });
    Ok(GraphObservation { features, adjacency, users: members })
}

/// Users of waveguide `k`'s region: `y_{k-1} < y <= y_{k+1}`, with the
/// outermost regions extended to the area edges (the first one closed at 0).
pub fn region_members(users: &[UserState], layout: &PaLayout, k: usize) -> Vec<usize> {
    let lower = if k == 0 { None } else { Some(layout.waveguide_y[k - 1]) };
    let upper = if k + 1 >= layout.waveguides { f64::INFINITY } else { layout.waveguide_y[k + 1] };
    users
        .iter()
        .enumerate()
        .filter(|(_, u)| {
            let y = u.position[1];
            lower.is_none_or(|lo| y > lo) && y <= upper
        })
        .map(|(n, _)| n)
        .collect()
}

/// One region graph per waveguide. `channel` is the previous slot's `H_pa`.
/// Returns the observations and the cluster assignment of each region.
pub fn build_pa_observations<R: Rng + ?Sized>(
    users: &[UserState],
    channel: Option<&ChannelMatrix>,
    layout: &PaLayout,
    settings: &GraphSettings,
    rng: &mut R,
) -> Result<(Vec<GraphObservation>, Vec<ClusterAssignment>)> {
    let mut observations = Vec::with_capacity(layout.waveguides);
    let mut clusters = Vec::with_capacity(layout.waveguides);
    for k in 0..layout.waveguides {
        let members = region_members(users, layout, k);
        let points: Vec<[f64; 2]> = members.iter().map(|&n| users[n].xy()).collect();
        let assignment = kmeans(&points, layout.antennas_per_waveguide, rng);
        let theta: Vec<f64> = points
            .iter()
            .zip(&assignment.labels)
            .map(|(p, &c)| assignment.centroids[c].map_or(0.0, |m| angle_between(*p, m)))
            .collect();
        let v = members.len();
        let adjacency = Array2::from_shape_fn((v, v), |(a, b)| {
            a == b
                || (assignment.labels[a] == assignment.labels[b]
                    && settings.thresholds.linked(points[a], points[b], theta[a], theta[b]))
        });
        let features = feature_rows(users, &members, channel, layout.waveguides, settings)?;
        observations.push(GraphObservation { features, adjacency, users: members });
        clusters.push(assignment);
    }
    Ok((observations, clusters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pa::PaConfig;
    use crate::scenario::AreaConfig;
    use crate::seed::{Purpose, SeedStream};
    use num_complex::Complex64;

    fn settings() -> GraphSettings {
        GraphSettings { thresholds: GraphThresholds::default(), features: ChannelFeatures::Magnitude, side: 200.0 }
    }

    fn at(x: f64, y: f64) -> UserState {
        UserState { position: [x, y, 1.5] }
    }

    #[test]
    fn edge_rule() {
        let t = GraphThresholds::default();
        assert!(t.linked([0.0, 0.0], [15.0, 0.0], 0.0, 1.0));
        assert!(!t.linked([0.0, 0.0], [25.0, 0.0], 0.0, 0.5));
        assert!(t.linked([0.0, 0.0], [25.0, 0.0], 0.0, 0.2));
    }

    #[test]
    fn ma_graph_shape_and_features() {
        let users = [at(100.0, 100.0), at(110.0, 100.0), at(50.0, 190.0)];
        let g = build_ma_graph(&users, None, 4, [0.0, 100.0], &settings()).unwrap();
        assert_eq!(g.features.dim(), (3, 7));
        assert!(g.features.slice(ndarray::s![.., 3..]).iter().all(|&v| v == 0.0));
        assert_eq!(g.features[(0, 0)], 0.5);
        assert!(g.adjacency[(0, 1)] && g.adjacency[(1, 0)]);
        assert!((0..3).all(|v| g.adjacency[(v, v)]));

        let mut h = ChannelMatrix::zeros(4, 3);
        h.0[(2, 1)] = Complex64::new(0.0, -4.0);
        h.0[(0, 0)] = Complex64::new(1.0, 0.0);
        let g = build_ma_graph(&users, Some(&h), 4, [0.0, 100.0], &settings()).unwrap();
        assert_eq!(g.features[(1, 5)], 1.0);
        assert_eq!(g.features[(0, 3)], 0.25);
        assert!(build_ma_graph(&users, Some(&h), 3, [0.0, 100.0], &settings()).is_err());

        let ri = GraphSettings { features: ChannelFeatures::RealImag, ..settings() };
        let g = build_ma_graph(&users, Some(&h), 4, [0.0, 100.0], &ri).unwrap();
        assert_eq!(g.features.ncols(), 11);
        assert_eq!(g.features[(1, 8)], -1.0);
    }

    fn pa_layout(waveguides: usize, per: usize) -> PaLayout {
        let cfg = PaConfig { waveguides, antennas_per_waveguide: per, refractive_index: 1.4 };
        PaLayout::new(&AreaConfig::default(), &cfg, 10, 0.1).unwrap()
    }

    #[test]
    fn regions_with_two_waveguides() {
        // y_1 = 50, y_2 = 150.
        let l = pa_layout(2, 1);
        let users = [at(1.0, 0.0), at(1.0, 40.0), at(1.0, 50.0), at(1.0, 60.0), at(1.0, 99.0)];
        assert_eq!(region_members(&users, &l, 0), vec![0, 1, 2, 3, 4]);
        assert_eq!(region_members(&users, &l, 1), vec![3, 4]);
    }

    #[test]
    fn regions_cover_every_user() {
        let l = pa_layout(8, 2);
        let users = crate::scenario::sample_user_positions(&AreaConfig::default(), &SeedStream::new(4), 0, 0);
        let mut seen = vec![false; users.len()];
        for k in 0..8 {
            for n in region_members(&users, &l, k) {
                seen[n] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn pa_edges_stay_inside_clusters() {
        let l = pa_layout(1, 2);
        // Two tight groups far apart plus a pair straddling them 5 m apart.
        let users = [at(10.0, 10.0), at(12.0, 10.0), at(190.0, 190.0), at(188.0, 190.0)];
        let mut rng = SeedStream::new(1).rng(0, 0, Purpose::KMeans);
        let (obs, clusters) = build_pa_observations(&users, None, &l, &settings(), &mut rng).unwrap();
        assert_eq!(obs.len(), 1);
        let g = &obs[0];
        assert_eq!(g.features.ncols(), 4);
        let c = &clusters[0];
        for a in 0..4 {
            for b in 0..4 {
                if c.labels[a] != c.labels[b] {
                    assert!(!g.adjacency[(a, b)]);
                }
            }
        }
        assert_eq!(c.labels[0], c.labels[1]);
        assert!(g.adjacency[(0, 1)]);
    }

    #[test]
    fn empty_region_has_no_vertices() {
        let l = pa_layout(4, 2);
        let users = [at(5.0, 10.0)];
        let mut rng = SeedStream::new(1).rng(0, 0, Purpose::KMeans);
        let (obs, _) = build_pa_observations(&users, None, &l, &settings(), &mut rng).unwrap();
        assert_eq!(obs[0].vertices(), 1);
        assert_eq!(obs[3].vertices(), 0);
        assert_eq!(obs[3].features.dim(), (0, 7));
    }
}
