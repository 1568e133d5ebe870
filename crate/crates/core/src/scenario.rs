//! Square service area, base-station placement and per-slot user drops.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{Purpose, SeedStream};

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaConfig {
    /// Side length of the square area (m).
    pub side: f64,
    /// Time slots per episode.
    pub slots: usize,
    pub users: usize,
    /// BS antenna height (m).
    pub bs_height: f64,
    /// User antenna height (m).
    pub user_height: f64,
    /// Waveguide height (m).
    pub waveguide_height: f64,
}

impl Default for AreaConfig {
    fn default() -> Self {
        Self {
            side: 200.0,
            slots: 10,
            users: 80,
            bs_height: 25.0,
            user_height: 1.5,
            waveguide_height: 3.0,
        }
    }
}

impl AreaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.side.is_finite() && self.side > 0.0) {
            return Err(Error::Config(format!("area side must be positive, got {}", self.side)));
        }
        if self.slots == 0 {
            return Err(Error::Config("slots per episode must be at least 1".into()));
        }
        if self.users == 0 {
            return Err(Error::Config("user count must be at least 1".into()));
        }
        for (name, h) in [
            ("bs_height", self.bs_height),
            ("user_height", self.user_height),
            ("waveguide_height", self.waveguide_height),
        ] {
            if !(h.is_finite() && h >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {h}")));
            }
        }
        Ok(())
    }
}

/// How user positions and fading evolve between slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mobility {
    /// Fresh i.i.d. uniform drop every slot.
    #[default]
    Iid,
    /// A single drop (and a single fading realization) reused for every slot
    /// of every episode.
    Stationary,
}

impl Mobility {
    /// The `(episode, slot)` label that drives the random draws for a slot.
    pub fn draw_label(self, episode: u64, slot: u64) -> (u64, u64) {
        match self {
            Mobility::Iid => (episode, slot),
            Mobility::Stationary => (0, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserState {
    pub position: Vec3,
}

impl UserState {
    pub fn xy(&self) -> [f64; 2] {
        [self.position[0], self.position[1]]
    }
}

/// BS at the center of the left edge of the area.
pub fn bs_position(cfg: &AreaConfig) -> Vec3 {
    [0.0, cfg.side / 2.0, cfg.bs_height]
}

/// Users for `(episode, slot)`: x and y i.i.d. uniform on `[0, side]`.
pub fn sample_user_positions(cfg: &AreaConfig, seeds: &SeedStream, episode: u64, slot: u64) -> Vec<UserState> {
    let mut rng = seeds.rng(episode, slot, Purpose::UserPositions);
    (0..cfg.users)
        .map(|_| {
            let x = rng.random_range(0.0..=cfg.side);
            let y = rng.random_range(0.0..=cfg.side);
            UserState { position: [x, y, cfg.user_height] }
        })
        .collect()
}

/// Quadrant-aware angle of `user` seen from `reference`, measured from the
/// +y axis towards +x: `atan2(x - x_ref, y - y_ref)`, in `(-pi, pi]`.
/// Returns 0 when the two points coincide in the plane.
pub fn angular_direction(user: &UserState, reference: [f64; 2]) -> f64 {
    angle_between([user.position[0], user.position[1]], reference)
}

pub(crate) fn angle_between(p: [f64; 2], reference: [f64; 2]) -> f64 {
    let dx = p[0] - reference[0];
    let dy = p[1] - reference[1];
    if dx == 0.0 && dy == 0.0 {
        0.0
    } else {
        dx.atan2(dy)
    }
}

pub fn distance(a: &Vec3, b: &Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}
