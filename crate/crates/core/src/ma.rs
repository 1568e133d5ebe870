//! Field-response channel of a movable-antenna (MA) array.
//!
//! The BS carries `M_ma` elements that are electrically switched among an
//! `I_r x I_c` grid of candidate points spaced half a wavelength apart. Each user
//! sees `L` transmit paths and `L` receive paths; the channel of user `n` is
//! `h_n = Q_n^T Sigma_n f_n(u_n)`, with `Q_n` the transmit field responses at
//! the selected grid points, `Sigma_n` a diagonal of complex path gains, and
//! `f_n` the receive field response at the user position.
//!
//! The grid lives in a local plane whose origin is the grid center, while the
//! receive phases use absolute user coordinates.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ChannelMatrix;
use crate::scenario::{distance, UserState, Vec3};
use crate::seed::{Purpose, SeedStream};
use crate::selection::Selection;

#[derive(Debug, Clone, PartialEq)]
pub struct MaGrid {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    /// Row-major candidate points in the array plane (m).
    pub positions: Vec<[f64; 2]>,
}

impl MaGrid {
    /// Grid with `spacing` between neighbours, centered on the plane origin.
    pub fn new(rows: usize, cols: usize, spacing: f64) -> Self {
        let cx = (cols as f64 - 1.0) / 2.0;
        let cy = (rows as f64 - 1.0) / 2.0;
        let positions = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| [(c as f64 - cx) * spacing, (r as f64 - cy) * spacing]))
            .collect();
        Self { rows, cols, spacing, positions }
    }

    /// Half-wavelength grid.
    pub fn half_wavelength(rows: usize, cols: usize, wavelength: f64) -> Self {
        Self::new(rows, cols, wavelength / 2.0)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FadingConfig {
    /// Paths per user (transmit and receive counts are equal).
    pub paths: usize,
    /// Channel gain at 1 m (dB).
    pub ref_gain_db: f64,
    pub path_loss_exponent: f64,
    /// Carrier wavelength (m).
    pub wavelength: f64,
}

impl Default for FadingConfig {
    fn default() -> Self {
        Self { paths: 10, ref_gain_db: -40.0, path_loss_exponent: 2.8, wavelength: 0.1 }
    }
}

impl FadingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::Config("paths per user must be at least 1".into()));
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::Config(format!("wavelength must be positive, got {}", self.wavelength)));
        }
        Ok(())
    }

    /// Expected total gain `rho_lin * d^-varsigma` over all paths.
    pub fn expected_gain(&self, d: f64) -> f64 {
        10f64.powf(self.ref_gain_db / 10.0) * d.powf(-self.path_loss_exponent)
    }
}

/// Transmit (elevation, azimuth) and receive (elevation, azimuth) per path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathAngle {
    pub tx_elevation: f64,
    pub tx_azimuth: f64,
    pub rx_elevation: f64,
    pub rx_azimuth: f64,
}

/// All paths of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct PathAngles(pub Vec<PathAngle>);

/// Diagonal of the path-response matrix of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResponse(pub Vec<Complex64>);

/// Fading realization of every user in a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct MaSlotDraws {
    pub angles: Vec<PathAngles>,
    pub responses: Vec<PathResponse>,
}

pub fn transmit_wavevector(elevation: f64, azimuth: f64, wavelength: f64) -> [f64; 2] {
    let k = 2.0 * PI / wavelength;
    [k * elevation.cos() * azimuth.cos(), k * elevation.cos() * azimuth.sin()]
}

pub fn receive_wavevector(elevation: f64, azimuth: f64, wavelength: f64) -> [f64; 3] {
    let k = 2.0 * PI / wavelength;
    [k * elevation.cos() * azimuth.cos(), k * elevation.cos() * azimuth.sin(), k * elevation.sin()]
}

/// Entry `l` is `exp(j * position . wavevector_l)`.
pub fn field_response_vector(position: &[f64], wavevectors: &[&[f64]]) -> Result<Vec<Complex64>> {
    wavevectors
        .iter()
        .map(|k| {
            if k.len() != position.len() {
                return Err(Error::Dimension { expected: position.len(), got: k.len() });
            }
            let phase: f64 = position.iter().zip(k.iter()).map(|(p, q)| p * q).sum();
            Ok(Complex64::from_polar(1.0, phase))
        })
        .collect()
}

/// All four angles i.i.d. uniform on `[-pi/2, pi/2]`.
pub fn sample_path_angles<R: Rng + ?Sized>(paths: usize, rng: &mut R) -> PathAngles {
    let mut draw = || rng.random_range(-PI / 2.0..=PI / 2.0);
    PathAngles(
        (0..paths)
            .map(|_| PathAngle {
                tx_elevation: draw(),
                tx_azimuth: draw(),
                rx_elevation: draw(),
                rx_azimuth: draw(),
            })
            .collect(),
    )
}

/// `L` i.i.d. `CN(0, rho d^-varsigma / L)` gains, `d` the 3D BS-user distance.
pub fn sample_path_response<R: Rng + ?Sized>(
    user: &UserState,
    bs: &Vec3,
    fading: &FadingConfig,
    rng: &mut R,
) -> Result<PathResponse> {
    let d = distance(&user.position, bs);
    if d == 0.0 {
        return Err(Error::ZeroDistance);
    }
    let sigma = (fading.expected_gain(d) / fading.paths as f64 / 2.0).sqrt();
    Ok(PathResponse(
        (0..fading.paths)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(sigma * re, sigma * im)
            })
            .collect(),
    ))
}

/// Fading for all users of a slot, from the `PathAngles` and `PathGains`
/// substreams of the given label.
pub fn sample_slot_draws(
    users: &[UserState],
    bs: &Vec3,
    fading: &FadingConfig,
    seeds: &SeedStream,
    episode: u64,
    slot: u64,
) -> Result<MaSlotDraws> {
    let mut angle_rng = seeds.rng(episode, slot, Purpose::PathAngles);
    let mut gain_rng = seeds.rng(episode, slot, Purpose::PathGains);
    let angles = users.iter().map(|_| sample_path_angles(fading.paths, &mut angle_rng)).collect();
    let responses = users
        .iter()
        .map(|u| sample_path_response(u, bs, fading, &mut gain_rng))
        .collect::<Result<_>>()?;
    Ok(MaSlotDraws { angles, responses })
}

/// Channel of one user to the selected grid points: `Q_n^T Sigma_n f_n(u_n)`.
pub fn ma_user_channel(
    selection: &Selection,
    user: &UserState,
    angles: &PathAngles,
    response: &PathResponse,
    grid: &MaGrid,
    wavelength: f64,
) -> Result<Vec<Complex64>> {
    selection.check(grid.len())?;
    user_channel_raw(selection, user, angles, response, grid, wavelength)
}

fn user_channel_raw(
    selection: &Selection,
    user: &UserState,
    angles: &PathAngles,
    response: &PathResponse,
    grid: &MaGrid,
    wavelength: f64,
) -> Result<Vec<Complex64>> {
    if angles.0.len() != response.0.len() {
        return Err(Error::Dimension { expected: angles.0.len(), got: response.0.len() });
    }
    // Sigma_n f_n(u_n): one complex weight per path.
    let weights: Vec<Complex64> = angles
        .0
        .iter()
        .zip(&response.0)
        .map(|(a, g)| {
            let k = receive_wavevector(a.rx_elevation, a.rx_azimuth, wavelength);
            let phase = user.position[0] * k[0] + user.position[1] * k[1] + user.position[2] * k[2];
            g * Complex64::from_polar(1.0, phase)
        })
        .collect();
    let tx: Vec<[f64; 2]> = angles
        .0
        .iter()
        .map(|a| transmit_wavevector(a.tx_elevation, a.tx_azimuth, wavelength))
        .collect();
    Ok(selection
        .indices()
        .iter()
        .map(|&i| {
            let t = grid.positions[i];
            tx.iter()
                .zip(&weights)
                .map(|(k, w)| w * Complex64::from_polar(1.0, t[0] * k[0] + t[1] * k[1]))
                .sum()
        })
        .collect())
}

/// `H_ma = [h_1, ..., h_N]`, `M_ma x N`.
pub fn assemble_ma_channel(
    selection: &Selection,
    users: &[UserState],
    draws: &MaSlotDraws,
    grid: &MaGrid,
    wavelength: f64,
) -> Result<ChannelMatrix> {
    selection.check(grid.len())?;
    assemble_raw(selection, users, draws, grid, wavelength)
}

/// Like [`assemble_ma_channel`] but lets several antennas share a candidate
/// point. Only used to price collisions in the reward.
pub fn assemble_ma_channel_colliding(
    selection: &Selection,
    users: &[UserState],
    draws: &MaSlotDraws,
    grid: &MaGrid,
    wavelength: f64,
) -> Result<ChannelMatrix> {
    selection.check_range(grid.len())?;
    assemble_raw(selection, users, draws, grid, wavelength)
}

fn assemble_raw(
    selection: &Selection,
    users: &[UserState],
    draws: &MaSlotDraws,
    grid: &MaGrid,
    wavelength: f64,
) -> Result<ChannelMatrix> {
    if draws.angles.len() != users.len() || draws.responses.len() != users.len() {
        return Err(Error::Dimension { expected: users.len(), got: draws.angles.len() });
    }
    let mut h = ChannelMatrix::zeros(selection.len(), users.len());
    for (n, user) in users.iter().enumerate() {
        let col = user_channel_raw(selection, user, &draws.angles[n], &draws.responses[n], grid, wavelength)?;
        for (m, v) in col.into_iter().enumerate() {
            h.0[(m, n)] = v;
        }
    }
    Ok(h)
}

/// Channels of every candidate point to every user for one slot
/// (`I_pos x N`). Rows of a placement can then be picked without recomputing
/// the field responses.
#[derive(Debug, Clone, PartialEq)]
pub struct MaCandidateChannels(pub ChannelMatrix);

impl MaCandidateChannels {
    pub fn new(users: &[UserState], draws: &MaSlotDraws, grid: &MaGrid, wavelength: f64) -> Result<Self> {
        let all = Selection::new((0..grid.len()).collect());
        Ok(Self(assemble_raw(&all, users, draws, grid, wavelength)?))
    }

    pub fn candidates(&self) -> usize {
        self.0.rows()
    }

    /// Same result as [`assemble_ma_channel`] for this slot.
    pub fn select(&self, selection: &Selection) -> Result<ChannelMatrix> {
        selection.check(self.candidates())?;
        Ok(self.0.select_rows(selection.indices()))
    }

    /// Same result as [`assemble_ma_channel_colliding`] for this slot.
    pub fn select_colliding(&self, selection: &Selection) -> Result<ChannelMatrix> {
        selection.check_range(self.candidates())?;
        Ok(self.0.select_rows(selection.indices()))
    }
}
