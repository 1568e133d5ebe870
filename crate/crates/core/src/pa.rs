//! Waveguide-fed pinching-antenna (PA) channel.
//!
//! `K_wav` dielectric waveguides run parallel to the x axis across the whole
//! area at height `z_wav`. Each carries `M_pa` radiating points chosen among
//! `I_pos` evenly spaced candidates. All points on a waveguide share one feed,
//! so their free-space contributions add coherently into a single row of
//! `H_pa`, which therefore has `K_wav` rows.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ChannelMatrix;
use crate::scenario::{distance, AreaConfig, UserState, Vec3};
use crate::selection::Selection;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaConfig {
    pub waveguides: usize,
    pub antennas_per_waveguide: usize,
    pub refractive_index: f64,
}

impl Default for PaConfig {
    fn default() -> Self {
        Self { waveguides: 8, antennas_per_waveguide: 2, refractive_index: 1.4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaLayout {
    pub waveguides: usize,
    pub antennas_per_waveguide: usize,
    /// Waveguide length, equal to the area side (m).
    pub length: f64,
    pub height: f64,
    /// `y_k = (k - 1/2) D / K_wav`.
    pub waveguide_y: Vec<f64>,
    pub candidates: usize,
    pub refractive_index: f64,
    pub wavelength: f64,
}

impl PaLayout {
    pub fn new(area: &AreaConfig, cfg: &PaConfig, candidates: usize, wavelength: f64) -> Result<Self> {
        if cfg.waveguides == 0 || cfg.antennas_per_waveguide == 0 {
            return Err(Error::Config("waveguide and PA counts must be at least 1".into()));
        }
        if candidates < 2 {
            return Err(Error::Config("a waveguide needs at least 2 candidate positions".into()));
        }
        if cfg.antennas_per_waveguide > candidates {
            return Err(Error::SelectionTooLarge { k: cfg.antennas_per_waveguide, available: candidates });
        }
        if !(cfg.refractive_index > 1.0) {
            return Err(Error::Config(format!(
                "effective refractive index must exceed 1, got {}",
                cfg.refractive_index
            )));
        }
        let k = cfg.waveguides as f64;
        Ok(Self {
            waveguides: cfg.waveguides,
            antennas_per_waveguide: cfg.antennas_per_waveguide,
            length: area.side,
            height: area.waveguide_height,
            waveguide_y: (0..cfg.waveguides).map(|i| (i as f64 + 0.5) * area.side / k).collect(),
            candidates,
            refractive_index: cfg.refractive_index,
            wavelength,
        })
    }

    pub fn guided_wavelength(&self) -> f64 {
        self.wavelength / self.refractive_index
    }

    pub fn carrier_frequency(&self) -> f64 {
        SPEED_OF_LIGHT / self.wavelength
    }

    /// `eta^{1/2} = c / (4 pi f_c)`.
    pub fn eta_sqrt(&self) -> f64 {
        SPEED_OF_LIGHT / (4.0 * PI * self.carrier_frequency())
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.candidates as f64 - 1.0)
    }

    /// Feed point `t_{k,0}` at the BS end (x = 0) of waveguide `k` (0-based).
    pub fn feed_point(&self, k: usize) -> Vec3 {
        [0.0, self.waveguide_y[k], self.height]
    }

    /// Candidate `i` (0-based) on waveguide `k` (0-based).
    pub fn candidate(&self, k: usize, i: usize) -> Vec3 {
        [i as f64 * self.spacing(), self.waveguide_y[k], self.height]
    }

    pub fn candidate_positions(&self, k: usize) -> Result<Vec<Vec3>> {
        if k >= self.waveguides {
            return Err(Error::IndexOutOfRange { index: k, limit: self.waveguides });
        }
        Ok((0..self.candidates).map(|i| self.candidate(k, i)).collect())
    }
}

/// `h_{k,m,n}`: in-waveguide phase and amplitude split times free-space
/// spherical-wave propagation from the PA at `position` to the user.
pub fn pa_coefficient(layout: &PaLayout, k: usize, position: &Vec3, user: &UserState) -> Result<Complex64> {
    let d_free = distance(&user.position, position);
    if d_free == 0.0 {
        return Err(Error::ZeroDistance);
    }
    let guide = waveguide_factor(layout, k, position);
    let free = Complex64::from_polar(layout.eta_sqrt() / d_free, -2.0 * PI / layout.wavelength * d_free);
    Ok(guide * free)
}

/// Feed-to-PA phase shift with the `1/sqrt(M_pa)` power split.
fn waveguide_factor(layout: &PaLayout, k: usize, position: &Vec3) -> Complex64 {
    let d_guide = distance(&layout.feed_point(k), position);
    Complex64::from_polar(
        1.0 / (layout.antennas_per_waveguide as f64).sqrt(),
        -2.0 * PI / layout.guided_wavelength() * d_guide,
    )
}

/// `H_pa`, `K_wav x N`; entry `(k, n)` sums the coefficients of all PAs on
/// waveguide `k`.
pub fn assemble_pa_channel(selections: &[Selection], users: &[UserState], layout: &PaLayout) -> Result<ChannelMatrix> {
    for s in selections {
        s.check(layout.candidates)?;
    }
    assemble_raw(selections, users, layout)
}

/// Like [`assemble_pa_channel`] but tolerates PAs sharing a candidate point.
pub fn assemble_pa_channel_colliding(
    selections: &[Selection],
    users: &[UserState],
    layout: &PaLayout,
) -> Result<ChannelMatrix> {
    for s in selections {
        s.check_range(layout.candidates)?;
    }
    assemble_raw(selections, users, layout)
}

fn assemble_raw(selections: &[Selection], users: &[UserState], layout: &PaLayout) -> Result<ChannelMatrix> {
    if selections.len() != layout.waveguides {
        return Err(Error::Dimension { expected: layout.waveguides, got: selections.len() });
    }
    let mut h = ChannelMatrix::zeros(layout.waveguides, users.len());
    for (k, sel) in selections.iter().enumerate() {
        for &i in sel.indices() {
            let t = layout.candidate(k, i);
            for (n, u) in users.iter().enumerate() {
                h.0[(k, n)] += pa_coefficient(layout, k, &t, u)?;
            }
        }
    }
    Ok(h)
}

/// Per-waveguide coefficients of every candidate point to every user for one
/// slot: entry `k` is an `I_pos x N` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PaCandidateChannels(pub Vec<ChannelMatrix>);

impl PaCandidateChannels {
    pub fn new(users: &[UserState], layout: &PaLayout) -> Result<Self> {
        let mut out = Vec::with_capacity(layout.waveguides);
        for k in 0..layout.waveguides {
            let mut m = ChannelMatrix::zeros(layout.candidates, users.len());
            for i in 0..layout.candidates {
                let t = layout.candidate(k, i);
                for (n, u) in users.iter().enumerate() {
                    m.0[(i, n)] = pa_coefficient(layout, k, &t, u)?;
                }
            }
            out.push(m);
        }
        Ok(Self(out))
    }

    pub fn waveguides(&self) -> usize {
        self.0.len()
    }

    pub fn candidates(&self) -> usize {
        self.0.first().map_or(0, |m| m.rows())
    }

    /// Same result as [`assemble_pa_channel`] for this slot.
    pub fn assemble(&self, selections: &[Selection]) -> Result<ChannelMatrix> {
        for s in selections {
            s.check(self.candidates())?;
        }
        self.sum_rows(selections)
    }

    /// Same result as [`assemble_pa_channel_colliding`] for this slot.
    pub fn assemble_colliding(&self, selections: &[Selection]) -> Result<ChannelMatrix> {
        for s in selections {
            s.check_range(self.candidates())?;
        }
        self.sum_rows(selections)
    }

    fn sum_rows(&self, selections: &[Selection]) -> Result<ChannelMatrix> {
        if selections.len() != self.waveguides() {
            return Err(Error::Dimension { expected: self.waveguides(), got: selections.len() });
        }
        let users = self.0.first().map_or(0, |m| m.cols());
        let mut h = ChannelMatrix::zeros(self.waveguides(), users);
        for (k, sel) in selections.iter().enumerate() {
            for &i in sel.indices() {
                for n in 0..users {
                    h.0[(k, n)] += self.0[k].0[(i, n)];
                }
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(candidates: usize, waveguides: usize, per: usize) -> PaLayout {
        let area = AreaConfig::default();
        let cfg = PaConfig { waveguides, antennas_per_waveguide: per, refractive_index: 1.4 };
        PaLayout::new(&area, &cfg, candidates, 0.1).unwrap()
    }

    #[test]
    fn candidate_grid() {
        let l = layout(100, 8, 2);
        let pts = l.candidate_positions(0).unwrap();
        assert_eq!(pts.len(), 100);
        assert_eq!(pts[0][0], 0.0);
        assert!((pts[99][0] - 200.0).abs() < 1e-12);
        assert!((l.spacing() - 2.0202).abs() < 1e-4);
        assert!(pts.iter().all(|p| p[1] == l.waveguide_y[0] && p[2] == 3.0));

        let two = layout(2, 8, 2).candidate_positions(3).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0][0], 0.0);
        assert!((two[1][0] - 200.0).abs() < 1e-12);
        assert!(l.candidate_positions(8).is_err());
    }

    #[test]
    fn waveguides_centered_in_bands() {
        let l = layout(10, 8, 2);
        assert_eq!(l.waveguide_y[0], 12.5);
        assert_eq!(l.waveguide_y[7], 187.5);
        assert!(l.guided_wavelength() < l.wavelength);
    }

    #[test]
    fn coefficient_at_feed_directly_above_user() {
        let l = layout(100, 8, 2);
        let t = l.feed_point(0);
        let u = UserState { position: [t[0], t[1], t[2] - 1.5] };
        let h = pa_coefficient(&l, 0, &t, &u).unwrap();
        let expected = l.eta_sqrt() / (2f64.sqrt() * 1.5);
        assert!((expected - 3.7513e-3).abs() < 1e-7);
        // 1.5 m is 15 whole wavelengths: zero phase.
        assert!((h.re - expected).abs() < 1e-12 && h.im.abs() < 1e-12, "{h}");
    }

    #[test]
    fn coefficient_modulus_factorizes() {
        let l = layout(100, 8, 2);
        let t = l.candidate(2, 37);
        let u = UserState { position: [120.0, 33.0, 1.5] };
        let h = pa_coefficient(&l, 2, &t, &u).unwrap();
        let d = distance(&u.position, &t);
        assert!((h.norm() - l.eta_sqrt() / (2f64.sqrt() * d)).abs() < 1e-15);
    }

    #[test]
    fn guided_phase_periodic_in_guided_wavelength() {
        let l = layout(100, 8, 2);
        let y = l.waveguide_y[1];
        let a = [10.0, y, 3.0];
        let b = [10.0 + l.guided_wavelength(), y, 3.0];
        let ga = waveguide_factor(&l, 1, &a);
        let gb = waveguide_factor(&l, 1, &b);
        assert!((ga - gb).norm() < 1e-12);
        assert!(pa_coefficient(&l, 1, &a, &UserState { position: a }).is_err());
    }

    #[test]
    fn single_pa_entry_is_its_coefficient() {
        let l = layout(10, 2, 1);
        let users = [UserState { position: [50.0, 20.0, 1.5] }, UserState { position: [150.0, 180.0, 1.5] }];
        let sel = [Selection::new(vec![3]), Selection::new(vec![7])];
        let h = assemble_pa_channel(&sel, &users, &l).unwrap();
        for k in 0..2 {
            for n in 0..2 {
                let c = pa_coefficient(&l, k, &l.candidate(k, sel[k].indices()[0]), &users[n]).unwrap();
                assert_eq!(h.0[(k, n)], c);
            }
        }
        // One selection per waveguide is required.
        assert!(matches!(assemble_pa_channel(&sel[..1], &users, &l), Err(Error::Dimension { expected: 2, got: 1 })));
    }

    #[test]
    fn candidate_table_matches_direct_assembly() {
        let l = layout(12, 3, 2);
        let users = [
            UserState { position: [50.0, 20.0, 1.5] },
            UserState { position: [150.0, 180.0, 1.5] },
            UserState { position: [3.0, 99.0, 1.5] },
        ];
        let table = PaCandidateChannels::new(&users, &l).unwrap();
        let sel = [Selection::new(vec![0, 11]), Selection::new(vec![5, 4]), Selection::new(vec![7, 2])];
        let direct = assemble_pa_channel(&sel, &users, &l).unwrap();
        let fast = table.assemble(&sel).unwrap();
        assert!((direct.0 - fast.0).norm() < 1e-15);
        let dup = [Selection::new(vec![1, 1]), Selection::new(vec![5, 4]), Selection::new(vec![7, 2])];
        assert!(table.assemble(&dup).is_err());
        let a = assemble_pa_channel_colliding(&dup, &users, &l).unwrap();
        let b = table.assemble_colliding(&dup).unwrap();
        assert!((a.0 - b.0).norm() < 1e-15);
    }

    #[test]
    fn duplicate_on_waveguide_rejected() {
        let l = layout(10, 2, 2);
        let users = [UserState { position: [50.0, 20.0, 1.5] }];
        let sel = [Selection::new(vec![3, 3]), Selection::new(vec![1, 2])];
        assert!(matches!(assemble_pa_channel(&sel, &users, &l), Err(Error::DuplicateIndex { index: 3 })));
        // The colliding variant doubles the single-PA sum.
        let h = assemble_pa_channel_colliding(&sel, &users, &l).unwrap();
        let c = pa_coefficient(&l, 0, &l.candidate(0, 3), &users[0]).unwrap();
        assert!((h.0[(0, 0)] - 2.0 * c).norm() < 1e-18);
    }
}
