//! Per-slot environments for the two antenna systems.
//!
//! A slot bundles the user drop, the fading realization (MA) and the channel
//! of every candidate point, so any placement can be scored cheaply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{effective_rank, ChannelMatrix};
use crate::ma::{sample_slot_draws, FadingConfig, MaCandidateChannels, MaGrid};
use crate::pa::{PaCandidateChannels, PaConfig, PaLayout};
use crate::scenario::{bs_position, sample_user_positions, AreaConfig, Mobility, UserState};
use crate::seed::SeedStream;
use crate::selection::Selection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Ma,
    Pa,
}

impl std::fmt::Display for SystemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SystemKind::Ma => "ma",
            SystemKind::Pa => "pa",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaSystem {
    pub area: AreaConfig,
    pub fading: FadingConfig,
    pub grid: MaGrid,
    pub antennas: usize,
    pub mobility: Mobility,
}

impl MaSystem {
    pub fn new(area: AreaConfig, fading: FadingConfig, rows: usize, cols: usize, antennas: usize, mobility: Mobility) -> Result<Self> {
        area.validate()?;
        fading.validate()?;
        let grid = MaGrid::half_wavelength(rows, cols, fading.wavelength);
        if antennas == 0 || antennas > grid.len() {
            return Err(Error::SelectionTooLarge { k: antennas, available: grid.len() });
        }
        Ok(Self { area, fading, grid, antennas, mobility })
    }

    pub fn candidates(&self) -> usize {
        self.grid.len()
    }

    pub fn slot(&self, seeds: &SeedStream, episode: u64, slot: u64) -> Result<MaSlot> {
        let (e, s) = self.mobility.draw_label(episode, slot);
        let users = sample_user_positions(&self.area, seeds, e, s);
        let bs = bs_position(&self.area);
        let draws = sample_slot_draws(&users, &bs, &self.fading, seeds, e, s)?;
        let table = MaCandidateChannels::new(&users, &draws, &self.grid, self.fading.wavelength)?;
        Ok(MaSlot { users, table })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaSlot {
    pub users: Vec<UserState>,
    pub table: MaCandidateChannels,
}

impl MaSlot {
    pub fn channel(&self, selection: &Selection) -> Result<ChannelMatrix> {
        self.table.select(selection)
    }

    pub fn effective_rank(&self, selection: &Selection) -> Result<f64> {
        effective_rank(&self.channel(selection)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaSystem {
    pub area: AreaConfig,
    pub layout: PaLayout,
    pub mobility: Mobility,
}

impl PaSystem {
    pub fn new(area: AreaConfig, cfg: &PaConfig, candidates: usize, wavelength: f64, mobility: Mobility) -> Result<Self> {
        area.validate()?;
        let layout = PaLayout::new(&area, cfg, candidates, wavelength)?;
        Ok(Self { area, layout, mobility })
    }

    pub fn candidates(&self) -> usize {
        self.layout.candidates
    }

    pub fn slot(&self, seeds: &SeedStream, episode: u64, slot: u64) -> Result<PaSlot> {
        let (e, s) = self.mobility.draw_label(episode, slot);
        let users = sample_user_positions(&self.area, seeds, e, s);
        let table = PaCandidateChannels::new(&users, &self.layout)?;
        Ok(PaSlot { users, table })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaSlot {
    pub users: Vec<UserState>,
    pub table: PaCandidateChannels,
}

impl PaSlot {
    pub fn channel(&self, selections: &[Selection]) -> Result<ChannelMatrix> {
        self.table.assemble(selections)
    }

    pub fn effective_rank(&self, selections: &[Selection]) -> Result<f64> {
        effective_rank(&self.channel(selections)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_slots_repeat() {
        let sys = MaSystem::new(
            AreaConfig { users: 5, ..AreaConfig::default() },
            FadingConfig::default(),
            3,
            3,
            2,
            Mobility::Stationary,
        )
        .unwrap();
        let seeds = SeedStream::new(1);
        assert_eq!(sys.slot(&seeds, 0, 0).unwrap(), sys.slot(&seeds, 7, 3).unwrap());
        let iid = MaSystem { mobility: Mobility::Iid, ..sys.clone() };
        assert_ne!(iid.slot(&seeds, 0, 0).unwrap(), iid.slot(&seeds, 0, 1).unwrap());
    }

    #[test]
    fn pa_and_ma_share_user_drops() {
        let area = AreaConfig { users: 6, ..AreaConfig::default() };
        let seeds = SeedStream::new(8);
        let ma = MaSystem::new(area.clone(), FadingConfig::default(), 4, 4, 4, Mobility::Iid).unwrap();
        let pa = PaSystem::new(area, &PaConfig::default(), 20, 0.1, Mobility::Iid).unwrap();
        assert_eq!(ma.slot(&seeds, 2, 5).unwrap().users, pa.slot(&seeds, 2, 5).unwrap().users);
    }

    #[test]
    fn too_many_antennas_rejected() {
        let r = MaSystem::new(AreaConfig::default(), FadingConfig::default(), 2, 2, 5, Mobility::Iid);
        assert!(matches!(r, Err(Error::SelectionTooLarge { k: 5, available: 4 })));
    }
}
