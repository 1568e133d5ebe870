//! Experiment configuration as read from JSON.
//!
//! Every section is optional and falls back to the default scenario; only
//! `system` and `algorithm` are required. Unknown keys are rejected.
//!
//! ```
//! use flexrank::config::ExperimentConfig;
//!
//! let cfg = ExperimentConfig::from_json(r#"{"system": "pa", "algorithm": "random"}"#).unwrap();
//! assert_eq!(cfg.pa.waveguides * cfg.pa.antennas_per_waveguide, cfg.ma.antennas);
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::DEFAULT_BUDGET;
use crate::error::{Error, Result};
use crate::graph::GraphConfig;
use crate::ma::FadingConfig;
use crate::pa::PaConfig;
use crate::scenario::{AreaConfig, Mobility};
use crate::system::{MaSystem, PaSystem, SystemKind};
use crate::train::{Algorithm, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaSection {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub antennas: usize,
}

impl Default for MaSection {
    fn default() -> Self {
        Self { grid_rows: 10, grid_cols: 10, antennas: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaSection {
    pub waveguides: usize,
    pub antennas_per_waveguide: usize,
    pub refractive_index: f64,
    /// Candidate positions per waveguide.
    pub candidates: usize,
}

impl Default for PaSection {
    fn default() -> Self {
        let p = PaConfig::default();
        Self {
            waveguides: p.waveguides,
            antennas_per_waveguide: p.antennas_per_waveguide,
            refractive_index: p.refractive_index,
            candidates: 100,
        }
    }
}

impl PaSection {
    pub fn pa_config(&self) -> PaConfig {
        PaConfig {
            waveguides: self.waveguides,
            antennas_per_waveguide: self.antennas_per_waveguide,
            refractive_index: self.refractive_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Slots per evaluation seed.
    pub slots: usize,
    pub seeds: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { slots: 500, seeds: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    /// Largest number of placements the exhaustive search may score.
    pub budget: u64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { budget: DEFAULT_BUDGET as u64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Users,
    Side,
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepParam::Users => "users",
            SweepParam::Side => "side",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: SweepParam,
    pub values: Vec<f64>,
    /// Systems to run at every grid value; the configured `system` when empty.
    /// Listing both requires `waveguides x antennas_per_waveguide == antennas`.
    #[serde(default)]
    pub systems: Vec<SystemKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemKind,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub area: AreaConfig,
    #[serde(default)]
    pub channel: FadingConfig,
    #[serde(default)]
    pub ma: MaSection,
    #[serde(default)]
    pub pa: PaSection,
    #[serde(default)]
    pub mobility: Mobility,
    #[serde(default)]
    pub graph: GraphConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    /// Run directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(system: SystemKind, algorithm: Algorithm) -> Self {
        Self {
            system,
            algorithm,
            seed: 0,
            area: AreaConfig::default(),
            channel: FadingConfig::default(),
            ma: MaSection::default(),
            pa: PaSection::default(),
            mobility: Mobility::default(),
            graph: GraphConfig::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
            oracle: OracleSection::default(),
            sweep: None,
            out: None,
        }
    }

    /// Parses and validates. Syntax and schema errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.area.validate()?;
        self.channel.validate()?;
        self.graph.validate()?;
        self.train.validate()?;
        if self.eval.slots == 0 || self.eval.seeds == 0 {
            return Err(Error::Config("eval.slots and eval.seeds must be at least 1".into()));
        }
        match self.system {
            SystemKind::Ma => {
                if self.algorithm == Algorithm::Magaqn {
                    return Err(Error::Config("magaqn runs on the pa system".into()));
                }
                self.ma_system()?;
            }
            SystemKind::Pa => {
                if self.algorithm == Algorithm::Gaiqn {
                    return Err(Error::Config("gaiqn runs on the ma system".into()));
                }
                self.pa_system()?;
            }
        }
        if let Some(sweep) = &self.sweep {
            for &v in &sweep.values {
                let ok = match sweep.param {
                    SweepParam::Users => v >= 1.0 && v.fract() == 0.0,
                    SweepParam::Side => v > 0.0 && v.is_finite(),
                };
                if !ok {
                    return Err(Error::Config(format!("invalid sweep value {v} for {}", sweep.param)));
                }
            }
            if sweep.systems.contains(&SystemKind::Ma) && sweep.systems.contains(&SystemKind::Pa) {
                self.check_fairness()?;
            }
        }
        Ok(())
    }

    /// Both systems must deploy the same number of antennas.
    pub fn check_fairness(&self) -> Result<()> {
        let pa = self.pa.waveguides * self.pa.antennas_per_waveguide;
        if pa != self.ma.antennas {
            return Err(Error::Config(format!(
                "fairness rule: waveguides x antennas_per_waveguide = {pa} but ma.antennas = {}",
                self.ma.antennas
            )));
        }
        Ok(())
    }

    pub fn ma_system(&self) -> Result<MaSystem> {
        MaSystem::new(
            self.area.clone(),
            self.channel.clone(),
            self.ma.grid_rows,
            self.ma.grid_cols,
            self.ma.antennas,
            self.mobility,
        )
    }

    pub fn pa_system(&self) -> Result<PaSystem> {
        PaSystem::new(self.area.clone(), &self.pa.pa_config(), self.pa.candidates, self.channel.wavelength, self.mobility)
    }

    /// Config with the algorithm-dependent training defaults filled in.
    pub fn resolved(&self) -> Self {
        Self { train: self.train.resolved(self.algorithm), ..self.clone() }
    }

    /// Copy at one sweep grid point, without the sweep itself.
    pub fn at_grid_point(&self, param: SweepParam, value: f64, system: SystemKind) -> Self {
        let mut cfg = Self { system, sweep: None, ..self.clone() };
        match param {
            SweepParam::Users => cfg.area.users = value as usize,
            SweepParam::Side => cfg.area.side = value,
        }
        cfg
    }
}
