use std::path::{Path, PathBuf};

use dbprobe::analysis::{BinningMode, CurveOptions, NrfDof, ShotNoiseConfig};
use dbprobe::fitting::GridSpec;
use dbprobe::simulator::{CampaignConfig, DimpleConfig, Environment};
use dbprobe::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA: &str = "dbprobe.config.v1";

/// Binning and fit settings for the critical-curve analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveSettings {
    pub n_bins: usize,
    /// Minimum records per bin.
    pub min_per_bin: usize,
    pub binning: BinningMode,
    pub options: CurveOptions,
    pub nrf_dof: NrfDof,
}

impl Default for CurveSettings {
    fn default() -> Self {
        CurveSettings {
            n_bins: 21,
            min_per_bin: 9,
            binning: BinningMode::EqualPopulation,
            options: CurveOptions::default(),
            nrf_dof: NrfDof::NMinusOne,
        }
    }
}

/// One JSON document holding every tunable of every command.
///
/// `seed` is copied into each section's own seed when resolved, so a single
/// `--seed` reproduces a whole pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalConfig {
    pub schema: String,
    /// Constants, reference trap, probe, camera, profile options and imaging axis.
    pub environment: Environment,
    pub grid: GridSpec,
    pub campaign: CampaignConfig,
    pub curve: CurveSettings,
    pub shotnoise: ShotNoiseConfig,
    /// Trap power for the shot-noise study, mW.
    pub shotnoise_power: f64,
    pub dimple: DimpleConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            schema: SCHEMA.into(),
            environment: Environment::default(),
            grid: GridSpec::default(),
            campaign: CampaignConfig::default(),
            curve: CurveSettings::default(),
            shotnoise: ShotNoiseConfig::default(),
            shotnoise_power: 700.0,
            dimple: DimpleConfig::default(),
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl GlobalConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
        let cfg: GlobalConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if cfg.schema != SCHEMA {
            return Err(Error::Config(format!("schema '{}' is not '{SCHEMA}'", cfg.schema)));
        }
        Ok(cfg)
    }

    /// Applies command-line overrides and propagates the seed.
    pub fn resolve(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.out_dir = o;
        }
        self.campaign.seed = self.seed;
        self.curve.options.seed = self.seed;
        self.shotnoise.seed = self.seed;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        self.grid.validate()?;
        self.campaign.validate()?;
        self.dimple.validate()?;
        if self.curve.n_bins == 0 {
            return Err(Error::Config("curve.n_bins must be >= 1".into()));
        }
        if !(self.curve.options.threshold > 0.0 && self.curve.options.threshold < 1.0) {
            return Err(Error::Config("curve.threshold must lie in (0, 1)".into()));
        }
        if !(self.shotnoise_power > 0.0) {
            return Err(Error::Config("shotnoise_power must be > 0".into()));
        }
        Ok(())
    }
}
