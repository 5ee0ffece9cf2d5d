//! Experiment configuration, read from TOML. Every section and key is
//! optional; missing values take the desk-scale defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cpn::{CpnConfig, CpnTrainConfig, CpnVariant};
use crate::dataset::LabelConfig;
use crate::error::{invalid, Error, Result};
use crate::planner::{LibraryConfig, PlannerConfig};
use crate::render::SensorConfig;
use crate::sim::{DynamicsParams, EpisodeConfig, Environment, WorldGenParams};
use crate::vae::{VaeConfig, VaeTrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// Frames rendered for VAE training.
    pub vae_frames: usize,
    /// Share of VAE frames passed through the corruption model.
    pub vae_corrupt_fraction: f64,
    /// Worlds the VAE frames are spread over.
    pub vae_worlds: usize,
    /// Held-out frames for reconstruction evaluation.
    pub eval_frames: usize,
    /// Random-action episodes for collision datasets.
    pub collision_episodes: usize,
    /// Worlds the episodes are spread over.
    pub collision_worlds: usize,
    /// Share of modular training frames corrupted before encoding.
    pub cpn_corrupt_fraction: f64,
    /// Append left-right mirrored copies of every collision sample.
    pub flip: bool,
    /// Episodes start with a forward speed drawn from `[0, start_speed_max]`.
    pub start_speed_max: f64,
    /// Clearance kept around sampled start poses (m).
    pub start_margin: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            vae_frames: 2000,
            vae_corrupt_fraction: 0.5,
            vae_worlds: 12,
            eval_frames: 200,
            collision_episodes: 300,
            collision_worlds: 12,
            cpn_corrupt_fraction: 0.5,
            flip: true,
            start_speed_max: 1.5,
            start_margin: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionConfig {
    pub max_cycles: usize,
    /// Start `x`, before the first section.
    pub start_x: f64,
    /// Start `y` drawn from `[-start_y, start_y]`.
    pub start_y: f64,
    pub start_z: [f64; 2],
    /// Start yaw drawn from `[-yaw_spread, yaw_spread]` (rad).
    pub yaw_spread: f64,
    /// Feed the planner corrupted frames.
    pub corrupt: bool,
    /// Velocity standard deviation of the state estimate (m/s).
    pub sigma_v: f64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            max_cycles: 400,
            start_x: -1.5,
            start_y: 4.0,
            start_z: [1.2, 2.2],
            yaw_spread: 30f64.to_radians(),
            corrupt: true,
            sigma_v: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub runs: usize,
    pub environments: Vec<Environment>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            runs: 20,
            environments: Environment::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// World generation; `radii` is replaced per environment class.
    pub world: WorldGenParams,
    pub sensor: SensorConfig,
    pub dynamics: DynamicsParams,
    pub episode: EpisodeConfig,
    pub labels: LabelConfig,
    pub data: DataConfig,
    pub vae: VaeConfig,
    pub vae_train: VaeTrainConfig,
    pub cpn: CpnConfig,
    pub cpn_e2e: CpnConfig,
    pub cpn_train: CpnTrainConfig,
    pub cpn_e2e_train: CpnTrainConfig,
    pub library: LibraryConfig,
    pub planner: PlannerConfig,
    pub mission: MissionConfig,
    pub campaign: CampaignConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            world: WorldGenParams::default(),
            sensor: SensorConfig::default(),
            dynamics: DynamicsParams::default(),
            episode: EpisodeConfig::default(),
            labels: LabelConfig::default(),
            data: DataConfig::default(),
            vae: VaeConfig::desk(),
            vae_train: VaeTrainConfig::default(),
            cpn: CpnConfig::default(),
            cpn_e2e: CpnConfig::end_to_end(),
            cpn_train: CpnTrainConfig::default(),
            cpn_e2e_train: CpnTrainConfig::default(),
            library: LibraryConfig::default(),
            planner: PlannerConfig::default(),
            mission: MissionConfig::default(),
            campaign: CampaignConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(format!("config {}", path.display())),
            _ => Error::Io(e),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn world_params(&self, env: Environment) -> WorldGenParams {
        WorldGenParams {
            radii: env.radii(),
            ..self.world.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.sensor.validate()?;
        self.dynamics.validate()?;
        self.vae.validate()?;
        self.vae_train.validate()?;
        self.cpn.validate()?;
        self.cpn_e2e.validate()?;
        self.cpn_train.validate()?;
        self.cpn_e2e_train.validate()?;
        self.library.validate()?;
        self.planner.validate()?;
        if (self.vae.height, self.vae.width) != (self.sensor.out_height, self.sensor.out_width) {
            return Err(invalid("vae resolution must equal the sensor output resolution"));
        }
        if self.cpn.variant != CpnVariant::Modular || self.cpn_e2e.variant != CpnVariant::EndToEnd {
            return Err(invalid("[cpn] must be modular and [cpn_e2e] end-to-end"));
        }
        if self.cpn.latent != self.vae.latent {
            return Err(invalid("cpn latent size must equal the vae latent size"));
        }
        if (self.cpn_e2e.height, self.cpn_e2e.width) != (self.sensor.out_height, self.sensor.out_width) {
            return Err(invalid("end-to-end cpn resolution must equal the sensor output resolution"));
        }
        let t = self.labels.horizon;
        if self.cpn.horizon != t || self.cpn_e2e.horizon != t || self.library.horizon != t {
            return Err(invalid("label, cpn and library horizons must agree"));
        }
        if self.data.vae_worlds == 0 || self.data.collision_worlds == 0 || self.campaign.runs == 0 {
            return Err(invalid("world counts and campaign runs must be >= 1"));
        }
        Ok(())
    }
}

/// Independent stream seed for a named stage.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, mixed with the seed by a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
