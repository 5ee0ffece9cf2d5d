//! Experiment harness: configuration, simulated vehicle, missions,
//! reconstruction evaluation, campaigns and the end-to-end training pipeline.

pub mod campaign;
pub mod config;
pub mod mission;
pub mod pipeline;
pub mod recon;
pub mod store;
pub mod vehicle;

pub use campaign::{run_campaign, thin_obstacle_audit, CampaignReport, CampaignRun, SafetyReport};
pub use config::{derive_seed, CampaignConfig, DataConfig, ExperimentConfig, MissionConfig};
pub use mission::{run_mission, sample_start, Method, MissionResult, Models};
pub use pipeline::{train_stack, TrainedStack};
pub use recon::{eval_reconstruction, image_errors, Codec, Domain, ReconReport, ReconRow};
pub use vehicle::{rollout_first_collision, OraclePredictor, PoseProbe, SafetyAudit, SimVehicle};
pub use store::{load_cpn, load_vae, save_cpn, save_vae};
