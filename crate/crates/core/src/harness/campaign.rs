//! Paired-seed mission campaigns and the thin-obstacle safety audit.

use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{derive_seed, ExperimentConfig};
use super::mission::{run_mission, Method, MissionResult, Models};
use super::pipeline::training_world;
use super::vehicle::rollout_first_collision;
use crate::error::{invalid, Result};
use crate::planner::{
    build_library, sigma_points, uncertainty_aware_scores, CollisionPredictor, EndToEndPredictor, GoalVector,
    ModularPredictor, Observation, Outcome,
};
use crate::sim::dynamics::{RobotState, StateCovariance};
use crate::sim::episode::random_start;
use crate::sim::{generate_world, Environment};

fn check_models(methods: &[Method], models: &Models<'_>) -> Result<()> {
    for m in methods {
        let ok = match m {
            Method::Modular => models.vae.is_some() && models.modular.is_some(),
            Method::EndToEnd => models.end_to_end.is_some(),
            Method::Oracle => true,
        };
        if !ok {
            return Err(invalid(format!("campaign method {m} has no trained model")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignRun {
    pub environment: Environment,
    pub run: usize,
    pub world_seed: u64,
    pub result: MissionResult,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignReport {
    pub runs_per_cell: usize,
    pub environments: Vec<Environment>,
    pub methods: Vec<Method>,
    /// Sorted by environment, run, then method.
    pub runs: Vec<CampaignRun>,
}

impl CampaignReport {
    pub fn successes(&self, env: Environment, method: Method) -> usize {
        self.runs
            .iter()
            .filter(|r| r.environment == env && r.result.method == method && r.result.outcome == Outcome::Success)
            .count()
    }

    pub fn total_violations(&self, method: Method) -> usize {
        self.runs
            .iter()
            .filter(|r| r.result.method == method)
            .filter_map(|r| r.result.audit.as_ref())
            .map(|a| a.violations)
            .sum()
    }

    /// One row per environment and method.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("environment,method,successes,runs\n");
        for env in &self.environments {
            for m in &self.methods {
                s.push_str(&format!("{},{},{},{}\n", env.name(), m, self.successes(*env, *m), self.runs_per_cell));
            }
        }
        s
    }

    pub fn runs_csv(&self) -> String {
        let mut s = String::from(
            "environment,run,world_seed,method,outcome,cycles,distance,min_clearance,unsafe_cycles,violations\n",
        );
        for r in &self.runs {
            let m = &r.result;
            s.push_str(&format!(
                "{},{},{},{},{},{},{:.4},{:.4},{},{}\n",
                r.environment.name(),
                r.run,
                r.world_seed,
                m.method,
                m.outcome.name(),
                m.cycles,
                m.distance,
                m.min_clearance,
                m.unsafe_cycles,
                m.audit.as_ref().map_or(String::new(), |a| a.violations.to_string())
            ));
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::File::create(dir.join("campaign_summary.csv"))?.write_all(self.summary_csv().as_bytes())?;
        std::fs::File::create(dir.join("campaign_runs.csv"))?.write_all(self.runs_csv().as_bytes())?;
        std::fs::File::create(dir.join("campaign.txt"))?.write_all(self.to_string().as_bytes())?;
        Ok(())
    }
}

impl fmt::Display for CampaignReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<10}", "method")?;
        for env in &self.environments {
            write!(f, " {:>10}", env.name())?;
        }
        writeln!(f)?;
        for m in &self.methods {
            write!(f, "{:<10}", m.name())?;
            for env in &self.environments {
                let pct = 100.0 * self.successes(*env, *m) as f64 / self.runs_per_cell as f64;
                write!(f, " {:>9.0}%", pct)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Every method flies the same world and start pose for each
/// `(environment, run)`; missions are audited against ground truth.
pub fn run_campaign(cfg: &ExperimentConfig, methods: &[Method], models: Models<'_>, seed: u64) -> Result<CampaignReport> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(invalid("campaign needs at least one method"));
    }
    check_models(methods, &models)?;
    let mut runs = Vec::new();
    for &env in &cfg.campaign.environments {
        for run in 0..cfg.campaign.runs {
            let world_seed = derive_seed(seed, &format!("campaign-world-{}-{run}", env.name()));
            let mission_seed = derive_seed(seed, &format!("campaign-mission-{}-{run}", env.name()));
            let world = generate_world(&cfg.world_params(env), world_seed)?;
            for &m in methods {
                let result = run_mission(&world, cfg, m, models, mission_seed, true)?;
                log::info!("{} run {run}: {}", env.name(), result.summary_line());
                runs.push(CampaignRun {
                    environment: env,
                    run,
                    world_seed,
                    result,
                });
            }
        }
    }
    Ok(CampaignReport {
        runs_per_cell: cfg.campaign.runs,
        environments: cfg.campaign.environments.clone(),
        methods: methods.to_vec(),
        runs,
    })
}

/// Frames of the safety audit and, per method, how many ground-truth
/// colliding sequences were scored safe.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SafetyReport {
    pub frames: usize,
    /// Library sequences whose ground-truth rollout collides, over all frames.
    pub colliding: usize,
    pub modular_missed: usize,
    pub end_to_end_missed: usize,
}

impl SafetyReport {
    pub fn modular_rate(&self) -> f64 {
        self.modular_missed as f64 / self.colliding.max(1) as f64
    }

    pub fn end_to_end_rate(&self) -> f64 {
        self.end_to_end_missed as f64 / self.colliding.max(1) as f64
    }
}

impl fmt::Display for SafetyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "frames={} colliding_sequences={}", self.frames, self.colliding)?;
        writeln!(f, "modular    scored safe: {} ({:.4})", self.modular_missed, self.modular_rate())?;
        write!(f, "end-to-end scored safe: {} ({:.4})", self.end_to_end_missed, self.end_to_end_rate())
    }
}

/// Scores the library on `frames` corrupted views that contain thin
/// obstacles, taken from random poses in the thin-rod section while flying
/// forward, and counts ground-truth-colliding sequences below the safety
/// threshold for each stack. Poses without any colliding sequence are
/// skipped.
pub fn thin_obstacle_audit(cfg: &ExperimentConfig, models: Models<'_>, frames: usize, seed: u64) -> Result<SafetyReport> {
    check_models(&[Method::Modular, Method::EndToEnd], &models)?;
    let (vae, modular, e2e) = (models.vae.unwrap(), models.modular.unwrap(), models.end_to_end.unwrap());
    let library = build_library(&cfg.library)?;
    let substeps = cfg.episode.substeps(&cfg.dynamics);
    let covariance = StateCovariance::velocity_only(cfg.mission.sigma_v);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "thin-audit"));
    let mut report = SafetyReport::default();
    let mut world_index = 0usize;
    let mut attempts = 0usize;
    while report.frames < frames {
        let world = training_world(cfg, seed, "thin-audit", world_index)?;
        world_index += 1;
        let Some(&thin_section) = world.sections().last() else {
            return Err(invalid("world has no sections"));
        };
        for _ in 0..frames.max(20) {
            attempts += 1;
            if attempts > 200 * frames.max(1) {
                return Err(invalid("could not find enough thin-obstacle views"));
            }
            let s = random_start(&world, &cfg.dynamics, cfg.data.start_margin, &mut rng)?;
            if !thin_section.contains([s.position().x, s.position().y]) {
                continue;
            }
            let v = rng.gen_range(cfg.episode.speed[0]..=cfg.episode.speed[1]);
            let s = s.with_body_velocity(Vector3::new(v, 0.0, 0.0));
            let clean = cfg.sensor.clean(&world, &s);
            if clean.semantic_count() == 0 {
                continue;
            }
            let start = RobotState::from_partial(s.position(), s.yaw(), &s.partial());
            let collides: Vec<bool> = library
                .primitives
                .iter()
                .map(|p| rollout_first_collision(&world, &start, &p.action, library.horizon, &cfg.dynamics, substeps).is_some())
                .collect();
            if !collides.iter().any(|c| *c) {
                continue;
            }
            let obs = Observation {
                frame: cfg.sensor.noisy(&clean, &mut rng),
                state: s.partial(),
                covariance,
                goal: GoalVector::new([1.0, 0.0, 0.0])?,
            };
            let sigma = sigma_points(&obs.state.0, &covariance.0, cfg.planner.lambda)?;
            let count = |p: &mut dyn CollisionPredictor| -> Result<usize> {
                let scores = uncertainty_aware_scores(p, &obs, &sigma, &library)?;
                Ok(scores
                    .iter()
                    .zip(&collides)
                    .filter(|(s, c)| **c && **s < cfg.planner.threshold)
                    .count())
            };
            report.modular_missed += count(&mut ModularPredictor { vae, cpn: modular })?;
            report.end_to_end_missed += count(&mut EndToEndPredictor { cpn: e2e })?;
            report.colliding += collides.iter().filter(|c| **c).count();
            report.frames += 1;
            if report.frames == frames {
                break;
            }
        }
    }
    Ok(report)
}
