//! Single closed-loop missions across a generated course.

use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, ExperimentConfig};
use super::vehicle::{OraclePredictor, SafetyAudit, SimVehicle};
use crate::cpn::Cpn;
use crate::error::{invalid, Result};
use crate::planner::{
    build_library, receding_horizon_run, CollisionPredictor, EndToEndPredictor, ModularPredictor, Outcome,
};
use crate::sim::dynamics::{RobotState, StateCovariance};
use crate::sim::world::World;
use crate::vae::Vae;

/// Planner arm under test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Modular,
    EndToEnd,
    /// Ground-truth geometric predictor in place of the network.
    Oracle,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Modular, Method::EndToEnd, Method::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Method::Modular => "modular",
            Method::EndToEnd => "end-to-end",
            Method::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| invalid(format!("unknown method {s:?} (expected modular, end-to-end or oracle)")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Trained networks; the oracle needs none.
#[derive(Clone, Copy)]
pub struct Models<'a> {
    pub vae: Option<&'a Vae>,
    pub modular: Option<&'a Cpn>,
    pub end_to_end: Option<&'a Cpn>,
}

impl Models<'_> {
    pub fn none() -> Self {
        Self {
            vae: None,
            modular: None,
            end_to_end: None,
        }
    }
}

/// Collision-free start before the first section, facing roughly +x.
pub fn sample_start(world: &World, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<RobotState> {
    let m = &cfg.mission;
    let margin = cfg.dynamics.radius + cfg.data.start_margin;
    for _ in 0..1000 {
        let p = Vector3::new(
            m.start_x,
            rng.gen_range(-m.start_y..=m.start_y),
            rng.gen_range(m.start_z[0]..=m.start_z[1]),
        );
        let yaw = rng.gen_range(-m.yaw_spread..=m.yaw_spread);
        if world.clearance(&p, 5.0) > margin {
            return Ok(RobotState::at_rest(p, yaw));
        }
    }
    Err(invalid("no collision-free mission start found"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MissionResult {
    pub method: Method,
    pub seed: u64,
    pub outcome: Outcome,
    pub cycles: usize,
    /// Path length flown (m).
    pub distance: f64,
    /// Closest approach to any obstacle surface, net of the vehicle radius.
    pub min_clearance: f64,
    /// Cycles that fell back to the lowest-score sequence.
    pub unsafe_cycles: usize,
    pub audit: Option<SafetyAudit>,
    pub path: Vec<Vector3<f64>>,
}

impl MissionResult {
    pub fn summary_line(&self) -> String {
        let audit = match &self.audit {
            Some(a) => format!(" violations={} doomed={}", a.violations, a.doomed),
            None => String::new(),
        };
        format!(
            "method={} seed={} outcome={} cycles={} distance={:.2} min_clearance={:.3} unsafe_cycles={}{}",
            self.method,
            self.seed,
            self.outcome.name(),
            self.cycles,
            self.distance,
            self.min_clearance,
            self.unsafe_cycles,
            audit
        )
    }

    pub fn write_path_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "x,y,z")?;
        for p in &self.path {
            writeln!(f, "{},{},{}", p.x, p.y, p.z)?;
        }
        f.flush()?;
        Ok(())
    }
}

/// Flies one mission in `world` with `method`. Start pose and sensor noise
/// depend only on `seed`, so different methods with the same seed face the
/// same start and noise stream.
pub fn run_mission(
    world: &World,
    cfg: &ExperimentConfig,
    method: Method,
    models: Models<'_>,
    seed: u64,
    audit: bool,
) -> Result<MissionResult> {
    let library = build_library(&cfg.library)?;
    let substeps = cfg.episode.substeps(&cfg.dynamics);
    let mut start_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "mission-start"));
    let start = sample_start(world, cfg, &mut start_rng)?;
    let noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "mission-noise"));
    let mut vehicle = SimVehicle::new(
        world,
        cfg.sensor.clone(),
        cfg.dynamics.clone(),
        substeps,
        start,
        cfg.world.course_length(),
        cfg.mission.corrupt,
        noise_rng,
    );
    vehicle.covariance = StateCovariance::velocity_only(cfg.mission.sigma_v);
    if audit {
        vehicle.audit = Some((SafetyAudit::default(), library.clone()));
    }
    let missing = |what: &str| invalid(format!("{method} mission needs a trained {what}"));
    let mut predictor: Box<dyn CollisionPredictor + '_> = match method {
        Method::Modular => Box::new(ModularPredictor {
            vae: models.vae.ok_or_else(|| missing("vae"))?,
            cpn: models.modular.ok_or_else(|| missing("modular cpn"))?,
        }),
        Method::EndToEnd => Box::new(EndToEndPredictor {
            cpn: models.end_to_end.ok_or_else(|| missing("end-to-end cpn"))?,
        }),
        Method::Oracle => Box::new(OraclePredictor {
            world,
            dynamics: cfg.dynamics.clone(),
            substeps,
            probe: vehicle.probe.clone(),
        }),
    };
    let log = receding_horizon_run(&mut vehicle, predictor.as_mut(), &library, &cfg.planner, cfg.mission.max_cycles)?;
    Ok(MissionResult {
        method,
        seed,
        outcome: log.outcome,
        cycles: log.cycles.len(),
        distance: vehicle.distance(),
        min_clearance: vehicle.min_clearance,
        unsafe_cycles: log.cycles.iter().filter(|c| c.selection.unsafe_fallback).count(),
        audit: vehicle.audit.take().map(|(a, _)| a),
        path: std::mem::take(&mut vehicle.path),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::world::Obstacle;

    fn small_cfg() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.world.section_length = 4.0;
        c.world.sections = 1;
        c.mission.start_y = 0.5;
        c.mission.yaw_spread = 0.0;
        c.mission.max_cycles = 60;
        c.mission.corrupt = false;
        c
    }

    #[test]
    fn oracle_crosses_empty_course() {
        let cfg = small_cfg();
        let r = run_mission(&World::empty(), &cfg, Method::Oracle, Models::none(), 3, true).unwrap();
        assert_eq!(r.outcome, Outcome::Success);
        assert!(r.distance > 5.0);
        assert_eq!(r.audit.unwrap().violations, 0);
    }

    #[test]
    fn oracle_avoids_wall_in_path() {
        let cfg = small_cfg();
        let world = World::new(vec![Obstacle::cuboid([2.0, 0.0], [0.2, 1.0], 0.0, 0.0, 4.0)], None, vec![]);
        let r = run_mission(&world, &cfg, Method::Oracle, Models::none(), 5, true).unwrap();
        assert_eq!(r.outcome, Outcome::Success, "{}", r.summary_line());
        assert!(r.min_clearance > 0.0);
        assert_eq!(r.audit.unwrap().violations, 0);
    }

    #[test]
    fn same_seed_same_mission() {
        let cfg = small_cfg();
        let a = run_mission(&World::empty(), &cfg, Method::Oracle, Models::none(), 9, false).unwrap();
        let b = run_mission(&World::empty(), &cfg, Method::Oracle, Models::none(), 9, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn learned_arm_without_models_errors() {
        let cfg = small_cfg();
        assert!(run_mission(&World::empty(), &cfg, Method::Modular, Models::none(), 1, false).is_err());
        assert_eq!(Method::parse("end-to-end").unwrap(), Method::EndToEnd);
        assert!(Method::parse("x").is_err());
    }
}
