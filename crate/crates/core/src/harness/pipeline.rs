//! Data generation and training stages, each a pure function of the
//! experiment config and a seed.

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{derive_seed, ExperimentConfig};
use crate::cpn::{train_cpn, Cpn, CpnData, CpnEpochLog};
use crate::dataset::{corrupt_samples, encode_dataset, label_episode, with_flips, FrameDatapoint, LatentDatapoint};
use crate::error::Result;
use crate::render::DepthFrame;
use crate::sim::episode::random_start;
use crate::sim::{generate_world, rollout_episode, Environment, World};
use crate::vae::{train_vae, EpochLog, Vae, VaeMode};

/// World `index` of a data-generation stage; environments cycle
/// sparse, medium, dense.
pub fn training_world(cfg: &ExperimentConfig, seed: u64, stage: &str, index: usize) -> Result<World> {
    let env = Environment::ALL[index % Environment::ALL.len()];
    generate_world(&cfg.world_params(env), derive_seed(seed, &format!("{stage}-world-{index}")))
}

/// `n` clean frames from random collision-free poses, spread evenly over
/// `worlds` generated worlds.
fn render_clean(cfg: &ExperimentConfig, seed: u64, stage: &str, n: usize, worlds: usize) -> Result<Vec<DepthFrame>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("{stage}-poses")));
    let mut frames = Vec::with_capacity(n);
    for w in 0..worlds {
        let count = n / worlds + usize::from(w < n % worlds);
        if count == 0 {
            continue;
        }
        let world = training_world(cfg, seed, stage, w)?;
        for _ in 0..count {
            let s = random_start(&world, &cfg.dynamics, cfg.data.start_margin, &mut rng)?;
            frames.push(cfg.sensor.clean(&world, &s));
        }
    }
    Ok(frames)
}

/// VAE training frames; each is corrupted with probability
/// `vae_corrupt_fraction`.
pub fn render_vae_frames(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<DepthFrame>> {
    let clean = render_clean(cfg, seed, "vae", cfg.data.vae_frames, cfg.data.vae_worlds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "vae-noise"));
    Ok(clean
        .into_iter()
        .map(|f| {
            if rng.gen_bool(cfg.data.vae_corrupt_fraction) {
                cfg.sensor.noisy(&f, &mut rng)
            } else {
                f
            }
        })
        .collect())
}

/// Held-out `(clean, corrupted)` evaluation frames from worlds unseen in
/// training; the corrupted set is the clean set passed through the noise
/// model.
pub fn render_eval_frames(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<DepthFrame>, Vec<DepthFrame>)> {
    let worlds = cfg.data.vae_worlds.min(cfg.data.eval_frames.max(1));
    let clean = render_clean(cfg, seed, "eval", cfg.data.eval_frames, worlds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "eval-noise"));
    let noisy = clean.iter().map(|f| cfg.sensor.noisy(f, &mut rng)).collect();
    Ok((clean, noisy))
}

/// Random-action episodes, labeled as they are produced, with mirrored
/// copies appended when `data.flip` is set.
pub fn collect_collision_samples(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<FrameDatapoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "collisions"));
    let worlds = cfg.data.collision_worlds;
    let mut samples = Vec::new();
    let mut collided = 0usize;
    for w in 0..worlds {
        let count = cfg.data.collision_episodes / worlds + usize::from(w < cfg.data.collision_episodes % worlds);
        if count == 0 {
            continue;
        }
        let world = training_world(cfg, seed, "collisions", w)?;
        for _ in 0..count {
            let start = random_start(&world, &cfg.dynamics, cfg.data.start_margin, &mut rng)?;
            let v0 = rng.gen_range(0.0..=cfg.data.start_speed_max);
            let start = start.with_body_velocity(nalgebra::Vector3::new(v0, 0.0, 0.0));
            let ep = rollout_episode(&world, start, &cfg.episode, &cfg.sensor, &cfg.dynamics, &mut rng)?;
            collided += usize::from(ep.collided_at.is_some());
            samples.extend(label_episode(&ep, &cfg.labels, &cfg.episode, &mut rng)?);
        }
    }
    info!(
        "collected {} samples from {} episodes ({} collided)",
        samples.len(),
        cfg.data.collision_episodes,
        collided
    );
    Ok(if cfg.data.flip { with_flips(samples) } else { samples })
}

/// Latent training set for the modular predictor: a share of the frames is
/// corrupted before encoding with the frozen encoder.
pub fn modular_training_set(
    cfg: &ExperimentConfig,
    samples: &[FrameDatapoint],
    vae: &Vae,
    seed: u64,
) -> Result<Vec<LatentDatapoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "cpn-noise"));
    // Chunked so only a slice of corrupted copies is alive at a time.
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(512) {
        let mixed = corrupt_samples(chunk, &cfg.sensor.noise, cfg.data.cpn_corrupt_fraction, &mut rng);
        out.extend(encode_dataset(&mixed, vae)?);
    }
    Ok(out)
}

pub fn train_sevae(cfg: &ExperimentConfig, frames: &[DepthFrame], mode: VaeMode, seed: u64) -> Result<(Vae, Vec<EpochLog>)> {
    let vc = crate::vae::VaeConfig { mode, ..cfg.vae.clone() };
    train_vae(frames, &vc, &cfg.vae_train, derive_seed(seed, &format!("train-vae-{}", mode.name())))
}

pub fn train_modular(cfg: &ExperimentConfig, data: &[LatentDatapoint], seed: u64) -> Result<(Cpn, Vec<CpnEpochLog>)> {
    train_cpn(CpnData::Latent(data), &cfg.cpn, &cfg.cpn_train, derive_seed(seed, "train-cpn-modular"))
}

pub fn train_end_to_end(cfg: &ExperimentConfig, data: &[FrameDatapoint], seed: u64) -> Result<(Cpn, Vec<CpnEpochLog>)> {
    train_cpn(CpnData::Frames(data), &cfg.cpn_e2e, &cfg.cpn_e2e_train, derive_seed(seed, "train-cpn-end-to-end"))
}

/// Every trained model with its training log.
pub struct TrainedStack {
    pub sevae: Vae,
    pub sevae_log: Vec<EpochLog>,
    pub vanilla: Vae,
    pub vanilla_log: Vec<EpochLog>,
    pub modular: Cpn,
    pub modular_log: Vec<CpnEpochLog>,
    pub end_to_end: Cpn,
    pub end_to_end_log: Vec<CpnEpochLog>,
}

impl TrainedStack {
    pub fn models(&self) -> super::mission::Models<'_> {
        super::mission::Models {
            vae: Some(&self.sevae),
            modular: Some(&self.modular),
            end_to_end: Some(&self.end_to_end),
        }
    }
}

/// Renders, collects and trains everything from `(cfg, seed)`.
pub fn train_stack(cfg: &ExperimentConfig, seed: u64) -> Result<TrainedStack> {
    cfg.validate()?;
    let frames = render_vae_frames(cfg, seed)?;
    info!("rendered {} vae frames", frames.len());
    let (sevae, sevae_log) = train_sevae(cfg, &frames, VaeMode::Semantic, seed)?;
    info!("sevae trained, final val loss {:?}", sevae_log.last().map(|l| l.val.total));
    let (vanilla, vanilla_log) = train_sevae(cfg, &frames, VaeMode::Vanilla, seed)?;
    info!("vanilla vae trained, final val loss {:?}", vanilla_log.last().map(|l| l.val.total));
    drop(frames);
    let samples = collect_collision_samples(cfg, seed)?;
    let latent = modular_training_set(cfg, &samples, &sevae, seed)?;
    let (modular, modular_log) = train_modular(cfg, &latent, seed)?;
    info!("modular cpn trained, final val {:?}", modular_log.last().map(|l| l.val));
    let (end_to_end, end_to_end_log) = train_end_to_end(cfg, &samples, seed)?;
    info!("end-to-end cpn trained, final val {:?}", end_to_end_log.last().map(|l| l.val));
    Ok(TrainedStack {
        sevae,
        sevae_log,
        vanilla,
        vanilla_log,
        modular,
        modular_log,
        end_to_end,
        end_to_end_log,
    })
}
