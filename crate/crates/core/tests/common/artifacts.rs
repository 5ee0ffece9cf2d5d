//! Produces every persisted artifact of a small pipeline run so that two
//! runs can be compared byte for byte and each container reloaded.

use std::path::{Path, PathBuf};

use thinnav::cpn::write_metrics_csv;
use thinnav::dataset::Dataset;
use thinnav::harness::pipeline::{
    collect_collision_samples, modular_training_set, render_eval_frames, render_vae_frames, train_end_to_end,
    train_modular, train_sevae,
};
use thinnav::harness::{
    derive_seed, eval_reconstruction, load_cpn, load_vae, run_campaign, save_cpn, save_vae, Codec, Domain,
    ExperimentConfig, Method, Models,
};
use thinnav::sim::worldfile::{load_world, save_world};
use thinnav::sim::{generate_world, Environment};
use thinnav::vae::{write_loss_csv, VaeMode};

pub fn tiny_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml(include_str!("../../../../docs/smoke.toml")).unwrap();
    cfg.data.vae_frames = 16;
    cfg.data.eval_frames = 4;
    cfg.data.collision_episodes = 6;
    cfg.vae_train.epochs = 1;
    cfg.cpn_train.epochs = 1;
    cfg.cpn_e2e_train.epochs = 1;
    cfg.mission.max_cycles = 12;
    cfg
}

/// Container kind of an artifact file, by extension.
pub enum Container {
    World,
    Dataset,
    Vae,
    Cpn,
    Text,
}

pub fn container(path: &Path) -> Container {
    let name = path.file_name().unwrap().to_string_lossy();
    match path.extension().and_then(|e| e.to_str()) {
        Some("thw") => Container::World,
        Some("thds") => Container::Dataset,
        Some("ckpt") if name.contains("vae") => Container::Vae,
        Some("ckpt") => Container::Cpn,
        _ => Container::Text,
    }
}

/// Runs every stage of `cfg` under `seed`, writing into `dir`; returns the
/// written files in order.
pub fn produce(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Vec<PathBuf> {
    let p = |n: &str| dir.join(n);
    let world = generate_world(&cfg.world_params(Environment::Sparse), derive_seed(seed, "world-sparse")).unwrap();
    save_world(&world, &p("world_sparse.thw")).unwrap();
    let frames = render_vae_frames(cfg, seed).unwrap();
    Dataset::frames(frames.clone()).unwrap().save(&p("vae_frames.thds")).unwrap();
    let (clean, noisy) = render_eval_frames(cfg, seed).unwrap();
    Dataset::frames(clean.clone()).unwrap().save(&p("eval_clean.thds")).unwrap();
    Dataset::frames(noisy.clone()).unwrap().save(&p("eval_corrupted.thds")).unwrap();
    let (sevae, slog) = train_sevae(cfg, &frames, VaeMode::Semantic, seed).unwrap();
    let (vanilla, vlog) = train_sevae(cfg, &frames, VaeMode::Vanilla, seed).unwrap();
    save_vae(&sevae, &p("sevae.ckpt")).unwrap();
    save_vae(&vanilla, &p("vanilla_vae.ckpt")).unwrap();
    write_loss_csv(&slog, &p("semantic_loss.csv")).unwrap();
    write_loss_csv(&vlog, &p("vanilla_loss.csv")).unwrap();
    let samples = collect_collision_samples(cfg, seed).unwrap();
    Dataset::collision(samples.clone()).unwrap().save(&p("collisions.thds")).unwrap();
    let latent = modular_training_set(cfg, &samples, &sevae, seed).unwrap();
    Dataset::latent(latent.clone()).unwrap().save(&p("collisions_latent.thds")).unwrap();
    let (modular, mlog) = train_modular(cfg, &latent, seed).unwrap();
    let (e2e, elog) = train_end_to_end(cfg, &samples, seed).unwrap();
    save_cpn(&modular, &p("cpn_modular.ckpt")).unwrap();
    save_cpn(&e2e, &p("cpn_end_to_end.ckpt")).unwrap();
    write_metrics_csv(&mlog, &p("cpn_modular_metrics.csv")).unwrap();
    write_metrics_csv(&elog, &p("cpn_end_to_end_metrics.csv")).unwrap();
    let recon = eval_reconstruction(
        &[(Domain::Clean, &clean), (Domain::Corrupted, &noisy)],
        &[
            Codec::Fft { k: 64 },
            Codec::Vae { name: "vanilla-vae", vae: &vanilla },
            Codec::Vae { name: "sevae", vae: &sevae },
        ],
    )
    .unwrap();
    recon.write_csv(&p("recon.csv")).unwrap();
    let models = Models {
        vae: Some(&sevae),
        modular: Some(&modular),
        end_to_end: Some(&e2e),
    };
    let campaign = run_campaign(cfg, &[Method::Modular, Method::EndToEnd, Method::Oracle], models, seed).unwrap();
    campaign.write(dir).unwrap();
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

/// Loads a container file and serializes it again.
pub fn reserialize(path: &Path) -> Option<thinnav::Result<Vec<u8>>> {
    let out = match container(path) {
        Container::World => load_world(path).map(|w| thinnav::sim::worldfile::world_to_bytes(&w)),
        Container::Dataset => Dataset::load(path).map(|d| d.to_bytes()),
        Container::Vae => load_vae(path).map(|v| v.to_checkpoint().to_bytes()),
        Container::Cpn => load_cpn(path).map(|c| c.to_checkpoint().to_bytes()),
        Container::Text => return None,
    };
    Some(out)
}

/// Byte-identity of two runs, lossless reload of every container, and
/// rejection of single-byte corruption. Returns violations.
pub fn persistence_checks(a: &[PathBuf], b: &[PathBuf]) -> Vec<String> {
    let mut f = Vec::new();
    let names = |v: &[PathBuf]| v.iter().map(|p| p.file_name().unwrap().to_owned()).collect::<Vec<_>>();
    if names(a) != names(b) {
        f.push(format!("runs wrote different files: {:?} vs {:?}", names(a), names(b)));
        return f;
    }
    for (pa, pb) in a.iter().zip(b) {
        let (ba, bb) = (std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
        if ba != bb {
            f.push(format!("{} differs between runs", pa.display()));
        }
        let Some(re) = reserialize(pa) else { continue };
        match re {
            Ok(bytes) if bytes == ba => {}
            Ok(_) => f.push(format!("{} changed on reload", pa.display())),
            Err(e) => f.push(format!("{} failed to load: {e}", pa.display())),
        }
        let tmp = pa.with_extension("corrupt");
        for pos in [0, ba.len() / 3, ba.len() / 2, ba.len() - 5, ba.len() - 1] {
            let mut bad = ba.clone();
            bad[pos] ^= 0x10;
            std::fs::write(&tmp, &bad).unwrap();
            let renamed = tmp.with_file_name(format!("c_{}", pa.file_name().unwrap().to_string_lossy()));
            std::fs::rename(&tmp, &renamed).unwrap();
            if let Some(Ok(_)) = reserialize(&renamed) {
                f.push(format!("{} accepted a flipped byte at {pos}", pa.display()));
            }
            std::fs::remove_file(&renamed).unwrap();
        }
    }
    f
}
