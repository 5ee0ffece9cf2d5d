use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use thinnav::cpn::{write_metrics_csv, CpnVariant};
use thinnav::dataset::Dataset;
use thinnav::harness::pipeline::{
    collect_collision_samples, modular_training_set, render_eval_frames, render_vae_frames, train_end_to_end,
    train_modular, train_sevae,
};
use thinnav::harness::{
    derive_seed, eval_reconstruction, load_cpn, load_vae, run_campaign, run_mission, save_cpn, save_vae, Codec, Domain,
    ExperimentConfig, Method, Models,
};
use thinnav::render::export_frame;
use thinnav::sim::worldfile::{save_world, world_summary};
use thinnav::sim::{generate_world, Environment};
use thinnav::vae::{write_loss_csv, VaeMode};
use thinnav::{Error, Result};

#[derive(Parser)]
#[command(name = "thinnav", version, about = "Thin-obstacle-aware navigation pipeline")]
struct Cli {
    /// TOML experiment configuration; defaults apply to anything missing.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for every artifact read or written.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Env {
    Sparse,
    Medium,
    Dense,
}

impl From<Env> for Environment {
    fn from(e: Env) -> Self {
        match e {
            Env::Sparse => Environment::Sparse,
            Env::Medium => Environment::Medium,
            Env::Dense => Environment::Dense,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Semantic,
    Vanilla,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Modular,
    EndToEnd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Arm {
    Modular,
    EndToEnd,
    Oracle,
}

impl From<Arm> for Method {
    fn from(a: Arm) -> Self {
        match a {
            Arm::Modular => Method::Modular,
            Arm::EndToEnd => Method::EndToEnd,
            Arm::Oracle => Method::Oracle,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a world and write it to `<out>/world_<env>.thw`.
    GenWorld {
        #[arg(long, value_enum, default_value = "sparse")]
        env: Env,
    },
    /// Render VAE training frames and held-out clean/corrupted evaluation frames.
    RenderDataset,
    /// Roll out random-action episodes and write the labeled collision dataset.
    CollectCollisions,
    /// Train a VAE on `<out>/vae_frames.thds`.
    TrainVae {
        #[arg(long, value_enum, default_value = "semantic")]
        mode: Mode,
    },
    /// Encode the collision dataset with the trained semantic VAE.
    EncodeDataset,
    /// Train a collision predictor.
    TrainCpn {
        #[arg(long, value_enum, default_value = "modular")]
        variant: Variant,
    },
    /// Compare FFT, vanilla VAE and semantic VAE reconstructions.
    EvalRecon {
        /// Retained FFT coefficients.
        #[arg(long, default_value_t = 64)]
        k: usize,
    },
    /// Fly one mission and write its trajectory.
    RunMission {
        #[arg(long, value_enum, default_value = "sparse")]
        env: Env,
        #[arg(long, value_enum, default_value = "modular")]
        method: Arm,
        /// Run index; selects the world and start pose.
        #[arg(long, default_value_t = 0)]
        run: usize,
    },
    /// Paired-seed missions for every configured environment.
    RunCampaign {
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["modular", "end-to-end"])]
        methods: Vec<Arm>,
    },
    /// Dataset utilities.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Write frames of a frame or collision dataset as 16-bit PGM files.
    ExportFrames(ExportArgs),
    /// Print the effective configuration as TOML.
    PrintConfig,
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Print a dataset header summary.
    Info { path: PathBuf },
}

#[derive(Args)]
struct ExportArgs {
    dataset: PathBuf,
    #[arg(long, default_value_t = 16)]
    count: usize,
}

struct Ctx {
    cfg: ExperimentConfig,
    seed: u64,
    out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn ensure_out(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out)?;
        Ok(())
    }
}

fn vae_file(mode: VaeMode) -> &'static str {
    match mode {
        VaeMode::Semantic => "sevae.ckpt",
        VaeMode::Vanilla => "vanilla_vae.ckpt",
    }
}

fn cpn_file(v: CpnVariant) -> &'static str {
    match v {
        CpnVariant::Modular => "cpn_modular.ckpt",
        CpnVariant::EndToEnd => "cpn_end_to_end.ckpt",
    }
}

fn campaign_world_path(out: &Path, env: Environment) -> PathBuf {
    out.join(format!("world_{}.thw", env.name()))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let ctx = Ctx {
        cfg,
        seed: cli.seed,
        out: cli.out,
    };
    match cli.command {
        Command::GenWorld { env } => {
            ctx.ensure_out()?;
            let env: Environment = env.into();
            let world = generate_world(&ctx.cfg.world_params(env), derive_seed(ctx.seed, &format!("world-{}", env.name())))?;
            let path = campaign_world_path(&ctx.out, env);
            save_world(&world, &path)?;
            println!("{}", world_summary(&world));
            println!("wrote {}", path.display());
        }
        Command::RenderDataset => {
            ctx.ensure_out()?;
            let frames = Dataset::frames(render_vae_frames(&ctx.cfg, ctx.seed)?)?;
            frames.save(&ctx.path("vae_frames.thds"))?;
            println!("{}", frames.info());
            let (clean, noisy) = render_eval_frames(&ctx.cfg, ctx.seed)?;
            Dataset::frames(clean)?.save(&ctx.path("eval_clean.thds"))?;
            Dataset::frames(noisy)?.save(&ctx.path("eval_corrupted.thds"))?;
            println!("wrote vae_frames.thds, eval_clean.thds, eval_corrupted.thds");
        }
        Command::CollectCollisions => {
            ctx.ensure_out()?;
            let d = Dataset::collision(collect_collision_samples(&ctx.cfg, ctx.seed)?)?;
            d.save(&ctx.path("collisions.thds"))?;
            println!("{}", d.info());
        }
        Command::TrainVae { mode } => {
            let mode = match mode {
                Mode::Semantic => VaeMode::Semantic,
                Mode::Vanilla => VaeMode::Vanilla,
            };
            let frames = Dataset::load(&ctx.path("vae_frames.thds"))?.into_frames()?;
            let (vae, log) = train_sevae(&ctx.cfg, &frames, mode, ctx.seed)?;
            save_vae(&vae, &ctx.path(vae_file(mode)))?;
            write_loss_csv(&log, &ctx.path(&format!("{}_loss.csv", mode.name())))?;
            if let Some(l) = log.last() {
                println!("epoch {} train {:.4} val {:.4}", l.epoch, l.train.total, l.val.total);
            }
        }
        Command::EncodeDataset => {
            let samples = Dataset::load(&ctx.path("collisions.thds"))?.into_collision()?;
            let vae = load_vae(&ctx.path(vae_file(VaeMode::Semantic)))?;
            let d = Dataset::latent(modular_training_set(&ctx.cfg, &samples, &vae, ctx.seed)?)?;
            d.save(&ctx.path("collisions_latent.thds"))?;
            println!("{}", d.info());
        }
        Command::TrainCpn { variant } => {
            let (cpn, log, variant) = match variant {
                Variant::Modular => {
                    let data = Dataset::load(&ctx.path("collisions_latent.thds"))?.into_latent()?;
                    let (c, l) = train_modular(&ctx.cfg, &data, ctx.seed)?;
                    (c, l, CpnVariant::Modular)
                }
                Variant::EndToEnd => {
                    let data = Dataset::load(&ctx.path("collisions.thds"))?.into_collision()?;
                    let (c, l) = train_end_to_end(&ctx.cfg, &data, ctx.seed)?;
                    (c, l, CpnVariant::EndToEnd)
                }
            };
            save_cpn(&cpn, &ctx.path(cpn_file(variant)))?;
            write_metrics_csv(&log, &ctx.path(&format!("cpn_{}_metrics.csv", variant.name())))?;
            if let Some(l) = log.last() {
                println!("epoch {} bce {:.4} auc {:.4} acc {:.4}", l.epoch, l.val.bce, l.val.auc, l.val.acc);
            }
        }
        Command::EvalRecon { k } => {
            let clean = Dataset::load(&ctx.path("eval_clean.thds"))?.into_frames()?;
            let noisy = Dataset::load(&ctx.path("eval_corrupted.thds"))?.into_frames()?;
            let se = load_vae(&ctx.path(vae_file(VaeMode::Semantic)))?;
            let va = load_vae(&ctx.path(vae_file(VaeMode::Vanilla)))?;
            let rep = eval_reconstruction(
                &[(Domain::Clean, &clean), (Domain::Corrupted, &noisy)],
                &[
                    Codec::Fft { k },
                    Codec::Vae {
                        name: "vanilla-vae",
                        vae: &va,
                    },
                    Codec::Vae { name: "sevae", vae: &se },
                ],
            )?;
            rep.write_csv(&ctx.path("recon.csv"))?;
            print!("{rep}");
        }
        Command::RunMission { env, method, run } => {
            ctx.ensure_out()?;
            let env: Environment = env.into();
            let method: Method = method.into();
            let loaded = load_models(&ctx, &[method])?;
            let world_seed = derive_seed(ctx.seed, &format!("campaign-world-{}-{run}", env.name()));
            let mission_seed = derive_seed(ctx.seed, &format!("campaign-mission-{}-{run}", env.name()));
            let world = generate_world(&ctx.cfg.world_params(env), world_seed)?;
            let r = run_mission(&world, &ctx.cfg, method, loaded.models(), mission_seed, true)?;
            let path = ctx.path(&format!("trajectory_{}_{}_{run}.csv", env.name(), method.name()));
            r.write_path_csv(&path)?;
            println!("{}", r.summary_line());
        }
        Command::RunCampaign { methods } => {
            let methods: Vec<Method> = methods.into_iter().map(Method::from).collect();
            let loaded = load_models(&ctx, &methods)?;
            let rep = run_campaign(&ctx.cfg, &methods, loaded.models(), ctx.seed)?;
            rep.write(&ctx.out)?;
            print!("{rep}");
        }
        Command::Dataset {
            command: DatasetCommand::Info { path },
        } => {
            let d = Dataset::load(&path)?;
            println!("{}", d.info());
        }
        Command::ExportFrames(args) => {
            let frames = match Dataset::load(&args.dataset)? {
                Dataset::Frames { frames, .. } => frames,
                Dataset::Collision { samples, .. } => samples.into_iter().map(|s| s.input).collect(),
                Dataset::Latent { .. } => return Err(Error::InvalidInput("latent datasets hold no frames".into())),
            };
            let dir = ctx.path("frames");
            std::fs::create_dir_all(&dir)?;
            let n = args.count.min(frames.len());
            for (i, f) in frames.iter().take(n).enumerate() {
                export_frame(f, &dir, &format!("frame_{i:05}"), ctx.cfg.sensor.camera.max_range)?;
            }
            println!("wrote {n} frames to {}", dir.display());
        }
        Command::PrintConfig => print!("{}", ctx.cfg.to_toml()),
    }
    Ok(())
}

struct Loaded {
    vae: Option<thinnav::vae::Vae>,
    modular: Option<thinnav::cpn::Cpn>,
    end_to_end: Option<thinnav::cpn::Cpn>,
}

impl Loaded {
    fn models(&self) -> Models<'_> {
        Models {
            vae: self.vae.as_ref(),
            modular: self.modular.as_ref(),
            end_to_end: self.end_to_end.as_ref(),
        }
    }
}

fn load_models(ctx: &Ctx, methods: &[Method]) -> Result<Loaded> {
    let mut l = Loaded {
        vae: None,
        modular: None,
        end_to_end: None,
    };
    if methods.contains(&Method::Modular) {
        l.vae = Some(load_vae(&ctx.path(vae_file(VaeMode::Semantic)))?);
        l.modular = Some(load_cpn(&ctx.path(cpn_file(CpnVariant::Modular)))?);
    }
    if methods.contains(&Method::EndToEnd) {
        l.end_to_end = Some(load_cpn(&ctx.path(cpn_file(CpnVariant::EndToEnd)))?);
    }
    Ok(l)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error class={} message={:?}", e.class(), e.to_string());
            ExitCode::FAILURE
        }
    }
}
