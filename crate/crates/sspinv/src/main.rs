//! Command-line interface for the sound-speed-profile inversion toolkit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sspinv::bench::{emit_plot_data, prepare_world, run_benchmark, run_mtl, BenchmarkConfig, PlotArtifacts};
use sspinv::eof::{extend_profile, splice_measured};
use sspinv::error::{Error, Result};
use sspinv::io::{
    load_config, read_checkpoint, read_json, read_observation_csv, read_profile_csv,
    write_checkpoint, write_cluster_manifest, write_json, write_observation_csv,
    write_profile_csv, write_text, ClusterManifestEntry, ModelCheckpoint,
};
use sspinv::net::invert;
use sspinv::profile::SoundSpeedProfile;
use sspinv::world::generate_world;

#[derive(Parser)]
#[command(
    name = "sspinv",
    about = "Sound-speed-profile inversion toolkit: synthetic worlds, ray \
             travel-time simulation, EOF profile extension, neural inversion, \
             and baseline benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration document; omitted sections use built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic reference world: clustered profile CSVs, the
    /// held-out task profile, and a cluster manifest.
    GenWorld(Common),
    /// Extend a partial-depth profile CSV to full depth using an empirical
    /// set of full-depth profile CSVs.
    Extend {
        #[command(flatten)]
        common: Common,
        /// Partial-depth profile CSV to extend.
        #[arg(long)]
        input: PathBuf,
        /// Directory of full-depth empirical profile CSVs.
        #[arg(long)]
        references: PathBuf,
    },
    /// Simulate a travel-time observation for a profile CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Profile CSV describing the medium.
        #[arg(long)]
        input: PathBuf,
    },
    /// Pretrain the multi-task network on the synthetic world, finetune the
    /// task learner, and save a model checkpoint.
    Pretrain(Common),
    /// Invert an observation CSV with a saved model checkpoint.
    Invert {
        #[command(flatten)]
        common: Common,
        /// Model checkpoint JSON written by `pretrain`.
        #[arg(long)]
        model: PathBuf,
        /// Observation CSV written by `simulate`.
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the full accuracy/timing benchmark and write JSON + Markdown
    /// reports.
    Benchmark(Common),
    /// Emit plot data (CSV + SVG) for the inverted-profile and training-loss
    /// figures, reusing `benchmark` artifacts when present.
    PlotData(Common),
}

fn effective_config(common: &Common) -> Result<BenchmarkConfig> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => BenchmarkConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
        cfg.world.seed = seed;
        cfg.mtl.seed = seed;
    }
    Ok(cfg)
}

fn read_profiles_dir(dir: &Path) -> Result<Vec<SoundSpeedProfile>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data(format!(
            "no profile CSV files in {}",
            dir.display()
        )));
    }
    paths.iter().map(|p| read_profile_csv(p)).collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenWorld(common) => {
            let cfg = effective_config(&common)?;
            let world = generate_world(&cfg.world)?;
            let dir = common.out.join("world");
            let mut manifest = Vec::new();
            for (k, cluster) in world.clusters.iter().enumerate() {
                let mut member_ids = Vec::new();
                for p in cluster {
                    write_profile_csv(&dir.join(format!("cluster_{k:02}/{}.csv", p.id)), p)?;
                    member_ids.push(p.id.clone());
                }
                manifest.push(ClusterManifestEntry { cluster_id: k, member_ids });
            }
            write_profile_csv(&dir.join("task.csv"), &world.task)?;
            write_cluster_manifest(&dir.join("manifest.json"), &manifest)?;
            println!(
                "wrote {} clusters x {} profiles plus the task profile to {}",
                world.clusters.len(),
                cfg.world.profiles_per_cluster,
                dir.display()
            );
        }
        Command::Extend { common, input, references } => {
            let cfg = effective_config(&common)?;
            let partial = read_profile_csv(&input)?;
            let empirical = read_profiles_dir(&references)?;
            let extended = extend_profile(&partial, &empirical, cfg.retain_order)?;
            let spliced = splice_measured(&extended, &partial, 100.0)?;
            let out = common.out.join("extended.csv");
            write_profile_csv(&out, &spliced)?;
            println!(
                "extended {} from {:.0} m to {:.0} m -> {}",
                partial.id,
                partial.max_depth(),
                spliced.max_depth(),
                out.display()
            );
        }
        Command::Simulate { common, input } => {
            let cfg = effective_config(&common)?;
            let profile = read_profile_csv(&input)?;
            let geometry = sspinv::world::default_geometry();
            let scenario = geometry.scenario_for(&profile)?;
            let seed = common.seed.unwrap_or(cfg.master_seed);
            let obs = sspinv::ray::simulate_observation(
                &scenario,
                &geometry.pings,
                cfg.noise_sigma,
                seed,
            )?;
            let out = common.out.join("observation.csv");
            write_observation_csv(&out, &obs, cfg.noise_sigma, seed)?;
            println!(
                "simulated {} travel times for {} -> {}",
                obs.times.len(),
                profile.id,
                out.display()
            );
        }
        Command::Pretrain(common) => {
            let cfg = effective_config(&common)?;
            let prep = prepare_world(&cfg)?;
            let (params, losses) = run_mtl(&prep, &cfg.mtl, cfg.master_seed)?;
            let out = common.out.join("model.json");
            write_checkpoint(
                &out,
                &ModelCheckpoint {
                    config: cfg.clone(),
                    hidden_weights: params.hidden_weights,
                    output_weights: params.output_weights,
                    standardizer: prep.standardizer.clone(),
                    seed: cfg.master_seed,
                },
            )?;
            println!(
                "pretrained on {} references, task loss {:.4} -> {:.4} over {} epochs -> {}",
                prep.references.len(),
                losses.first().copied().unwrap_or(f64::NAN),
                losses.last().copied().unwrap_or(f64::NAN),
                losses.len(),
                out.display()
            );
        }
        Command::Invert { common, model, input } => {
            let ckpt = read_checkpoint(&model)?;
            let (obs, _, _) = read_observation_csv(&input)?;
            let params = sspinv::net::NetworkParams {
                hidden_weights: ckpt.hidden_weights,
                output_weights: ckpt.output_weights,
            };
            let samples = invert(
                &params,
                &obs.times,
                &ckpt.standardizer,
                ckpt.config.world.max_depth,
            )?;
            let profile = SoundSpeedProfile::new(samples, 0.0, 0.0, 1, "inverted")?;
            let out = common.out.join("inverted.csv");
            write_profile_csv(&out, &profile)?;
            println!("inverted {} layers -> {}", profile.samples.len(), out.display());
        }
        Command::Benchmark(common) => {
            let cfg = effective_config(&common)?;
            let (report, artifacts) = run_benchmark(&cfg)?;
            write_text(&common.out.join("report.json"), &report.to_json())?;
            let md = format!(
                "# Benchmark report\n\n## Accuracy\n\n{}\n## Timing\n\n{}",
                report.accuracy_markdown(),
                report.timing_markdown()
            );
            write_text(&common.out.join("report.md"), &md)?;
            write_json(&common.out.join("artifacts.json"), &artifacts)?;
            print!("{md}");
            println!("\nwrote report.json, report.md, artifacts.json to {}", common.out.display());
        }
        Command::PlotData(common) => {
            let cfg = effective_config(&common)?;
            let artifacts_path = common.out.join("artifacts.json");
            let artifacts: PlotArtifacts = if artifacts_path.exists() {
                read_json(&artifacts_path)?
            } else {
                let mut quick = cfg.clone();
                quick.measure_timing = false;
                let (_, artifacts) = run_benchmark(&quick)?;
                write_json(&artifacts_path, &artifacts)?;
                artifacts
            };
            emit_plot_data(&artifacts, &common.out)?;
            println!(
                "wrote profiles.csv/svg and loss.csv/svg to {}",
                common.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
