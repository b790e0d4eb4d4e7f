use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use skelreg_harness::ablation::{ablate_ddl, ablate_sampling};
use skelreg_harness::methods::MethodSettings;
use skelreg_harness::runner::{run_manifest, write_run, OutputFormat};
use skelreg_harness::{generate_dataset, inspect, ExperimentConfig, Manifest, Method};

#[derive(Parser)]
#[command(name = "skelreg", version, about = "Skeleton-assisted registration benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate corrupted source/target pairs and their manifest.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed of the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the configuration's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run registration methods on every pair of a manifest.
    Register {
        #[arg(long)]
        manifest: PathBuf,
        /// Configuration supplying registration and ICP settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated subset of icp, raw_soft, skeleton_only, srrf_fused.
        #[arg(long)]
        methods: Option<String>,
        /// Override the skeleton seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Number of pairs processed in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Also write extracted skeletons and loss traces.
        #[arg(long)]
        save_skeletons: bool,
    },
    /// Compare registration after RDS, FPS and skeleton-point sampling.
    AblateSampling {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Compare skeleton distances without and with the distribution loss.
    AblateDdl {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Summarise a cloud (.xyz, .ply) or skeleton (.json) file.
    Inspect {
        file: PathBuf,
        /// Write per-point CSV for plotting.
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn table_file(out: PathBuf, stem: &str, format: Format) -> PathBuf {
    out.join(match format {
        Format::Csv => format!("{stem}.csv"),
        Format::Json => format!("{stem}.json"),
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate { config, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let out = out.unwrap_or_else(|| cfg.output_dir());
            let (manifest, path) = generate_dataset(&cfg, &out)?;
            println!("wrote {} pairs, manifest {}", manifest.entries.len(), path.display());
        }
        Command::Register {
            manifest,
            config,
            methods,
            seed,
            out,
            jobs,
            format,
            save_skeletons,
        } => {
            let manifest = Manifest::load(&manifest).with_context(|| format!("loading {}", manifest.display()))?;
            let cfg = config.map(|c| load_config(&c, None)).transpose()?;
            let mut settings = MethodSettings::default();
            let mut chosen = Method::ALL.to_vec();
            if let Some(cfg) = &cfg {
                settings.registration = cfg.registration.clone();
                settings.icp = cfg.icp.clone();
                chosen = cfg.methods.clone();
            }
            if let Some(list) = methods {
                chosen = Method::parse_list(&list)?;
            }
            if let Some(seed) = seed {
                settings.registration.skeleton.seed = seed;
            }
            let run = run_manifest(&manifest, &chosen, &settings, jobs)?;
            let skeleton_cfg = save_skeletons.then_some(&settings.registration.skeleton);
            write_run(&out, &run, format.into(), skeleton_cfg)?;
            print!("{}", run.table.to_csv());
            let failures = run.failures();
            if failures > 0 {
                eprintln!("{failures} method runs failed; see the failure rows");
                return Ok(ExitCode::from(2));
            }
        }
        Command::AblateSampling {
            config,
            seed,
            out,
            jobs,
            format,
        } => {
            let cfg = load_config(&config, seed)?;
            let table = ablate_sampling(&cfg, jobs)?;
            let text = match format {
                Format::Csv => table.to_csv(),
                Format::Json => table.to_json(),
            };
            write(table_file(out.unwrap_or_else(|| cfg.output_dir()), "sampling", format), &text)?;
            print!("{}", table.to_csv());
        }
        Command::AblateDdl {
            config,
            seed,
            out,
            jobs,
            format,
        } => {
            let cfg = load_config(&config, seed)?;
            let table = ablate_ddl(&cfg, jobs)?;
            let text = match format {
                Format::Csv => table.to_csv(),
                Format::Json => table.to_json(),
            };
            write(table_file(out.unwrap_or_else(|| cfg.output_dir()), "ddl", format), &text)?;
            print!("{}", table.to_csv());
        }
        Command::Inspect { file, export } => {
            let contents = inspect::load(&file)?;
            print!("{}", inspect::summarize(&contents));
            if let Some(path) = export {
                write(path, &inspect::export_csv(&contents))?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
