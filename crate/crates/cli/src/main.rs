use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mixbag_cli::experiment::{prepare, BagPlan};
use mixbag_cli::export::{export_ci_gap_scatter, export_proportion_scatter, generate_mixed_bags};
use mixbag_cli::{run_experiment, run_preliminary_sweep, CliError, ExperimentConfig, Result, SweepMode};
use mixbag_core::data::write_csv;
use mixbag_core::{make_blobs, ProportionVector, Rng};

#[derive(Parser)]
#[command(name = "mixbag", version, about = "Learning from label proportions with MixBag")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.base_seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            cfg.output_dir = dir.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate over all seeds; writes result JSON, train logs and checkpoints.
    Run(Common),
    /// One run per level; writes `sweep_<mode>.csv`.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: SweepMode,
        /// Ascending levels, e.g. `64,128,256`.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
    },
    /// PCA scatter of original and mixed proportion vectors (first seed's bags).
    ExportScatter {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 500)]
        num_mixed: usize,
    },
    /// CI gap vs. CI width of mixed bags (first seed's bags).
    ExportCiGap {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        num_mixed: usize,
    },
    /// Write a Gaussian-blob dataset as CSV.
    MakeBlobs {
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 400)]
        per_class: usize,
        #[arg(long, default_value_t = 8)]
        dim: usize,
        #[arg(long, default_value_t = 0.6)]
        spread: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn mixed_for_export(cfg: &ExperimentConfig, count: usize) -> Result<(mixbag_cli::experiment::Prepared, Vec<mixbag_core::AugmentedBag>)> {
    let prepared = prepare(cfg, 0, BagPlan::Standard)?;
    let mut rng = Rng::new(Rng::derive_seed(prepared.seed, 20));
    let mixed = generate_mixed_bags(
        &prepared.bags,
        count,
        cfg.train.gamma_strategy,
        cfg.train.confidence_degree,
        &mut rng,
    )?;
    fs::create_dir_all(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join(format!("{}_bags.json", cfg.name)), &prepared.bags)?;
    write_json(&cfg.output_dir.join(format!("{}_mixed.json", cfg.name)), &mixed)?;
    Ok((prepared, mixed))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.load()?;
            let result = run_experiment(&cfg)?;
            println!(
                "{}: mean accuracy {:.4} over {} seeds ({:.1}s)",
                result.name,
                result.mean_accuracy,
                result.per_seed_accuracy.len(),
                result.wall_time_secs
            );
        }
        Command::Sweep { common, mode, levels } => {
            let cfg = common.load()?;
            for p in run_preliminary_sweep(mode, &levels, &cfg)? {
                println!("{}\t{:.4}", p.level, p.mean_accuracy);
            }
        }
        Command::ExportScatter { common, num_mixed } => {
            let cfg = common.load()?;
            let (prepared, mixed) = mixed_for_export(&cfg, num_mixed)?;
            let original: Vec<ProportionVector> = prepared.bags.iter().map(|b| b.label.clone()).collect();
            let mixed: Vec<ProportionVector> = mixed.into_iter().map(|m| m.label.expected).collect();
            let out = cfg.output_dir.join(format!("{}_scatter.csv", cfg.name));
            let (fit, _) = export_proportion_scatter(&original, &mixed, &out)?;
            println!("wrote {} (explained variance {:?})", out.display(), fit.eigenvalues);
        }
        Command::ExportCiGap { common, num_mixed } => {
            let cfg = common.load()?;
            let (prepared, mixed) = mixed_for_export(&cfg, num_mixed)?;
            let out = cfg.output_dir.join(format!("{}_ci_gap.csv", cfg.name));
            let rows = export_ci_gap_scatter(&prepared.dataset, &mixed, &out)?;
            let under = rows.iter().filter(|r| r.gap <= r.width).count();
            println!("wrote {}; {under}/{} rows have gap <= width", out.display(), rows.len());
        }
        Command::MakeBlobs {
            classes,
            per_class,
            dim,
            spread,
            seed,
            out,
        } => {
            let ds = make_blobs(classes, per_class, dim, spread, &mut Rng::new(seed))
                .map_err(|e| CliError::Config(e.to_string()))?;
            write_csv(&ds, &out)?;
            println!("wrote {} instances to {}", ds.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
