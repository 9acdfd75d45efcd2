//! Multi-seed experiment runs and the bag-count / bag-size sweeps.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use mixbag_core::baggen::make_bags_from_pool;
use mixbag_core::{evaluate, load_csv, make_blobs, train, Bag, BagGenConfig, Dataset, ModelParams, Rng, TrainLog};
use serde::{Deserialize, Serialize};

use crate::config::{DatasetSource, ExperimentConfig};
use crate::error::{CliError, Result};

// Seed streams derived from each repetition's seed.
const STREAM_DATA: u64 = 10;
const STREAM_TEST_SPLIT: u64 = 11;
const STREAM_BAGS: u64 = 12;
const STREAM_VAL_SPLIT: u64 = 13;
const STREAM_TRAIN: u64 = 14;
const STREAM_EXTRA_BAGS: u64 = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed_index: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub best_val_loss: f64,
    pub num_train_bags: usize,
    pub num_val_bags: usize,
    pub num_test_instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub name: String,
    pub config_hash: String,
    pub per_seed_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub seeds: Vec<SeedResult>,
    /// Reported on the console only; excluded from the JSON so outputs stay
    /// byte-identical across repeated runs.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// Everything one repetition produces.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub result: SeedResult,
    pub log: TrainLog,
    pub model: ModelParams,
}

/// How the labeled bags of one repetition are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BagPlan {
    /// `cfg.bags` as configured.
    Standard,
    /// `cfg.bags.num_bags` disjoint bags, then overlapping bags drawn from
    /// those bags' instances until `total` bags exist.
    OverlapExtension { total: usize },
}

/// Per-class size for a blob dataset so disjoint bags and the test split fit:
/// `1.5 · demand / C / (1 − test_fraction)`, never below the configured size.
pub fn blob_per_class(per_class: usize, num_classes: usize, bags: &BagGenConfig, test_fraction: f64) -> usize {
    if bags.allow_overlap {
        return per_class;
    }
    let demand = (bags.num_bags * bags.bag_size) as f64;
    let needed = (1.5 * demand / num_classes as f64 / (1.0 - test_fraction)).ceil() as usize;
    per_class.max(needed)
}

fn load_dataset(cfg: &ExperimentConfig, seed: u64, bags: &BagGenConfig) -> Result<Dataset> {
    match &cfg.dataset {
        DatasetSource::Blobs {
            num_classes,
            per_class,
            dim,
            spread,
        } => {
            let per_class = blob_per_class(*per_class, *num_classes, bags, cfg.test_fraction);
            let mut rng = Rng::new(Rng::derive_seed(seed, STREAM_DATA));
            Ok(make_blobs(*num_classes, per_class, *dim, *spread, &mut rng)?)
        }
        DatasetSource::Csv {
            path,
            num_classes,
            has_header,
        } => Ok(load_csv(path, *num_classes, *has_header)?),
    }
}

/// Seed of repetition `index`.
pub fn repetition_seed(cfg: &ExperimentConfig, index: usize) -> u64 {
    Rng::derive_seed(cfg.base_seed, index as u64)
}

/// Shuffled split of the labeled instances into (test, pool).
fn split_instances(dataset: &Dataset, test_fraction: f64, rng: &mut Rng) -> (Vec<usize>, Vec<usize>) {
    let mut labeled: Vec<usize> = (0..dataset.len())
        .filter(|&i| dataset.get(i).true_class().is_some())
        .collect();
    rng.shuffle(&mut labeled);
    let n_test = (labeled.len() as f64 * test_fraction).round() as usize;
    let pool = labeled.split_off(n_test);
    (labeled, pool)
}

fn build_bags(dataset: &Dataset, pool: &[usize], cfg: &ExperimentConfig, seed: u64, plan: BagPlan) -> Result<Vec<Bag>> {
    let mut bag_cfg = cfg.bags.clone();
    bag_cfg.rng_seed = Rng::derive_seed(seed, STREAM_BAGS) ^ cfg.bags.rng_seed;
    let mut rng = Rng::new(bag_cfg.rng_seed);
    match plan {
        BagPlan::Standard => Ok(make_bags_from_pool(dataset, pool, &bag_cfg, &mut rng)?),
        BagPlan::OverlapExtension { total } => {
            if total < bag_cfg.num_bags {
                return Err(CliError::Config(format!(
                    "overlap level {total} is below the initial {} bags",
                    bag_cfg.num_bags
                )));
            }
            bag_cfg.allow_overlap = false;
            let mut bags = make_bags_from_pool(dataset, pool, &bag_cfg, &mut rng)?;
            let mut used: Vec<usize> = bags.iter().flat_map(|b| b.instance_ids.iter().copied()).collect();
            used.sort_unstable();
            let extra_cfg = BagGenConfig {
                num_bags: total - bags.len(),
                allow_overlap: true,
                ..bag_cfg
            };
            if extra_cfg.num_bags > 0 {
                let mut extra_rng = Rng::new(Rng::derive_seed(seed, STREAM_EXTRA_BAGS));
                bags.extend(make_bags_from_pool(dataset, &used, &extra_cfg, &mut extra_rng)?);
            }
            Ok(bags)
        }
    }
}

/// Data, held-out test instances and labeled bags of one repetition.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub seed: u64,
    pub dataset: Dataset,
    pub test_ids: Vec<usize>,
    pub bags: Vec<Bag>,
}

pub fn prepare(cfg: &ExperimentConfig, index: usize, plan: BagPlan) -> Result<Prepared> {
    let seed = repetition_seed(cfg, index);
    let sizing = match plan {
        BagPlan::Standard => cfg.bags.clone(),
        BagPlan::OverlapExtension { .. } => BagGenConfig {
            allow_overlap: false,
            ..cfg.bags.clone()
        },
    };
    let dataset = load_dataset(cfg, seed, &sizing)?;
    let mut split_rng = Rng::new(Rng::derive_seed(seed, STREAM_TEST_SPLIT));
    let (test_ids, pool) = split_instances(&dataset, cfg.test_fraction, &mut split_rng);
    let bags = build_bags(&dataset, &pool, cfg, seed, plan)?;
    Ok(Prepared {
        seed,
        dataset,
        test_ids,
        bags,
    })
}

/// One repetition: data, test split, bags, validation split, training, evaluation.
pub fn run_seed(cfg: &ExperimentConfig, index: usize, plan: BagPlan) -> Result<SeedRun> {
    let Prepared {
        seed,
        dataset,
        test_ids,
        mut bags,
    } = prepare(cfg, index, plan)?;
    if test_ids.is_empty() {
        return Err(CliError::Config("test split is empty; raise test_fraction".into()));
    }

    Rng::new(Rng::derive_seed(seed, STREAM_VAL_SPLIT)).shuffle(&mut bags);
    let n_val = ((bags.len() as f64 * cfg.val_fraction).round() as usize).max(1);
    if n_val >= bags.len() {
        return Err(CliError::Config("too few bags for a validation split".into()));
    }
    let train_bags = bags.split_off(n_val);
    let val_bags = bags;

    let mut train_cfg = cfg.train.clone();
    train_cfg.rng_seed = Rng::derive_seed(Rng::derive_seed(seed, STREAM_TRAIN), cfg.train.rng_seed);
    let (model, log) = train(&dataset, &train_bags, &val_bags, &train_cfg)?;
    let eval = evaluate(&model, &dataset, &test_ids)?;
    Ok(SeedRun {
        result: SeedResult {
            seed_index: index,
            seed,
            accuracy: eval.accuracy,
            confusion: eval.confusion,
            best_epoch: log.best_epoch,
            epochs_run: log.epochs.len(),
            best_val_loss: log.best_val_loss,
            num_train_bags: train_bags.len(),
            num_val_bags: val_bags.len(),
            num_test_instances: test_ids.len(),
        },
        log,
        model,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Runs every repetition without writing files.
pub fn run_in_memory(cfg: &ExperimentConfig, plan: BagPlan) -> Result<(RunResult, Vec<SeedRun>)> {
    cfg.validate()?;
    let start = Instant::now();
    let mut runs = Vec::with_capacity(cfg.num_seeds);
    for index in 0..cfg.num_seeds {
        let run = run_seed(cfg, index, plan)?;
        info!(
            "{} seed {index}: accuracy {:.4} after {} epochs",
            cfg.name, run.result.accuracy, run.result.epochs_run
        );
        runs.push(run);
    }
    let per_seed_accuracy: Vec<f64> = runs.iter().map(|r| r.result.accuracy).collect();
    Ok((
        RunResult {
            name: cfg.name.clone(),
            config_hash: cfg.hash(),
            mean_accuracy: mean(&per_seed_accuracy),
            per_seed_accuracy,
            seeds: runs.iter().map(|r| r.result.clone()).collect(),
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
        runs,
    ))
}

/// Runs the experiment and writes into `cfg.output_dir`:
/// `<name>_result.json`, and per repetition `k`
/// `<name>_trainlog_seed<k>.csv` and `<name>_model_seed<k>.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    run_and_write(cfg, BagPlan::Standard, &cfg.output_dir)
}

fn run_and_write(cfg: &ExperimentConfig, plan: BagPlan, dir: &Path) -> Result<RunResult> {
    let (result, runs) = run_in_memory(cfg, plan)?;
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join(format!("{}_result.json", cfg.name)),
        serde_json::to_string_pretty(&result)? + "\n",
    )?;
    for (k, run) in runs.iter().enumerate() {
        fs::write(dir.join(format!("{}_trainlog_seed{k}.csv", cfg.name)), run.log.to_csv())?;
        run.model.save_json(dir.join(format!("{}_model_seed{k}.json", cfg.name)))?;
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Disjoint bags; the level is the number of bags.
    VaryBagsFixedSize,
    /// Disjoint bags; the level is the bag size.
    VarySizeFixedBags,
    /// `bags.num_bags` disjoint bags extended by overlapping bags to `level` in total.
    VaryBagsOverlap,
}

impl SweepMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepMode::VaryBagsFixedSize => "vary_bags_fixed_size",
            SweepMode::VarySizeFixedBags => "vary_size_fixed_bags",
            SweepMode::VaryBagsOverlap => "vary_bags_overlap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub level: usize,
    pub mean_accuracy: f64,
}

/// One multi-seed run per level. Writes `sweep_<mode>.csv` with
/// `level,mean_accuracy` rows and each level's run files under
/// `<mode>_level<level>/`.
pub fn run_preliminary_sweep(mode: SweepMode, levels: &[usize], base: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    if levels.is_empty() {
        return Err(CliError::Config("sweep needs at least one level".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config("sweep levels must be strictly ascending".into()));
    }
    let mut points = Vec::with_capacity(levels.len());
    for &level in levels {
        let mut cfg = base.clone();
        cfg.name = format!("{}_level{level}", base.name);
        let plan = match mode {
            SweepMode::VaryBagsFixedSize => {
                cfg.bags.num_bags = level;
                cfg.bags.allow_overlap = false;
                BagPlan::Standard
            }
            SweepMode::VarySizeFixedBags => {
                cfg.bags.bag_size = level;
                cfg.bags.allow_overlap = false;
                BagPlan::Standard
            }
            SweepMode::VaryBagsOverlap => BagPlan::OverlapExtension { total: level },
        };
        let dir: PathBuf = base.output_dir.join(format!("{}_level{level}", mode.as_str()));
        let result = run_and_write(&cfg, plan, &dir)?;
        info!("{} level {level}: mean accuracy {:.4}", mode.as_str(), result.mean_accuracy);
        points.push(SweepPoint {
            level,
            mean_accuracy: result.mean_accuracy,
        });
    }
    fs::create_dir_all(&base.output_dir)?;
    let mut csv = String::from("level,mean_accuracy\n");
    for p in &points {
        csv.push_str(&format!("{},{}\n", p.level, p.mean_accuracy));
    }
    fs::write(base.output_dir.join(format!("sweep_{}.csv", mode.as_str())), csv)?;
    Ok(points)
}
