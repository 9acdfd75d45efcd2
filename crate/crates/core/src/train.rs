//! LLP training with optional per-batch bag augmentation, early stopping on
//! validation proportion loss, and instance-level evaluation.

use std::fmt::Write as _;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::baggen::{sub_bag, union_bags};
use crate::data::{Bag, Dataset, ProportionVector};
use crate::error::{Error, Result};
use crate::loss::{ci_gates, gated_loss, proportion_loss, BagPrediction};
use crate::matrix::Matrix;
use crate::mixbag::{mix_bags, ConfidenceDegree, GammaStrategy, MixedBagLabel};
use crate::model::{AdamState, Architecture, ModelParams};
use crate::rng::Rng;

/// How augmented bags are produced from the bags of a batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BagGenerationVariant {
    /// Sub-bags of two parents combined, labeled with an interval.
    #[default]
    MixBag,
    /// Two whole bags concatenated; exact label.
    Union,
    /// A sub-bag of one parent, labeled with an interval.
    SubBag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub lr: f64,
    pub max_epochs: usize,
    pub batch_bags: usize,
    pub early_stop_patience: usize,
    pub mixbag_enabled: bool,
    /// Augmented bags generated per original bag in a batch (rounded up).
    pub mix_per_batch_ratio: f64,
    pub gamma_strategy: GammaStrategy,
    pub confidence_degree: ConfidenceDegree,
    pub bag_generation_variant: BagGenerationVariant,
    /// Use the CI loss for interval-labeled augmented bags; otherwise the
    /// proportion loss against their expected proportion.
    pub with_ci: bool,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Linear,
            lr: 3e-4,
            max_epochs: 1000,
            batch_bags: 32,
            early_stop_patience: 10,
            mixbag_enabled: false,
            mix_per_batch_ratio: 1.0,
            gamma_strategy: GammaStrategy::Uniform,
            confidence_degree: ConfidenceDegree::P99,
            bag_generation_variant: BagGenerationVariant::MixBag,
            with_ci: true,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::arg("lr must be positive"));
        }
        if self.early_stop_patience < 1 {
            return Err(Error::arg("early_stop_patience must be >= 1"));
        }
        if self.batch_bags < 1 {
            return Err(Error::arg("batch_bags must be >= 1"));
        }
        if !(self.mix_per_batch_ratio >= 0.0 && self.mix_per_batch_ratio.is_finite()) {
            return Err(Error::arg("mix_per_batch_ratio must be >= 0"));
        }
        self.gamma_strategy.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Fraction of CI-loss class terms switched off because the predicted
    /// proportion was inside the interval; 0 when no CI loss was evaluated.
    pub gate_off_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Batches whose augmentation was skipped because no pair could be formed.
    pub skipped_augmentation_batches: usize,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,gate_off_fraction\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{},{}", e.epoch, e.train_loss, e.val_loss, e.gate_off_fraction);
        }
        out
    }
}

/// What an augmented bag is trained against.
enum AugmentedTarget {
    Exact(ProportionVector),
    Interval(MixedBagLabel),
}

struct Augmented {
    ids: Vec<usize>,
    target: AugmentedTarget,
}

fn predict(model: &ModelParams, dataset: &Dataset, ids: &[usize]) -> Result<(Matrix, BagPrediction)> {
    let x = Matrix::from_vec(ids.len(), dataset.feature_dim(), dataset.gather_features(ids));
    let probs = model.forward(&x)?;
    Ok((x, BagPrediction::new(probs)?))
}

/// Mean proportion loss over `bags`.
pub fn mean_proportion_loss(model: &ModelParams, dataset: &Dataset, bags: &[Bag]) -> Result<f64> {
    if bags.is_empty() {
        return Err(Error::arg("no bags to evaluate"));
    }
    let mut total = 0.0;
    for bag in bags {
        let (_, pred) = predict(model, dataset, &bag.instance_ids)?;
        total += proportion_loss(&pred, &bag.label)?.value;
    }
    Ok(total / bags.len() as f64)
}

struct GateCounter {
    off: usize,
    total: usize,
}

impl GateCounter {
    fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.off as f64 / self.total as f64
        }
    }
}

struct Trainer<'a> {
    bags: &'a [Bag],
    cfg: &'a TrainConfig,
    rng: Rng,
}

impl Trainer<'_> {
    fn draw_augmented(&mut self, batch: &[usize]) -> Result<Augmented> {
        let cfg = self.cfg;
        let pick_pair = |rng: &mut Rng| {
            let a = rng.below(batch.len());
            let b = (a + 1 + rng.below(batch.len() - 1)) % batch.len();
            (batch[a], batch[b])
        };
        match cfg.bag_generation_variant {
            BagGenerationVariant::MixBag => {
                let (i, j) = pick_pair(&mut self.rng);
                let gamma = cfg.gamma_strategy.sample(&mut self.rng);
                let mixed = mix_bags(self.bags, i, j, gamma, cfg.confidence_degree, &mut self.rng)?;
                Ok(self.interval_target(mixed.instance_ids, mixed.label))
            }
            BagGenerationVariant::Union => {
                let (i, j) = pick_pair(&mut self.rng);
                let u = union_bags(&self.bags[i], &self.bags[j])?;
                Ok(Augmented {
                    ids: u.instance_ids,
                    target: AugmentedTarget::Exact(u.label),
                })
            }
            BagGenerationVariant::SubBag => {
                let i = batch[self.rng.below(batch.len())];
                let gamma = cfg.gamma_strategy.sample(&mut self.rng);
                let len = self.bags[i].len();
                let n = ((len as f64 * gamma).round() as usize).clamp(1, len);
                let sub = sub_bag(self.bags, i, n, cfg.confidence_degree, &mut self.rng)?;
                Ok(self.interval_target(sub.instance_ids, sub.label))
            }
        }
    }

    fn interval_target(&self, ids: Vec<usize>, label: MixedBagLabel) -> Augmented {
        let target = if self.cfg.with_ci {
            AugmentedTarget::Interval(label)
        } else {
            AugmentedTarget::Exact(label.expected)
        };
        Augmented { ids, target }
    }
}

/// Accumulates `scale · ∇loss` into `grad` and returns the loss value.
fn accumulate(
    model: &ModelParams,
    dataset: &Dataset,
    ids: &[usize],
    target: &AugmentedTarget,
    scale: f64,
    grad: &mut [f64],
    gates: &mut GateCounter,
) -> Result<f64> {
    let (x, pred) = predict(model, dataset, ids)?;
    let loss = match target {
        AugmentedTarget::Exact(p) => proportion_loss(&pred, p)?,
        AugmentedTarget::Interval(label) => {
            let g = ci_gates(&pred, label)?;
            gates.off += g.iter().filter(|&&on| !on).count();
            gates.total += g.len();
            gated_loss(&pred, &label.expected, &g)?
        }
    };
    model.backward_into(&x, &loss.grad_instance_probs, scale, grad)?;
    Ok(loss.value)
}

/// Trains a classifier from labeled bags and returns the parameters with the
/// lowest validation proportion loss.
///
/// Each epoch shuffles the bags into batches of `batch_bags`. When
/// augmentation is on, every batch also gets `⌈ratio · |batch|⌉` fresh
/// augmented bags built from bags of that batch. The batch loss is the mean
/// loss over original bags plus the mean loss over augmented bags, followed by
/// one Adam step. Training stops after `early_stop_patience` epochs without a
/// validation improvement or at `max_epochs`.
pub fn train(dataset: &Dataset, bags: &[Bag], val_bags: &[Bag], cfg: &TrainConfig) -> Result<(ModelParams, TrainLog)> {
    cfg.validate()?;
    if bags.is_empty() {
        return Err(Error::arg("no training bags"));
    }
    if val_bags.is_empty() {
        return Err(Error::arg("no validation bags"));
    }
    let mut init_rng = Rng::new(Rng::derive_seed(cfg.rng_seed, 0));
    let mut model = ModelParams::init(cfg.architecture, dataset.feature_dim(), dataset.num_classes(), &mut init_rng)?;
    let mut adam = AdamState::new(model.num_params(), cfg.lr);
    let mut trainer = Trainer {
        bags,
        cfg,
        rng: Rng::new(Rng::derive_seed(cfg.rng_seed, 1)),
    };
    let needs_pair = cfg.bag_generation_variant != BagGenerationVariant::SubBag;

    let mut log = TrainLog {
        best_val_loss: f64::INFINITY,
        ..Default::default()
    };
    let mut best = model.clone();
    let mut stale = 0;
    let mut order: Vec<usize> = (0..bags.len()).collect();
    let mut grad = vec![0.0; model.num_params()];

    for epoch in 0..cfg.max_epochs {
        trainer.rng.shuffle(&mut order);
        let mut gates = GateCounter { off: 0, total: 0 };
        let mut epoch_loss = 0.0;
        let mut num_batches = 0;
        for batch in order.chunks(cfg.batch_bags) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                let target = AugmentedTarget::Exact(bags[i].label.clone());
                batch_loss +=
                    scale * accumulate(&model, dataset, &bags[i].instance_ids, &target, scale, &mut grad, &mut gates)?;
            }

            let n_aug = if cfg.mixbag_enabled {
                (cfg.mix_per_batch_ratio * batch.len() as f64).ceil() as usize
            } else {
                0
            };
            if n_aug > 0 && needs_pair && batch.len() < 2 {
                log.skipped_augmentation_batches += 1;
            } else if n_aug > 0 {
                let aug_scale = 1.0 / n_aug as f64;
                for _ in 0..n_aug {
                    let aug = trainer.draw_augmented(batch)?;
                    batch_loss +=
                        aug_scale * accumulate(&model, dataset, &aug.ids, &aug.target, aug_scale, &mut grad, &mut gates)?;
                }
            }

            adam.update(&mut model.params, &grad);
            epoch_loss += batch_loss;
            num_batches += 1;
        }
        if !model.is_finite() {
            return Err(Error::arg(format!("parameters diverged at epoch {epoch}")));
        }

        let val_loss = mean_proportion_loss(&model, dataset, val_bags)?;
        log.epochs.push(EpochLog {
            epoch,
            train_loss: epoch_loss / num_batches as f64,
            val_loss,
            gate_off_fraction: gates.fraction(),
        });
        if val_loss < log.best_val_loss {
            log.best_val_loss = val_loss;
            log.best_epoch = epoch;
            best = model.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.early_stop_patience {
                debug!("early stop at epoch {epoch}, best epoch {}", log.best_epoch);
                break;
            }
        }
    }
    if log.skipped_augmentation_batches > 0 {
        warn!(
            "augmentation skipped for {} single-bag batches",
            log.skipped_augmentation_batches
        );
    }
    Ok((best, log))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
}

/// Argmax predictions (ties to the lowest class) scored against hidden labels.
pub fn evaluate(model: &ModelParams, dataset: &Dataset, instance_ids: &[usize]) -> Result<Evaluation> {
    let c = dataset.num_classes();
    let mut confusion = vec![vec![0usize; c]; c];
    if instance_ids.is_empty() {
        return Err(Error::arg("no instances to evaluate"));
    }
    let truth = instance_ids
        .iter()
        .map(|&id| {
            dataset
                .get(id)
                .true_class()
                .ok_or_else(|| Error::arg(format!("instance {id} has no label")))
        })
        .collect::<Result<Vec<_>>>()?;
    let x = Matrix::from_vec(instance_ids.len(), dataset.feature_dim(), dataset.gather_features(instance_ids));
    let probs = model.forward(&x)?;
    for (row, &t) in probs.iter_rows().zip(&truth) {
        confusion[t][argmax(row)] += 1;
    }
    let correct: usize = (0..c).map(|k| confusion[k][k]).sum();
    Ok(Evaluation {
        confusion,
        accuracy: correct as f64 / instance_ids.len() as f64,
    })
}

/// First index of the maximum.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
