//! Labeled bag construction from a dataset with hidden instance labels.

use serde::{Deserialize, Serialize};

use crate::data::{Bag, Dataset, ProportionVector};
use crate::error::{Error, Result};
use crate::mixbag::{AugmentedBag, ConfidenceDegree, MixedBagLabel};
use crate::rng::Rng;

/// Lower clamp applied to each drawn class proportion before renormalizing.
pub const PROPORTION_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BagGenConfig {
    pub num_bags: usize,
    pub bag_size: usize,
    pub allow_overlap: bool,
    /// Std of the per-class Gaussian the bag proportions are drawn from.
    pub proportion_std: f64,
    pub rng_seed: u64,
}

impl Default for BagGenConfig {
    fn default() -> Self {
        Self {
            num_bags: 64,
            bag_size: 10,
            allow_overlap: false,
            proportion_std: 0.15,
            rng_seed: 0,
        }
    }
}

impl BagGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_bags < 1 {
            return Err(Error::arg("num_bags must be >= 1"));
        }
        if self.bag_size < 1 {
            return Err(Error::arg("bag_size must be >= 1"));
        }
        if !(self.proportion_std > 0.0 && self.proportion_std.is_finite()) {
            return Err(Error::arg("proportion_std must be positive"));
        }
        Ok(())
    }
}

/// Draws one proportion vector: `N(1/C, std)` per class, clamped to
/// `[PROPORTION_FLOOR, 1]`, then renormalized.
pub fn sample_proportion(num_classes: usize, proportion_std: f64, rng: &mut Rng) -> Result<ProportionVector> {
    if num_classes < 2 {
        return Err(Error::arg("num_classes must be >= 2"));
    }
    let centre = 1.0 / num_classes as f64;
    let raw: Vec<f64> = (0..num_classes)
        .map(|_| rng.normal(centre, proportion_std).clamp(PROPORTION_FLOOR, 1.0))
        .collect();
    let sum: f64 = raw.iter().sum();
    ProportionVector::new(raw.into_iter().map(|v| v / sum).collect())
}

/// Largest-remainder (Hamilton) apportionment of `total` items. Ties in the
/// fractional part go to the lower class index.
pub fn apportion(p: &ProportionVector, total: usize) -> Vec<usize> {
    let quotas: Vec<f64> = p.as_slice().iter().map(|&v| v * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // Stable sort keeps lower indices first among equal remainders.
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra)
    });
    for &c in order.iter().take(total.saturating_sub(assigned)) {
        counts[c] += 1;
    }
    counts
}

/// Builds `cfg.num_bags` bags over the whole dataset, seeded by `cfg.rng_seed`.
pub fn make_bags(dataset: &Dataset, cfg: &BagGenConfig) -> Result<Vec<Bag>> {
    let pool: Vec<usize> = (0..dataset.len()).collect();
    make_bags_from_pool(dataset, &pool, cfg, &mut Rng::new(cfg.rng_seed))
}

/// Builds bags drawing only from the instance ids in `pool`.
///
/// Each bag draws a proportion, apportions `bag_size` into class counts and
/// samples that many instances per class without replacement. Without overlap
/// the sampled instances leave the pool. The label is the realized histogram.
pub fn make_bags_from_pool(
    dataset: &Dataset,
    pool: &[usize],
    cfg: &BagGenConfig,
    rng: &mut Rng,
) -> Result<Vec<Bag>> {
    cfg.validate()?;
    let num_classes = dataset.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for &id in pool {
        let c = dataset
            .get(id)
            .true_class()
            .ok_or_else(|| Error::arg(format!("instance {id} has no label; cannot build bags")))?;
        by_class[c].push(id);
    }

    let mut bags = Vec::with_capacity(cfg.num_bags);
    for _ in 0..cfg.num_bags {
        let drawn = sample_proportion(num_classes, cfg.proportion_std, rng)?;
        let counts = apportion(&drawn, cfg.bag_size);
        let mut ids = Vec::with_capacity(cfg.bag_size);
        for (class, &k) in counts.iter().enumerate() {
            let available = &mut by_class[class];
            if k > available.len() {
                return Err(Error::Capacity {
                    class,
                    needed: k,
                    available: available.len(),
                });
            }
            if cfg.allow_overlap {
                ids.extend(rng.sample(available, k));
            } else {
                for _ in 0..k {
                    let j = rng.below(available.len());
                    ids.push(available.swap_remove(j));
                }
            }
        }
        bags.push(Bag::new(ids, ProportionVector::from_counts(&counts)?)?);
    }
    Ok(bags)
}

/// Concatenates two bags; the label is the size-weighted mean of the labels.
///
/// Labels that are exact histograms (`p·|B|` integral) are combined through
/// their counts so the result equals the union's histogram bit-for-bit.
/// Shared instances, possible only with overlapping bags, are kept twice.
pub fn union_bags(a: &Bag, b: &Bag) -> Result<Bag> {
    if a.label.num_classes() != b.label.num_classes() {
        return Err(Error::arg("bags disagree on the number of classes"));
    }
    let (na, nb) = (a.len(), b.len());
    let label = match (histogram_counts(a), histogram_counts(b)) {
        (Some(ca), Some(cb)) => {
            let merged: Vec<usize> = ca.iter().zip(&cb).map(|(x, y)| x + y).collect();
            ProportionVector::from_counts(&merged)?
        }
        _ => {
            let n = (na + nb) as f64;
            let mixed: Vec<f64> = a
                .label
                .as_slice()
                .iter()
                .zip(b.label.as_slice())
                .map(|(pa, pb)| ((na as f64 * pa + nb as f64 * pb) / n).clamp(0.0, 1.0))
                .collect();
            ProportionVector::new(mixed)?
        }
    };
    let mut ids = Vec::with_capacity(na + nb);
    ids.extend_from_slice(&a.instance_ids);
    ids.extend_from_slice(&b.instance_ids);
    Ok(Bag {
        instance_ids: ids,
        label,
    })
}

/// Recovers integer class counts when the label is an exact histogram.
fn histogram_counts(bag: &Bag) -> Option<Vec<usize>> {
    let n = bag.len() as f64;
    let counts: Vec<f64> = bag.label.as_slice().iter().map(|p| p * n).collect();
    if counts.iter().all(|k| (k - k.round()).abs() < 1e-6) {
        let counts: Vec<usize> = counts.iter().map(|k| k.round() as usize).collect();
        (counts.iter().sum::<usize>() == bag.len()).then_some(counts)
    } else {
        None
    }
}

/// Samples `n` instances from `bags[index]`. The label keeps the parent's
/// proportion as the expectation, with `sigma_c = sqrt(p_c (1 - p_c) / n)`.
pub fn sub_bag(
    bags: &[Bag],
    index: usize,
    n: usize,
    degree: ConfidenceDegree,
    rng: &mut Rng,
) -> Result<AugmentedBag> {
    let parent = bags
        .get(index)
        .ok_or_else(|| Error::arg(format!("bag index {index} out of range")))?;
    if n < 1 || n > parent.len() {
        return Err(Error::arg(format!(
            "sub-bag size {n} outside [1, {}]",
            parent.len()
        )));
    }
    let ids = rng.sample(&parent.instance_ids, n);
    let sigma = parent
        .label
        .as_slice()
        .iter()
        .map(|&p| sampling_std(p, n))
        .collect();
    Ok(AugmentedBag {
        instance_ids: ids,
        label: MixedBagLabel {
            expected: parent.label.clone(),
            sigma,
            alpha: degree.alpha(),
            gamma: 1.0,
            parent_ids: (index, index),
        },
    })
}

/// Standard deviation of a class proportion estimated from `n` draws.
pub fn sampling_std(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}
