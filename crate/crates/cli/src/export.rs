//! Analysis exports: 2-D PCA scatter of proportion vectors and the
//! CI-gap vs. CI-width scatter of mixed bags.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use mixbag_core::pca::{pca, Pca};
use mixbag_core::{mix_bags, AugmentedBag, Bag, ConfidenceDegree, Dataset, GammaStrategy, ProportionVector, Rng};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Original,
    Mixed,
}

impl Source {
    fn as_str(self) -> &'static str {
        match self {
            Source::Original => "original",
            Source::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub source: Source,
}

/// Projects original and mixed proportion vectors onto the top two principal
/// axes of their pooled, mean-centred covariance and writes `x,y,source` rows.
pub fn export_proportion_scatter(
    original: &[ProportionVector],
    mixed: &[ProportionVector],
    out: impl AsRef<Path>,
) -> Result<(Pca, Vec<ScatterPoint>)> {
    if original.len() + mixed.len() < 3 {
        return Err(CliError::Config("scatter export needs at least 3 bags".into()));
    }
    let tagged: Vec<(&ProportionVector, Source)> = original
        .iter()
        .map(|p| (p, Source::Original))
        .chain(mixed.iter().map(|p| (p, Source::Mixed)))
        .collect();
    let vectors: Vec<Vec<f64>> = tagged.iter().map(|(p, _)| p.as_slice().to_vec()).collect();
    let fit = pca(&vectors, 2)?;
    if fit.rank < 2 {
        warn!("proportion covariance has rank {}; missing components are zero-filled", fit.rank);
    }
    let points: Vec<ScatterPoint> = tagged
        .iter()
        .zip(&vectors)
        .map(|((_, source), v)| {
            let xy = fit.project(v);
            ScatterPoint {
                x: xy[0],
                y: xy[1],
                source: *source,
            }
        })
        .collect();
    let mut csv = String::from("x,y,source\n");
    for p in &points {
        let _ = writeln!(csv, "{},{},{}", p.x, p.y, p.source.as_str());
    }
    fs::write(out, csv)?;
    Ok((fit, points))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRow {
    /// `‖p_true − p_expected‖₁`
    pub gap: f64,
    /// `‖α σ‖₁`
    pub width: f64,
}

/// L1 gap between each mixed bag's realized and expected proportion, and its
/// L1 interval half-width. Needs the hidden instance labels.
pub fn ci_gap_rows(dataset: &Dataset, mixed: &[AugmentedBag]) -> Result<Vec<GapRow>> {
    mixed
        .iter()
        .map(|bag| {
            let counts = dataset.histogram(&bag.instance_ids)?;
            let n = bag.instance_ids.len() as f64;
            let gap = counts
                .iter()
                .zip(bag.label.expected.as_slice())
                .map(|(&k, &p)| (k as f64 / n - p).abs())
                .sum();
            let width = bag.label.sigma.iter().map(|s| bag.label.alpha * s).sum();
            Ok(GapRow { gap, width })
        })
        .collect()
}

/// Writes `gap,width` rows (one per mixed bag).
pub fn export_ci_gap_scatter(dataset: &Dataset, mixed: &[AugmentedBag], out: impl AsRef<Path>) -> Result<Vec<GapRow>> {
    let rows = ci_gap_rows(dataset, mixed)?;
    let mut csv = String::from("gap,width\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{}", r.gap, r.width);
    }
    fs::write(out, csv)?;
    Ok(rows)
}

/// `count` mixed bags from random distinct pairs of `bags`.
pub fn generate_mixed_bags(
    bags: &[Bag],
    count: usize,
    strategy: GammaStrategy,
    degree: ConfidenceDegree,
    rng: &mut Rng,
) -> Result<Vec<AugmentedBag>> {
    if bags.len() < 2 {
        return Err(CliError::Config("mixing needs at least two bags".into()));
    }
    (0..count)
        .map(|_| {
            let i = rng.below(bags.len());
            let j = (i + 1 + rng.below(bags.len() - 1)) % bags.len();
            let gamma = strategy.sample(rng);
            Ok(mix_bags(bags, i, j, gamma, degree, rng)?)
        })
        .collect()
}
