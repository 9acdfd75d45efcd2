//! MixBag: mixed bags built from sub-bags of two labeled parents, labeled
//! with an expected proportion and a per-class confidence interval.

use serde::{Deserialize, Serialize};

use crate::baggen::sampling_std;
use crate::data::{Bag, ProportionVector};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// How the mixing ratio is drawn for each mixed bag.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaStrategy {
    #[default]
    Uniform,
    /// Normal draw clamped to [0, 1].
    Gauss { mean: f64, std: f64 },
    Half,
}

impl GammaStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GammaStrategy::Gauss { mean, std } if !(std > 0.0 && std.is_finite() && mean.is_finite()) => {
                Err(Error::arg("gauss gamma strategy needs a positive finite std"))
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            GammaStrategy::Uniform => rng.uniform(),
            GammaStrategy::Gauss { mean, std } => rng.normal(mean, std).clamp(0.0, 1.0),
            GammaStrategy::Half => 0.5,
        }
    }
}

pub fn sample_gamma(strategy: GammaStrategy, rng: &mut Rng) -> f64 {
    strategy.sample(rng)
}

/// Two-sided confidence level; serialized as the integer percent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum ConfidenceDegree {
    P50,
    P80,
    P95,
    #[default]
    P99,
}

impl ConfidenceDegree {
    pub const ALL: [ConfidenceDegree; 4] = [Self::P50, Self::P80, Self::P95, Self::P99];

    pub fn percent(self) -> u32 {
        match self {
            Self::P50 => 50,
            Self::P80 => 80,
            Self::P95 => 95,
            Self::P99 => 99,
        }
    }

    /// Standard-normal quantile at `1 - (1 - level) / 2`.
    pub fn alpha(self) -> f64 {
        match self {
            Self::P50 => 0.674_489_750_196_081_7,
            Self::P80 => 1.281_551_565_544_600_4,
            Self::P95 => 1.959_963_984_540_054,
            Self::P99 => 2.575_829_303_548_900_4,
        }
    }
}

impl TryFrom<u32> for ConfidenceDegree {
    type Error = Error;

    fn try_from(p: u32) -> Result<Self> {
        match p {
            50 => Ok(Self::P50),
            80 => Ok(Self::P80),
            95 => Ok(Self::P95),
            99 => Ok(Self::P99),
            other => Err(Error::arg(format!(
                "confidence degree {other} not one of 50, 80, 95, 99"
            ))),
        }
    }
}

impl From<ConfidenceDegree> for u32 {
    fn from(d: ConfidenceDegree) -> u32 {
        d.percent()
    }
}

/// Label of an augmented bag: expected proportion plus interval half-width
/// `alpha * sigma` per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedBagLabel {
    pub expected: ProportionVector,
    pub sigma: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub parent_ids: (usize, usize),
}

impl MixedBagLabel {
    pub fn num_classes(&self) -> usize {
        self.expected.num_classes()
    }
}

/// An augmented bag. Its instance ids may repeat when the parents overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedBag {
    pub instance_ids: Vec<usize>,
    pub label: MixedBagLabel,
}

/// Per-class interval bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// `[expected - alpha*sigma, expected + alpha*sigma]` clamped to [0, 1].
pub fn ci_bounds(label: &MixedBagLabel) -> Vec<Interval> {
    label
        .expected
        .as_slice()
        .iter()
        .zip(&label.sigma)
        .map(|(&p, &s)| {
            let half = label.alpha * s;
            Interval {
                lower: (p - half).max(0.0),
                upper: (p + half).min(1.0),
            }
        })
        .collect()
}

/// Realized sub-bag sizes for a drawn `gamma`. Each parent contributes at
/// least one instance and never all of its instances.
pub fn sub_bag_sizes(len_a: usize, len_b: usize, gamma: f64) -> Result<(usize, usize)> {
    if len_a < 2 || len_b < 2 {
        return Err(Error::arg(format!(
            "mixing needs parents with at least 2 instances, got {len_a} and {len_b}"
        )));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::arg(format!("gamma {gamma} outside [0, 1]")));
    }
    let n_i = ((len_a as f64 * gamma).round() as usize).clamp(1, len_a - 1);
    let n_j = ((len_b as f64 * (1.0 - gamma)).round() as usize).clamp(1, len_b - 1);
    Ok((n_i, n_j))
}

/// Mixes `bags[i]` and `bags[j]`.
///
/// Samples `n_i ≈ |a|·γ` instances of the first parent and `n_j ≈ |b|·(1−γ)` of
/// the second, then labels the result using the effective ratio
/// `γ' = n_i / (n_i + n_j)`:
///
/// * expected: `γ' p_a + (1 − γ') p_b`
/// * sigma: `γ' sqrt(p_a(1−p_a)/n_i) + (1 − γ') sqrt(p_b(1−p_b)/n_j)`
pub fn mix_bags(
    bags: &[Bag],
    i: usize,
    j: usize,
    gamma: f64,
    degree: ConfidenceDegree,
    rng: &mut Rng,
) -> Result<AugmentedBag> {
    let get = |k: usize| {
        bags.get(k)
            .ok_or_else(|| Error::arg(format!("bag index {k} out of range")))
    };
    let (a, b) = (get(i)?, get(j)?);
    if a.label.num_classes() != b.label.num_classes() {
        return Err(Error::arg("parents disagree on the number of classes"));
    }
    let (n_i, n_j) = sub_bag_sizes(a.len(), b.len(), gamma)?;
    let mut ids = rng.sample(&a.instance_ids, n_i);
    ids.extend(rng.sample(&b.instance_ids, n_j));

    let g = n_i as f64 / (n_i + n_j) as f64;
    let (pa, pb) = (a.label.as_slice(), b.label.as_slice());
    let expected = pa
        .iter()
        .zip(pb)
        .map(|(&x, &y)| (g * x + (1.0 - g) * y).clamp(0.0, 1.0))
        .collect();
    let sigma = pa
        .iter()
        .zip(pb)
        .map(|(&x, &y)| g * sampling_std(x, n_i) + (1.0 - g) * sampling_std(y, n_j))
        .collect();
    Ok(AugmentedBag {
        instance_ids: ids,
        label: MixedBagLabel {
            expected: ProportionVector::new(expected)?,
            sigma,
            alpha: degree.alpha(),
            gamma: g,
            parent_ids: (i, j),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bag(ids: std::ops::Range<usize>, p: &[f64]) -> Bag {
        Bag::new(ids.collect(), ProportionVector::new(p.to_vec()).unwrap()).unwrap()
    }

    /// Standard normal CDF by composite Simpson quadrature of the density.
    fn normal_cdf(x: f64) -> f64 {
        let n = 20_000;
        let h = x.abs() / n as f64;
        let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = pdf(0.0) + pdf(x.abs());
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * pdf(k as f64 * h);
        }
        let half = s * h / 3.0;
        if x >= 0.0 {
            0.5 + half
        } else {
            0.5 - half
        }
    }

    fn two_sided_quantile(level: f64) -> f64 {
        let target = 1.0 - (1.0 - level) / 2.0;
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn alpha_matches_inverse_cdf_oracle() {
        let published = [(50, 0.674), (80, 1.282), (95, 1.96), (99, 2.576)];
        for (d, (pct, rounded)) in ConfidenceDegree::ALL.iter().zip(published) {
            assert_eq!(d.percent(), pct);
            assert!((d.alpha() - rounded).abs() < 1e-3);
            let oracle = two_sided_quantile(pct as f64 / 100.0);
            assert!((d.alpha() - oracle).abs() < 1e-8, "{pct}: {oracle}");
        }
    }

    #[test]
    fn degree_serializes_as_percent() {
        assert_eq!(serde_json::to_string(&ConfidenceDegree::P95).unwrap(), "95");
        let d: ConfidenceDegree = serde_json::from_str("80").unwrap();
        assert_eq!(d, ConfidenceDegree::P80);
        assert!(serde_json::from_str::<ConfidenceDegree>("90").is_err());
    }

    #[test]
    fn half_is_constant() {
        let mut rng = Rng::new(0);
        for _ in 0..100 {
            assert_eq!(sample_gamma(GammaStrategy::Half, &mut rng), 0.5);
        }
    }

    #[test]
    fn uniform_gamma_mean() {
        let mut rng = Rng::new(1);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_gamma(GammaStrategy::Uniform, &mut rng))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn gauss_gamma_clamped_and_centred() {
        let mut rng = Rng::new(2);
        let s = GammaStrategy::Gauss { mean: 0.5, std: 0.25 };
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let g = sample_gamma(s, &mut rng);
            assert!((0.0..=1.0).contains(&g));
            sum += g;
        }
        assert!((sum / n as f64 - 0.5).abs() < 0.01);
        assert!(GammaStrategy::Gauss { mean: 0.5, std: 0.0 }.validate().is_err());
    }

    #[test]
    fn gamma_strategy_json() {
        let s: GammaStrategy = serde_json::from_str(r#"{"kind":"gauss","mean":0.5,"std":0.25}"#).unwrap();
        assert_eq!(s, GammaStrategy::Gauss { mean: 0.5, std: 0.25 });
        let s: GammaStrategy = serde_json::from_str(r#"{"kind":"half"}"#).unwrap();
        assert_eq!(s, GammaStrategy::Half);
    }

    #[test]
    fn pure_parents_give_zero_sigma() {
        let bags = vec![bag(0..10, &[1.0, 0.0]), bag(10..20, &[0.0, 1.0])];
        let m = mix_bags(&bags, 0, 1, 0.5, ConfidenceDegree::P99, &mut Rng::new(0)).unwrap();
        assert_eq!(m.label.expected.as_slice(), &[0.5, 0.5]);
        assert_eq!(m.label.sigma, vec![0.0, 0.0]);
        assert_eq!(m.instance_ids.len(), 10);
        assert_eq!(m.label.parent_ids, (0, 1));
    }

    #[test]
    fn expected_with_effective_gamma() {
        // |a| = 10, |b| = 10, gamma 0.3 -> n_i = 3, n_j = 7, effective 0.3.
        let bags = vec![bag(0..10, &[0.3, 0.5, 0.2]), bag(10..20, &[0.1, 0.1, 0.8])];
        let m = mix_bags(&bags, 0, 1, 0.3, ConfidenceDegree::P99, &mut Rng::new(0)).unwrap();
        assert_eq!(m.label.gamma, 0.3);
        let want = [0.16, 0.22, 0.62];
        for (got, w) in m.label.expected.as_slice().iter().zip(want) {
            assert!((got - w).abs() < 1e-12, "{got} vs {w}");
        }
    }

    #[test]
    fn sigma_arithmetic() {
        let bags = vec![bag(0..10, &[0.5, 0.5]), bag(10..20, &[0.5, 0.5])];
        let m = mix_bags(&bags, 0, 1, 0.5, ConfidenceDegree::P99, &mut Rng::new(0)).unwrap();
        assert_eq!(m.label.gamma, 0.5);
        for s in m.label.sigma {
            assert!((s - 0.223_606_797_749_979).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_gamma_is_exact_ratio() {
        let bags = vec![bag(0..7, &[3.0 / 7.0, 4.0 / 7.0]), bag(7..20, &[0.0, 1.0])];
        let mut rng = Rng::new(5);
        for _ in 0..200 {
            let g = rng.uniform();
            let m = mix_bags(&bags, 0, 1, g, ConfidenceDegree::P95, &mut rng).unwrap();
            let n_i = m.instance_ids.iter().filter(|&&id| id < 7).count();
            let n_j = m.instance_ids.len() - n_i;
            assert_eq!(m.label.gamma, n_i as f64 / (n_i + n_j) as f64);
            assert!((1..7).contains(&n_i));
            assert!((1..13).contains(&n_j));
        }
    }

    #[test]
    fn half_on_identical_labels_keeps_label() {
        let p = [0.3, 0.5, 0.2];
        let bags = vec![bag(0..10, &p), bag(10..20, &p)];
        let g = sample_gamma(GammaStrategy::Half, &mut Rng::new(0));
        let m = mix_bags(&bags, 0, 1, g, ConfidenceDegree::P99, &mut Rng::new(0)).unwrap();
        assert_eq!(m.label.expected.as_slice(), &p);
    }

    #[test]
    fn clamping_extreme_gamma() {
        assert_eq!(sub_bag_sizes(10, 10, 0.0).unwrap(), (1, 9));
        assert_eq!(sub_bag_sizes(10, 10, 1.0).unwrap(), (9, 1));
        assert!(sub_bag_sizes(1, 10, 0.5).is_err());
        assert!(sub_bag_sizes(10, 10, 1.5).is_err());
    }

    #[test]
    fn bounds_examples() {
        let label = |e: Vec<f64>, s: Vec<f64>, alpha: f64| MixedBagLabel {
            expected: ProportionVector::new(e).unwrap(),
            sigma: s,
            alpha,
            gamma: 0.5,
            parent_ids: (0, 1),
        };
        let b = ci_bounds(&label(vec![0.4, 0.6], vec![0.0, 0.0], 2.576));
        assert_eq!((b[0].lower, b[0].upper), (0.4, 0.4));
        assert_eq!((b[1].lower, b[1].upper), (0.6, 0.6));

        let b = ci_bounds(&label(vec![0.05, 0.95], vec![0.1, 0.1], 1.0));
        assert_eq!(b[0].lower, 0.0);
        assert!((b[0].upper - 0.15).abs() < 1e-15);
        assert_eq!(b[1].upper, 1.0);

        let b = ci_bounds(&label(vec![0.5, 0.5], vec![0.1, 0.1], 1.96));
        assert!((b[0].lower - 0.304).abs() < 1e-12);
        assert!((b[0].upper - 0.696).abs() < 1e-12);
    }

    #[test]
    fn mixed_label_json_fields() {
        let bags = vec![bag(0..10, &[0.3, 0.7]), bag(10..20, &[0.6, 0.4])];
        let m = mix_bags(&bags, 0, 1, 0.4, ConfidenceDegree::P99, &mut Rng::new(0)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&m.label).unwrap();
        for key in ["expected", "sigma", "alpha", "gamma", "parent_ids"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let back: MixedBagLabel = serde_json::from_value(v).unwrap();
        assert_eq!(back, m.label);
    }
}
