//! Instances, datasets, bags and proportion labels.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Tolerance on the sum of a proportion vector.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub features: Vec<f64>,
    true_class: Option<usize>,
}

impl Instance {
    pub fn new(features: Vec<f64>, true_class: Option<usize>) -> Self {
        Self {
            features,
            true_class,
        }
    }

    /// Hidden ground-truth label. Only bag construction and evaluation read it.
    pub fn true_class(&self) -> Option<usize> {
        self.true_class
    }
}

/// Class-proportion vector on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProportionVector(Vec<f64>);

impl ProportionVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::arg("proportion vector is empty"));
        }
        if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::arg(format!("proportion entry {bad} outside [0, 1]")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::arg(format!("proportions sum to {sum}, expected 1")));
        }
        Ok(Self(p))
    }

    /// Uniform vector over `num_classes` classes.
    pub fn uniform(num_classes: usize) -> Self {
        Self(vec![1.0 / num_classes as f64; num_classes])
    }

    /// Exact label from a class histogram: `counts[c] / sum(counts)`.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::arg("histogram is empty"));
        }
        Self::new(counts.iter().map(|&n| n as f64 / total as f64).collect())
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ProportionVector {
    type Output = f64;

    fn index(&self, c: usize) -> &f64 {
        &self.0[c]
    }
}

impl TryFrom<Vec<f64>> for ProportionVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProportionVector> for Vec<f64> {
    fn from(p: ProportionVector) -> Self {
        p.0
    }
}

/// Index set over a dataset together with its proportion label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bag {
    pub instance_ids: Vec<usize>,
    pub label: ProportionVector,
}

impl Bag {
    pub fn new(instance_ids: Vec<usize>, label: ProportionVector) -> Result<Self> {
        if instance_ids.is_empty() {
            return Err(Error::arg("bag has no instances"));
        }
        let mut sorted = instance_ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::arg("bag contains duplicate instance ids"));
        }
        Ok(Self {
            instance_ids,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instance_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    instances: Vec<Instance>,
    num_classes: usize,
    feature_dim: usize,
}

impl Dataset {
    pub fn new(instances: Vec<Instance>, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::arg("need at least two classes"));
        }
        let feature_dim = instances.first().map_or(0, |i| i.features.len());
        for (i, inst) in instances.iter().enumerate() {
            if inst.features.len() != feature_dim {
                return Err(Error::arg(format!(
                    "instance {i} has dimension {}, expected {feature_dim}",
                    inst.features.len()
                )));
            }
            if inst.true_class.is_some_and(|c| c >= num_classes) {
                return Err(Error::arg(format!("instance {i} label out of range")));
            }
        }
        Ok(Self {
            instances,
            num_classes,
            feature_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn get(&self, id: usize) -> &Instance {
        &self.instances[id]
    }

    /// Row-major `ids.len() × D` feature matrix.
    pub fn gather_features(&self, ids: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(ids.len() * self.feature_dim);
        for &id in ids {
            out.extend_from_slice(&self.instances[id].features);
        }
        out
    }

    /// Class histogram of the hidden labels of `ids`. Unlabeled ids are an error.
    pub fn histogram(&self, ids: &[usize]) -> Result<Vec<usize>> {
        let mut counts = vec![0; self.num_classes];
        for &id in ids {
            let c = self.instances[id]
                .true_class
                .ok_or_else(|| Error::arg(format!("instance {id} has no label")))?;
            counts[c] += 1;
        }
        Ok(counts)
    }

    /// Restrict to `ids`, preserving their order.
    pub fn subset(&self, ids: &[usize]) -> Dataset {
        Dataset {
            instances: ids.iter().map(|&i| self.instances[i].clone()).collect(),
            num_classes: self.num_classes,
            feature_dim: self.feature_dim,
        }
    }
}

/// Reads `D` feature columns followed by an integer label column (`-1` = unlabeled).
pub fn load_csv(path: impl AsRef<Path>, num_classes: usize, has_header: bool) -> Result<Dataset> {
    let file = File::open(path)?;
    read_csv(file, num_classes, has_header)
}

pub fn read_csv<R: std::io::Read>(reader: R, num_classes: usize, has_header: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut instances = Vec::new();
    let mut dim: Option<usize> = None;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let perr = |msg: String| Error::Parse { line, msg };
        if record.len() < 2 {
            return Err(perr(format!("expected at least 2 columns, found {}", record.len())));
        }
        let d = *dim.get_or_insert(record.len() - 1);
        if record.len() != d + 1 {
            return Err(perr(format!(
                "expected {} columns, found {}",
                d + 1,
                record.len()
            )));
        }
        let features = record
            .iter()
            .take(d)
            .map(|f| f.parse::<f64>().map_err(|_| perr(format!("non-numeric feature '{f}'"))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
            return Err(perr(format!("non-finite feature {bad}")));
        }
        let raw = &record[d];
        let label: i64 = raw
            .parse()
            .map_err(|_| perr(format!("label '{raw}' is not an integer")))?;
        let true_class = match label {
            -1 => None,
            l if l >= 0 && (l as usize) < num_classes => Some(l as usize),
            l => return Err(perr(format!("label {l} outside [0, {num_classes})"))),
        };
        instances.push(Instance::new(features, true_class));
    }
    if instances.is_empty() {
        return Err(Error::Empty("no rows".into()));
    }
    Dataset::new(instances, num_classes)
}

/// Writes a dataset in the loader's format with 17 significant digits.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv_to(dataset, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_csv_to<W: Write>(dataset: &Dataset, w: &mut W) -> Result<()> {
    for inst in &dataset.instances {
        for v in &inst.features {
            write!(w, "{},", fmt17(*v))?;
        }
        match inst.true_class {
            Some(c) => writeln!(w, "{c}")?,
            None => writeln!(w, "-1")?,
        }
    }
    Ok(())
}

/// Scientific notation with 17 significant digits; round-trips every f64.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Gaussian blobs: class `c` is centred on `±m·e_{c mod dim}`, with the sign
/// alternating every `dim` classes and magnitude `m` growing by one every `2·dim`
/// classes, so every class has a distinct, linearly separable centre.
pub fn make_blobs(
    num_classes: usize,
    per_class: usize,
    dim: usize,
    spread: f64,
    rng: &mut Rng,
) -> Result<Dataset> {
    if num_classes < 2 {
        return Err(Error::arg("num_classes must be >= 2"));
    }
    if per_class < 1 || dim < 1 {
        return Err(Error::arg("per_class and dim must be >= 1"));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::arg("spread must be positive"));
    }
    let mut instances = Vec::with_capacity(num_classes * per_class);
    for c in 0..num_classes {
        let centre = blob_centre(c, dim);
        for _ in 0..per_class {
            let features = centre.iter().map(|&m| rng.normal(m, spread)).collect();
            instances.push(Instance::new(features, Some(c)));
        }
    }
    Dataset::new(instances, num_classes)
}

fn blob_centre(class: usize, dim: usize) -> Vec<f64> {
    let mut centre = vec![0.0; dim];
    let sign = if (class / dim).is_multiple_of(2) { 1.0 } else { -1.0 };
    let magnitude = 1.0 + (class / (2 * dim)) as f64;
    centre[class % dim] = sign * magnitude;
    centre
}
