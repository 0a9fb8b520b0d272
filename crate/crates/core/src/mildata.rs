//! Multiple-instance dataset model: bag-CSV ingestion, a planted-cluster
//! synthetic generator, per-feature standardization, and stratified fold
//! splitting at bag level.
//!
//! Bag-CSV layout, one instance per line:
//!
//! ```text
//! bag_id,label,f1,f2,...,fd
//! ```
//!
//! UTF-8, optional header (detected by a non-numeric first field), `.` as
//! the decimal separator. Bag membership is defined by equal `bag_id`; the
//! label must be consistent within a bag.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

/// One bag: an identifier, a class label (0-based, remapped), and an
/// `n_i x d` instance matrix.
#[derive(Debug, Clone)]
pub struct Bag {
    pub id: String,
    pub label: usize,
    pub instances: Matrix,
}

/// An ordered collection of bags with consistent dimensionality.
///
/// Class labels are remapped to contiguous `0..num_classes`; the original
/// label strings are kept in `label_names` (sorted) for reporting.
#[derive(Debug, Clone)]
pub struct BagDataset {
    pub bags: Vec<Bag>,
    pub num_classes: usize,
    pub dim: usize,
    pub label_names: Vec<String>,
}

impl BagDataset {
    /// Validates the dataset invariants: consistent dimension, non-empty
    /// bags, labels in range, at least one bag per class.
    pub fn validate(&self) -> Result<()> {
        if self.bags.is_empty() {
            return Err(Error::EmptyInput("dataset has no bags".into()));
        }
        if self.num_classes < 1 {
            return Err(Error::Label("dataset has no classes".into()));
        }
        let mut seen = vec![false; self.num_classes];
        for bag in &self.bags {
            if bag.instances.rows() == 0 {
                return Err(Error::EmptyInput(format!("bag {} is empty", bag.id)));
            }
            if bag.instances.cols() != self.dim {
                return Err(Error::Dimension(format!(
                    "bag {} has dimension {}, dataset dimension is {}",
                    bag.id,
                    bag.instances.cols(),
                    self.dim
                )));
            }
            if bag.label >= self.num_classes {
                return Err(Error::Label(format!(
                    "bag {} has label {} outside 0..{}",
                    bag.id, bag.label, self.num_classes
                )));
            }
            seen[bag.label] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Label(format!(
                "class {} ({}) has no bags",
                missing, self.label_names[missing]
            )));
        }
        Ok(())
    }

    pub fn total_instances(&self) -> usize {
        self.bags.iter().map(|b| b.instances.rows()).sum()
    }

    /// Flattens all instances into one matrix plus parallel per-instance
    /// bag indices and bag-propagated labels.
    pub fn flatten(&self) -> (Matrix, Vec<usize>, Vec<usize>) {
        let total = self.total_instances();
        let mut data = Matrix::zeros(total, self.dim);
        let mut bag_of = Vec::with_capacity(total);
        let mut label_of = Vec::with_capacity(total);
        let mut row = 0;
        for (b, bag) in self.bags.iter().enumerate() {
            for r in 0..bag.instances.rows() {
                data.row_mut(row).copy_from_slice(bag.instances.row(r));
                bag_of.push(b);
                label_of.push(bag.label);
                row += 1;
            }
        }
        (data, bag_of, label_of)
    }

    /// New dataset containing only the listed bags, in the given order.
    /// Class ids and names are preserved.
    pub fn subset(&self, bag_indices: &[usize]) -> BagDataset {
        BagDataset {
            bags: bag_indices.iter().map(|&i| self.bags[i].clone()).collect(),
            num_classes: self.num_classes,
            dim: self.dim,
            label_names: self.label_names.clone(),
        }
    }

    /// Applies a per-instance transform to every bag, producing a dataset
    /// in the transformed feature space.
    pub fn map_instances(&self, f: impl Fn(&Matrix) -> Result<Matrix>) -> Result<BagDataset> {
        let mut bags = Vec::with_capacity(self.bags.len());
        let mut dim = None;
        for bag in &self.bags {
            let instances = f(&bag.instances)?;
            if let Some(d) = dim {
                if instances.cols() != d {
                    return Err(Error::Dimension(
                        "instance transform produced inconsistent dimensions".into(),
                    ));
                }
            } else {
                dim = Some(instances.cols());
            }
            bags.push(Bag {
                id: bag.id.clone(),
                label: bag.label,
                instances,
            });
        }
        Ok(BagDataset {
            bags,
            num_classes: self.num_classes,
            dim: dim.unwrap_or(self.dim),
            label_names: self.label_names.clone(),
        })
    }
}

/// Loads a bag-CSV file. The dimension is inferred from the first data row
/// and enforced on the rest.
pub fn load_bag_csv(path: impl AsRef<Path>) -> Result<BagDataset> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_bag_csv(&text)
}

/// Loads a MUSK-layout file: bag-CSV with d = 166.
pub fn load_musk(path: impl AsRef<Path>) -> Result<BagDataset> {
    let ds = load_bag_csv(path)?;
    if ds.dim != 166 {
        return Err(Error::Dimension(format!(
            "MUSK layout requires 166 features per instance, found {}",
            ds.dim
        )));
    }
    Ok(ds)
}

/// Parses bag-CSV text. Exposed for tests and in-memory round trips.
pub fn parse_bag_csv(text: &str) -> Result<BagDataset> {
    let mut dim: Option<usize> = None;
    // Preserve first-appearance order of bags.
    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, (String, Vec<Vec<f64>>)> = HashMap::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if idx == 0 && fields[0].parse::<f64>().is_err() {
            // Header row: non-numeric first field. Bag ids may be strings,
            // so require the feature columns to be non-numeric too.
            let features_non_numeric =
                fields.len() < 3 || fields[2..].iter().any(|f| f.parse::<f64>().is_err());
            if features_non_numeric {
                continue;
            }
        }
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected bag_id,label,f1,... got {} fields", fields.len()),
            });
        }
        let bag_id = fields[0].to_string();
        let label = fields[1].to_string();
        let mut features = Vec::with_capacity(fields.len() - 2);
        for (fi, raw) in fields[2..].iter().enumerate() {
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => features.push(v),
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("feature {} is not a finite number: {raw:?}", fi + 1),
                    })
                }
            }
        }
        match dim {
            None => dim = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected {d} features, got {}", features.len()),
                })
            }
            _ => {}
        }
        match by_id.get_mut(&bag_id) {
            None => {
                order.push(bag_id.clone());
                by_id.insert(bag_id, (label, vec![features]));
            }
            Some((existing_label, rows)) => {
                if *existing_label != label {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!(
                            "bag {bag_id} has inconsistent labels {existing_label:?} and {label:?}"
                        ),
                    });
                }
                rows.push(features);
            }
        }
    }

    if order.is_empty() {
        return Err(Error::EmptyInput("no data rows found".into()));
    }

    let mut label_names: Vec<String> = by_id.values().map(|(l, _)| l.clone()).collect();
    label_names.sort();
    label_names.dedup();
    let label_index: HashMap<&str, usize> = label_names
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();

    let mut bags = Vec::with_capacity(order.len());
    for id in order {
        let (label, rows) = by_id.remove(&id).unwrap();
        bags.push(Bag {
            id,
            label: label_index[label.as_str()],
            instances: Matrix::from_rows(&rows)?,
        });
    }
    let ds = BagDataset {
        bags,
        num_classes: label_names.len(),
        dim: dim.unwrap(),
        label_names,
    };
    ds.validate()?;
    Ok(ds)
}

/// Serializes a dataset back to bag-CSV. Float formatting is exact
/// round-trip (shortest representation).
pub fn write_bag_csv(ds: &BagDataset) -> String {
    let mut out = String::new();
    for bag in &ds.bags {
        for r in 0..bag.instances.rows() {
            let _ = write!(out, "{},{}", bag.id, ds.label_names[bag.label]);
            for v in bag.instances.row(r) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn save_bag_csv(ds: &BagDataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_bag_csv(ds))?;
    Ok(())
}

/// Per-instance ground truth from the synthetic generator: `Some(class)`
/// for planted signal instances, `None` for background noise.
pub type GroundTruth = Vec<Vec<Option<usize>>>;

/// Fraction of each bag drawn from the class signal distribution.
pub const SYNTH_SIGNAL_FRACTION: f64 = 0.3;

/// Generates a planted-cluster MIL dataset. Each class-`i` bag holds a
/// signal fraction (default [`SYNTH_SIGNAL_FRACTION`]) drawn from a class
/// Gaussian whose mean sits at pairwise distance `sep` from every other
/// class mean, and background instances drawn from a shared zero-mean
/// Gaussian. Deterministic in `seed`.
pub fn synth_planted(
    seed: u64,
    num_classes: usize,
    bags_per_class: usize,
    instances_per_bag: usize,
    dim: usize,
    sep: f64,
) -> Result<(BagDataset, GroundTruth)> {
    synth_planted_frac(
        seed,
        num_classes,
        bags_per_class,
        instances_per_bag,
        dim,
        sep,
        SYNTH_SIGNAL_FRACTION,
    )
}

/// [`synth_planted`] with an explicit signal fraction in (0, 1].
#[allow(clippy::too_many_arguments)]
pub fn synth_planted_frac(
    seed: u64,
    num_classes: usize,
    bags_per_class: usize,
    instances_per_bag: usize,
    dim: usize,
    sep: f64,
    signal_fraction: f64,
) -> Result<(BagDataset, GroundTruth)> {
    if num_classes < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    if sep < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "separation must be >= 0, got {sep}"
        )));
    }
    if dim < num_classes {
        return Err(Error::InvalidParameter(format!(
            "need dim >= num_classes to place {num_classes} separated means in {dim} dimensions"
        )));
    }
    if bags_per_class < 1 || instances_per_bag < 1 {
        return Err(Error::InvalidParameter(
            "bags_per_class and instances_per_bag must be >= 1".into(),
        ));
    }
    if !(signal_fraction > 0.0 && signal_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "signal fraction must be in (0, 1], got {signal_fraction}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Class mean i = (sep / sqrt(2)) * e_i, giving exact pairwise distance
    // `sep` between any two class means.
    let coord = sep / std::f64::consts::SQRT_2;

    let signal_per_bag = ((instances_per_bag as f64) * signal_fraction).round() as usize;
    let signal_per_bag = signal_per_bag.clamp(1, instances_per_bag);

    let mut bags = Vec::new();
    let mut truth: GroundTruth = Vec::new();
    for class in 0..num_classes {
        for b in 0..bags_per_class {
            let mut rows = Vec::with_capacity(instances_per_bag);
            let mut labels = Vec::with_capacity(instances_per_bag);
            for inst in 0..instances_per_bag {
                let signal = inst < signal_per_bag;
                let mut row: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
                if signal {
                    row[class] += coord;
                }
                rows.push(row);
                labels.push(if signal { Some(class) } else { None });
            }
            bags.push(Bag {
                id: format!("c{class}_b{b}"),
                label: class,
                instances: Matrix::from_rows(&rows)?,
            });
            truth.push(labels);
        }
    }

    let ds = BagDataset {
        bags,
        num_classes,
        dim,
        label_names: (0..num_classes).map(|c| c.to_string()).collect(),
    };
    ds.validate()?;
    Ok((ds, truth))
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream simple and seedable.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Bag-level stratified fold assignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldPlan {
    /// Fold index in `0..k` for each bag, aligned with the dataset order.
    pub fold_of_bag: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldPlan {
    pub fn train_test_split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (bag, &f) in self.fold_of_bag.iter().enumerate() {
            if f == fold {
                test.push(bag);
            } else {
                train.push(bag);
            }
        }
        (train, test)
    }
}

/// Stratified k-fold split at bag level: per-class bag counts across folds
/// differ by at most one. Deterministic for a fixed seed.
pub fn make_folds(ds: &BagDataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need k >= 2 folds, got {k}")));
    }
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes];
    for (i, bag) in ds.bags.iter().enumerate() {
        per_class[bag.label].push(i);
    }
    for (c, members) in per_class.iter().enumerate() {
        if members.len() < k {
            return Err(Error::Stratification(format!(
                "class {} ({}) has {} bags, need at least {k} for {k}-fold splitting",
                c,
                ds.label_names[c],
                members.len()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of_bag = vec![0usize; ds.bags.len()];
    for members in &mut per_class {
        members.shuffle(&mut rng);
        // Rotating start so the remainder bags do not always land in fold 0.
        let start = rng.gen_range(0..k);
        for (i, &bag) in members.iter().enumerate() {
            fold_of_bag[bag] = (start + i) % k;
        }
    }
    Ok(FoldPlan {
        fold_of_bag,
        k,
        seed,
    })
}

/// Per-feature zero-mean unit-variance scaling fitted on training data only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Matrix) -> Standardizer {
        let n = data.rows() as f64;
        let mean = crate::linalg::column_means(data);
        let mut var = vec![0.0; data.cols()];
        for r in 0..data.rows() {
            for (v, (x, m)) in var.iter_mut().zip(data.row(r).iter().zip(&mean)) {
                let d = x - m;
                *v += d * d;
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0 // constant feature: leave it centered but unscaled
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn transform(&self, data: &Matrix) -> Result<Matrix> {
        if data.cols() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "standardizer fitted on {} features, input has {}",
                self.mean.len(),
                data.cols()
            )));
        }
        let mut out = data.clone();
        for r in 0..out.rows() {
            for (i, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.mean[i]) / self.std[i];
            }
        }
        Ok(out)
    }
}
