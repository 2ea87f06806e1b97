//! Labelled datasets, the synthetic imbalanced benchmark and known/unknown
//! trial splits.
//!
//! Labels are 1-based class ids. Known classes are `1..=C_known`; unknown
//! test classes continue after that; background samples carry label `0`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Matrix, Result};

/// Label used for background samples.
pub const BACKGROUND_LABEL: u32 = 0;

const TRAIN_FRACTION: f64 = 0.8;
const MAX_CENTER_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    KnownTrain,
    KnownTest,
    UnknownTest,
    Background,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::KnownTrain => "known-train",
            Role::KnownTest => "known-test",
            Role::UnknownTest => "unknown-test",
            Role::Background => "background",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    role: Role,
    features: Matrix,
    labels: Vec<u32>,
}

impl LabeledDataset {
    pub fn new(role: Role, features: Matrix, labels: Vec<u32>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if !features.is_finite() {
            return Err(Error::InvalidParameter("dataset contains non-finite features".into()));
        }
        Ok(Self { role, features, labels })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Samples per label, ordered by label.
    pub fn class_counts(&self) -> BTreeMap<u32, usize> {
        let mut counts = BTreeMap::new();
        for &y in &self.labels {
            *counts.entry(y).or_insert(0) += 1;
        }
        counts
    }

    /// Largest label present, i.e. the number of known classes for a
    /// training set labelled `1..=C`.
    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_known: usize,
    pub num_unknown: usize,
    pub input_dim: usize,
    pub majority: usize,
    pub imbalance_ratio: f64,
    pub cluster_std: f64,
    pub center_separation: f64,
    pub bg_samples: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_known: 6,
            num_unknown: 2,
            input_dim: 16,
            majority: 500,
            imbalance_ratio: 10.0,
            cluster_std: 1.0,
            center_separation: 4.0,
            bg_samples: 1000,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_known < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 known classes, got {}",
                self.num_known
            )));
        }
        if self.num_unknown < 1 {
            return Err(Error::InvalidParameter("need at least 1 unknown class".into()));
        }
        if self.input_dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "input dimension must be >= 2, got {}",
                self.input_dim
            )));
        }
        if !(self.imbalance_ratio >= 1.0) || !self.imbalance_ratio.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "imbalance ratio must be >= 1, got {}",
                self.imbalance_ratio
            )));
        }
        if self.majority == 0 || (self.majority as f64 / self.imbalance_ratio) < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "majority count {} with imbalance ratio {} leaves the minority class empty",
                self.majority, self.imbalance_ratio
            )));
        }
        if !(self.cluster_std > 0.0) || !(self.center_separation > 0.0) {
            return Err(Error::InvalidParameter(
                "cluster_std and center_separation must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Samples per unknown class: the test share of a majority class.
    pub fn unknown_per_class(&self) -> usize {
        libm::round((1.0 - TRAIN_FRACTION) * self.majority as f64).max(1.0) as usize
    }
}

/// Per-class sample counts `round(majority * IR^(-c / (C - 1)))` for
/// `c = 0..C`, so the first class has `majority` samples and the last has
/// `majority / IR`.
pub fn class_count_profile(majority: usize, imbalance_ratio: f64, num_classes: usize) -> Vec<usize> {
    if num_classes == 1 {
        return alloc::vec![majority];
    }
    (0..num_classes)
        .map(|c| {
            let exponent = -(c as f64) / (num_classes - 1) as f64;
            let n = majority as f64 * libm::pow(imbalance_ratio, exponent);
            (libm::round(n) as usize).max(1)
        })
        .collect()
}

/// Training samples kept out of `n`: 80% rounded, leaving at least one
/// sample on each side when `n >= 2`.
pub fn train_count(n: usize) -> usize {
    if n < 2 {
        return n;
    }
    (libm::round(TRAIN_FRACTION * n as f64) as usize).clamp(1, n - 1)
}

/// Which generated classes act as known and unknown in one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialSplit {
    pub trial_index: usize,
    /// Generated class ids, sorted ascending.
    pub known_class_ids: Vec<usize>,
    pub unknown_class_ids: Vec<usize>,
}

impl TrialSplit {
    /// The first `num_known` classes are known, the rest unknown.
    pub fn identity(num_classes: usize, num_known: usize) -> Self {
        Self {
            trial_index: 0,
            known_class_ids: (0..num_known).collect(),
            unknown_class_ids: (num_known..num_classes).collect(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.known_class_ids.len() + self.unknown_class_ids.len()
    }
}

fn binomial_saturating(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// `num_trials` random known/unknown partitions of `num_classes` classes.
///
/// Trials repeat a split only once every distinct split has been used.
pub fn make_trial_splits(num_classes: usize, num_known: usize, num_trials: usize, seed: u64) -> Result<Vec<TrialSplit>> {
    if num_known == 0 || num_known >= num_classes {
        return Err(Error::InvalidParameter(format!(
            "need 0 < known ({num_known}) < classes ({num_classes})"
        )));
    }
    if num_trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    let distinct = binomial_saturating(num_classes, num_known);
    let mut splits: Vec<TrialSplit> = Vec::with_capacity(num_trials);
    for trial in 0..num_trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        // reuse is only unavoidable once a whole cycle of distinct splits is used
        let cycle_start = trial - trial % distinct.max(1);
        let mut known;
        let mut attempts = 0;
        loop {
            known = rand::seq::index::sample(&mut rng, num_classes, num_known).into_vec();
            known.sort_unstable();
            attempts += 1;
            let seen = splits[cycle_start..].iter().any(|s| s.known_class_ids == known);
            if !seen || attempts >= 1000 {
                break;
            }
        }
        let unknown = (0..num_classes).filter(|c| known.binary_search(c).is_err()).collect();
        splits.push(TrialSplit {
            trial_index: trial,
            known_class_ids: known,
            unknown_class_ids: unknown,
        });
    }
    Ok(splits)
}

/// The four datasets of one benchmark instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub train: LabeledDataset,
    pub test_known: LabeledDataset,
    pub test_unknown: LabeledDataset,
    pub background: LabeledDataset,
}

fn draw_cluster_centers<R: Rng>(rng: &mut R, count: usize, config: &SynthConfig) -> Result<Vec<Vec<f64>>> {
    let min_distance = 3.0 * config.cluster_std;
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut attempts = 0;
    while centers.len() < count {
        if attempts >= MAX_CENTER_ATTEMPTS {
            return Err(Error::InfeasibleSeparation {
                wanted: count,
                min_distance,
                attempts,
            });
        }
        attempts += 1;
        let mut v: Vec<f64> = (0..config.input_dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if norm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x *= config.center_separation / norm);
        let far_enough = centers
            .iter()
            .all(|c| libm::sqrt(crate::squared_distance(c, &v)) >= min_distance);
        if far_enough {
            centers.push(v);
        }
    }
    Ok(centers)
}

fn push_gaussian<R: Rng>(rng: &mut R, center: &[f64], std: f64, out: &mut Vec<f64>) {
    for &c in center {
        let z: f64 = StandardNormal.sample(rng);
        out.push(c + std * z);
    }
}

/// Generates the benchmark with the first `num_known` clusters as known
/// classes.
pub fn generate_synthetic(config: &SynthConfig) -> Result<SynthData> {
    let split = TrialSplit::identity(config.num_known + config.num_unknown, config.num_known);
    generate_for_split(config, &split)
}

/// Generates the benchmark for one trial split.
///
/// Cluster centers depend only on the seed, so all trials share the same
/// geometry and differ in which clusters are known and in the sample noise.
/// Known classes get the imbalance profile in the order of
/// `split.known_class_ids`.
pub fn generate_for_split(config: &SynthConfig, split: &TrialSplit) -> Result<SynthData> {
    config.validate()?;
    let total = config.num_known + config.num_unknown;
    if split.known_class_ids.len() != config.num_known || split.num_classes() != total {
        return Err(Error::InvalidParameter(format!(
            "split has {} known / {} total classes, config has {} / {}",
            split.known_class_ids.len(),
            split.num_classes(),
            config.num_known,
            total
        )));
    }

    let mut center_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let centers = draw_cluster_centers(&mut center_rng, total, config)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1 + split.trial_index as u64);

    let dim = config.input_dim;
    let counts = class_count_profile(config.majority, config.imbalance_ratio, config.num_known);
    let (mut train_x, mut train_y) = (Vec::new(), Vec::new());
    let (mut test_x, mut test_y) = (Vec::new(), Vec::new());
    for (pos, &cid) in split.known_class_ids.iter().enumerate() {
        let label = pos as u32 + 1;
        let n = counts[pos];
        let n_train = train_count(n);
        for s in 0..n {
            let (xs, ys) = if s < n_train {
                (&mut train_x, &mut train_y)
            } else {
                (&mut test_x, &mut test_y)
            };
            push_gaussian(&mut rng, &centers[cid], config.cluster_std, xs);
            ys.push(label);
        }
    }

    let (mut unk_x, mut unk_y) = (Vec::new(), Vec::new());
    for (pos, &cid) in split.unknown_class_ids.iter().enumerate() {
        let label = (config.num_known + pos) as u32 + 1;
        for _ in 0..config.unknown_per_class() {
            push_gaussian(&mut rng, &centers[cid], config.cluster_std, &mut unk_x);
            unk_y.push(label);
        }
    }

    // uniform over the known centers' bounding box, inflated by 3 std
    let pad = 3.0 * config.cluster_std;
    let mut lo = alloc::vec![f64::INFINITY; dim];
    let mut hi = alloc::vec![f64::NEG_INFINITY; dim];
    for &cid in &split.known_class_ids {
        for (k, &v) in centers[cid].iter().enumerate() {
            lo[k] = lo[k].min(v - pad);
            hi[k] = hi[k].max(v + pad);
        }
    }
    let mut bg_x = Vec::with_capacity(config.bg_samples * dim);
    for _ in 0..config.bg_samples {
        for k in 0..dim {
            let u: f64 = rng.random();
            bg_x.push(lo[k] + u * (hi[k] - lo[k]));
        }
    }
    let bg_y = alloc::vec![BACKGROUND_LABEL; config.bg_samples];

    let rows = |x: &Vec<f64>| x.len() / dim;
    Ok(SynthData {
        train: LabeledDataset::new(Role::KnownTrain, Matrix::from_vec(rows(&train_x), dim, train_x)?, train_y)?,
        test_known: LabeledDataset::new(Role::KnownTest, Matrix::from_vec(rows(&test_x), dim, test_x)?, test_y)?,
        test_unknown: LabeledDataset::new(Role::UnknownTest, Matrix::from_vec(rows(&unk_x), dim, unk_x)?, unk_y)?,
        background: LabeledDataset::new(Role::Background, Matrix::from_vec(rows(&bg_x), dim, bg_x)?, bg_y)?,
    })
}
