//! Nearest-center classification with rejection, and the closed-set /
//! open-set metrics.
//!
//! The open-set score of a feature is `-min_c |f - s_c|^2`: higher means more
//! "known". A sample is rejected as unknown when its score falls below the
//! threshold.

use alloc::format;
use alloc::vec::Vec;

use crate::data::LabeledDataset;
use crate::net::{embed, NetParams};
use crate::{squared_distance, EtfCenters, Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    /// 0-based class index.
    Known(usize),
    Unknown,
}

impl Prediction {
    /// 1-based label, with `C + 1` standing for unknown.
    pub fn label(self, num_classes: usize) -> usize {
        match self {
            Prediction::Known(c) => c + 1,
            Prediction::Unknown => num_classes + 1,
        }
    }
}

/// Nearest center (lowest index on ties) and its negated squared distance.
pub fn nearest_center(feature: &[f64], centers: &EtfCenters) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centers.num_classes() {
        let d = squared_distance(feature, centers.center(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    (best.0, -best.1)
}

fn check_dim(features: &Matrix, centers: &EtfCenters) -> Result<()> {
    if features.cols() != centers.embed_dim() {
        return Err(Error::ShapeMismatch(format!(
            "features have dimension {}, centers have {}",
            features.cols(),
            centers.embed_dim()
        )));
    }
    Ok(())
}

/// `(nearest class, score)` for every row.
pub fn score_features(features: &Matrix, centers: &EtfCenters) -> Result<Vec<(usize, f64)>> {
    check_dim(features, centers)?;
    Ok(features.iter_rows().map(|f| nearest_center(f, centers)).collect())
}

/// Nearest-center label, or [`Prediction::Unknown`] when the score is below
/// `threshold`.
pub fn classify(features: &Matrix, centers: &EtfCenters, threshold: f64) -> Result<Vec<Prediction>> {
    Ok(score_features(features, centers)?
        .into_iter()
        .map(|(c, score)| {
            if score >= threshold {
                Prediction::Known(c)
            } else {
                Prediction::Unknown
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredSample {
    pub predicted: usize,
    pub score: f64,
    /// 0-based true class for known samples, `None` for unknown ones.
    pub true_class: Option<usize>,
}

impl ScoredSample {
    pub fn is_correct(&self) -> bool {
        self.true_class == Some(self.predicted)
    }
}

/// Closed-set accuracy; scores are ignored.
pub fn accuracy(known: &[ScoredSample]) -> Result<f64> {
    if known.is_empty() {
        return Err(Error::Empty("known samples"));
    }
    let correct = known.iter().filter(|s| s.is_correct()).count();
    Ok(correct as f64 / known.len() as f64)
}

fn check_scores(scores: &[f64], what: &'static str) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Empty(what));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParameter(format!("{what} contain NaN")));
    }
    Ok(())
}

fn sorted(scores: &[f64]) -> Vec<f64> {
    let mut v = scores.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Probability that a known score beats an unknown one, ties counting half
/// (the Mann-Whitney U statistic normalised by `n_known * n_unknown`).
pub fn auroc(known_scores: &[f64], unknown_scores: &[f64]) -> Result<f64> {
    check_scores(known_scores, "known scores")?;
    check_scores(unknown_scores, "unknown scores")?;
    let unknown = sorted(unknown_scores);
    // twice the U statistic, kept integral
    let mut twice_u: u128 = 0;
    for &s in known_scores {
        let below = unknown.partition_point(|&u| u < s);
        let not_above = unknown.partition_point(|&u| u <= s);
        twice_u += 2 * below as u128 + (not_above - below) as u128;
    }
    let pairs = known_scores.len() as u128 * unknown_scores.len() as u128;
    Ok(twice_u as f64 / (2 * pairs) as f64)
}

/// One point of the CCR-vs-FPR curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub fpr: f64,
    pub ccr: f64,
}

/// Open-set classification rate: area under the curve of correct
/// classification rate (known samples both accepted and correctly labelled)
/// against false positive rate (unknown samples accepted), over every
/// threshold in the union of observed scores plus `+inf`.
///
/// The curve starts at `(0, 0)` and ends at `(1, ACC)`, with FPR
/// non-decreasing.
pub fn oscr(known: &[ScoredSample], unknown_scores: &[f64]) -> Result<(f64, Vec<CurvePoint>)> {
    if known.is_empty() {
        return Err(Error::Empty("known samples"));
    }
    let known_scores: Vec<f64> = known.iter().map(|s| s.score).collect();
    check_scores(&known_scores, "known scores")?;
    check_scores(unknown_scores, "unknown scores")?;

    // descending sweep; counts are exact integers
    let mut correct: Vec<f64> = known.iter().filter(|s| s.is_correct()).map(|s| s.score).collect();
    correct.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut unknown = unknown_scores.to_vec();
    unknown.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut thresholds: Vec<f64> = known_scores.iter().chain(unknown_scores).copied().collect();
    thresholds.sort_unstable_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let n_known = known.len() as f64;
    let n_unknown = unknown.len() as f64;
    let mut curve = Vec::with_capacity(thresholds.len() + 1);
    curve.push(CurvePoint { fpr: 0.0, ccr: 0.0 });
    let (mut ic, mut iu) = (0, 0);
    for &t in &thresholds {
        while ic < correct.len() && correct[ic] >= t {
            ic += 1;
        }
        while iu < unknown.len() && unknown[iu] >= t {
            iu += 1;
        }
        curve.push(CurvePoint {
            fpr: iu as f64 / n_unknown,
            ccr: ic as f64 / n_known,
        });
    }
    Ok((trapezoid(&curve), curve))
}

/// Trapezoidal area under a curve given in order of non-decreasing FPR.
pub fn trapezoid(curve: &[CurvePoint]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].ccr + w[1].ccr) * 0.5)
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub acc: f64,
    pub auroc: f64,
    pub oscr: f64,
    pub curve: Vec<CurvePoint>,
    pub num_known_test: usize,
    pub num_unknown_test: usize,
}

/// Scores known features (with 1-based labels) and unknown features against
/// the centers and computes every metric.
pub fn evaluate_features(
    known_features: &Matrix,
    known_labels: &[u32],
    unknown_features: &Matrix,
    centers: &EtfCenters,
) -> Result<EvalReport> {
    if unknown_features.rows() == 0 {
        return Err(Error::Empty("unknown test set"));
    }
    if known_features.rows() == 0 {
        return Err(Error::Empty("known test set"));
    }
    if known_labels.len() != known_features.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} known features",
            known_labels.len(),
            known_features.rows()
        )));
    }
    let c = centers.num_classes();
    let mut known = Vec::with_capacity(known_labels.len());
    for ((predicted, score), &label) in score_features(known_features, centers)?.into_iter().zip(known_labels) {
        if label == 0 || label as usize > c {
            return Err(Error::InvalidParameter(format!(
                "known test label {label} is outside 1..={c}"
            )));
        }
        known.push(ScoredSample {
            predicted,
            score,
            true_class: Some(label as usize - 1),
        });
    }
    let unknown: Vec<f64> = score_features(unknown_features, centers)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let known_scores: Vec<f64> = known.iter().map(|s| s.score).collect();
    let (oscr, curve) = oscr(&known, &unknown)?;
    Ok(EvalReport {
        acc: accuracy(&known)?,
        auroc: auroc(&known_scores, &unknown)?,
        oscr,
        curve,
        num_known_test: known.len(),
        num_unknown_test: unknown.len(),
    })
}

/// Embeds both test sets with the trained network and evaluates them.
pub fn evaluate_trial(
    params: &NetParams,
    centers: &EtfCenters,
    test_known: &LabeledDataset,
    test_unknown: &LabeledDataset,
) -> Result<EvalReport> {
    if test_unknown.is_empty() {
        return Err(Error::Empty("unknown test set"));
    }
    if test_known.is_empty() {
        return Err(Error::Empty("known test set"));
    }
    let fk = embed(params, test_known.features())?;
    let fu = embed(params, test_unknown.features())?;
    evaluate_features(&fk, test_known.labels(), &fu, centers)
}

fn order_free_mean(values: impl Iterator<Item = f64>) -> f64 {
    let v = sorted(&values.collect::<Vec<_>>());
    v.iter().sum::<f64>() / v.len() as f64
}

/// Mean ACC / AUROC / OSCR over reports; sample counts are summed and the
/// curve is dropped. Values are summed in sorted order, so the result does
/// not depend on report order.
pub fn average_reports(reports: &[EvalReport]) -> Result<EvalReport> {
    if reports.is_empty() {
        return Err(Error::Empty("reports"));
    }
    Ok(EvalReport {
        acc: order_free_mean(reports.iter().map(|r| r.acc)),
        auroc: order_free_mean(reports.iter().map(|r| r.auroc)),
        oscr: order_free_mean(reports.iter().map(|r| r.oscr)),
        curve: Vec::new(),
        num_known_test: reports.iter().map(|r| r.num_known_test).sum(),
        num_unknown_test: reports.iter().map(|r| r.num_unknown_test).sum(),
    })
}
