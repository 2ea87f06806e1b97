//! Intra-class, inter-class and background margin losses with analytic
//! gradients with respect to the features.
//!
//! With `f_i` a known feature of class `y_i`, `g_k` a background feature,
//! `s_c` the fixed centers and `m_c` the class margins:
//!
//! * intra: `(1/B) sum_i |f_i - s_{y_i}|^2`
//! * inter: `(1/B) sum_i sum_{c != y_i} [m_{y_i} + |f_i - s_{y_i}|^2 - |f_i - s_c|^2]_+`
//! * bg: `(1/(B_k B_b)) sum_i sum_k [m_{y_i} + |f_i - s_{y_i}|^2 - |g_k - s_{y_i}|^2]_+`
//!
//! Hinges are active only when their argument is strictly positive. All sums
//! run in ascending `(i, c)` / `(i, k)` order.

use alloc::format;

use crate::{squared_distance, EtfCenters, Error, MarginSchedule, Matrix, Result};

/// Features of one minibatch, tagged by role: known batches carry class
/// indices (0-based), background batches do not.
#[derive(Debug, Clone, Copy)]
pub struct FeatureBatch<'a> {
    features: &'a Matrix,
    labels: Option<&'a [usize]>,
}

impl<'a> FeatureBatch<'a> {
    pub fn known(features: &'a Matrix, labels: &'a [usize]) -> Self {
        Self {
            features,
            labels: Some(labels),
        }
    }

    pub fn background(features: &'a Matrix) -> Self {
        Self {
            features,
            labels: None,
        }
    }

    pub fn features(&self) -> &'a Matrix {
        self.features
    }

    pub fn labels(&self) -> Option<&'a [usize]> {
        self.labels
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn is_background(&self) -> bool {
        self.labels.is_none()
    }

    fn check_known(&self, centers: &EtfCenters) -> Result<&'a [usize]> {
        let labels = self
            .labels
            .ok_or_else(|| Error::InvalidBatch("expected a known batch, got background".into()))?;
        if self.is_empty() {
            return Err(Error::Empty("known batch"));
        }
        if labels.len() != self.features.rows() {
            return Err(Error::InvalidBatch(format!(
                "{} labels for {} feature rows",
                labels.len(),
                self.features.rows()
            )));
        }
        check_dim(self.features, centers)?;
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= centers.num_classes()) {
            return Err(Error::InvalidBatch(format!(
                "sample {i} has class index {y}, but there are only {} classes",
                centers.num_classes()
            )));
        }
        Ok(labels)
    }
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

fn check_schedule(centers: &EtfCenters, margins: &MarginSchedule) -> Result<()> {
    if centers.num_classes() != margins.num_classes() {
        return Err(Error::ShapeMismatch(format!(
            "{} centers but {} class margins",
            centers.num_classes(),
            margins.num_classes()
        )));
    }
    Ok(())
}

/// A loss value with its gradient for each feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Matrix,
    /// Number of hinge terms with a strictly positive argument.
    pub active_pairs: usize,
}

pub fn intra_loss(batch: &FeatureBatch<'_>, centers: &EtfCenters) -> Result<LossGrad> {
    let labels = batch.check_known(centers)?;
    let f = batch.features;
    let b = f.rows() as f64;
    let mut grad = Matrix::zeros(f.rows(), f.cols());
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let s = centers.center(y);
        let row = f.row(i);
        loss += squared_distance(row, s);
        for ((g, x), c) in grad.row_mut(i).iter_mut().zip(row).zip(s) {
            *g = 2.0 / b * (x - c);
        }
    }
    Ok(LossGrad {
        loss: loss / b,
        grad,
        active_pairs: 0,
    })
}

pub fn inter_loss(batch: &FeatureBatch<'_>, centers: &EtfCenters, margins: &MarginSchedule) -> Result<LossGrad> {
    let labels = batch.check_known(centers)?;
    check_schedule(centers, margins)?;
    let f = batch.features;
    let b = f.rows() as f64;
    let mut grad = Matrix::zeros(f.rows(), f.cols());
    let mut loss = 0.0;
    let mut active = 0;
    for (i, &y) in labels.iter().enumerate() {
        let row = f.row(i);
        let own = centers.center(y);
        let own_sq = squared_distance(row, own);
        let margin = margins.margin(y);
        for c in (0..centers.num_classes()).filter(|&c| c != y) {
            let rival = centers.center(c);
            let hinge = margin + own_sq - squared_distance(row, rival);
            if hinge > 0.0 {
                loss += hinge;
                active += 1;
                // d/df (|f - s_y|^2 - |f - s_c|^2) = 2 (s_c - s_y)
                for ((g, r), o) in grad.row_mut(i).iter_mut().zip(rival).zip(own) {
                    *g += 2.0 / b * (r - o);
                }
            }
        }
    }
    Ok(LossGrad {
        loss: loss / b,
        grad,
        active_pairs: active,
    })
}

/// Background loss gradients for both feature sets.
#[derive(Debug, Clone, PartialEq)]
pub struct BgLossGrad {
    pub loss: f64,
    pub grad_known: Matrix,
    pub grad_bg: Matrix,
    pub active_pairs: usize,
}

pub fn bg_loss(
    known: &FeatureBatch<'_>,
    background: &FeatureBatch<'_>,
    centers: &EtfCenters,
    margins: &MarginSchedule,
) -> Result<BgLossGrad> {
    let labels = known.check_known(centers)?;
    check_schedule(centers, margins)?;
    if !background.is_background() {
        return Err(Error::InvalidBatch("expected a background batch, got a labelled one".into()));
    }
    if background.is_empty() {
        return Err(Error::Empty("background batch"));
    }
    check_dim(background.features, centers)?;

    let f = known.features;
    let g = background.features;
    let scale = 2.0 / (f.rows() as f64 * g.rows() as f64);
    let mut grad_known = Matrix::zeros(f.rows(), f.cols());
    let mut grad_bg = Matrix::zeros(g.rows(), g.cols());
    let mut loss = 0.0;
    let mut active = 0;
    for (i, &y) in labels.iter().enumerate() {
        let row = f.row(i);
        let s = centers.center(y);
        let base = margins.margin(y) + squared_distance(row, s);
        let mut hits = 0usize;
        for k in 0..g.rows() {
            let bg = g.row(k);
            let hinge = base - squared_distance(bg, s);
            if hinge > 0.0 {
                loss += hinge;
                hits += 1;
                // pushing g_k away from s_y lowers the loss
                for ((gb, x), c) in grad_bg.row_mut(k).iter_mut().zip(bg).zip(s) {
                    *gb -= scale * (x - c);
                }
            }
        }
        if hits > 0 {
            let n = hits as f64;
            for ((gk, x), c) in grad_known.row_mut(i).iter_mut().zip(row).zip(s) {
                *gk = n * scale * (x - c);
            }
        }
        active += hits;
    }
    Ok(BgLossGrad {
        loss: loss * 0.5 * scale,
        grad_known,
        grad_bg,
        active_pairs: active,
    })
}

/// Per-term values of the weighted objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub intra: f64,
    pub inter: f64,
    pub bg: f64,
    pub total: f64,
    pub active_inter_pairs: usize,
    pub active_bg_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalGrads {
    pub known: Matrix,
    /// Present when the background term was evaluated.
    pub background: Option<Matrix>,
}

/// `intra + lambda_inter * inter + lambda_bg * bg`.
///
/// A term whose weight is zero is not evaluated at all: it reports `0.0` and
/// leaves the gradients untouched, so `(0, 0)` reproduces [`intra_loss`]
/// bit for bit.
pub fn total_loss(
    known: &FeatureBatch<'_>,
    background: Option<&FeatureBatch<'_>>,
    centers: &EtfCenters,
    margins: &MarginSchedule,
    lambda_inter: f64,
    lambda_bg: f64,
) -> Result<(LossBreakdown, TotalGrads)> {
    if !(lambda_inter >= 0.0) || !(lambda_bg >= 0.0) || !lambda_inter.is_finite() || !lambda_bg.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "loss weights must be finite and >= 0, got lambda_inter = {lambda_inter}, lambda_bg = {lambda_bg}"
        )));
    }
    let intra = intra_loss(known, centers)?;
    let mut out = LossBreakdown {
        intra: intra.loss,
        ..LossBreakdown::default()
    };
    let mut grad = intra.grad;
    let mut grad_bg = None;

    if lambda_inter > 0.0 {
        let inter = inter_loss(known, centers, margins)?;
        out.inter = inter.loss;
        out.active_inter_pairs = inter.active_pairs;
        axpy(grad.as_mut_slice(), lambda_inter, inter.grad.as_slice());
    }
    if lambda_bg > 0.0 {
        let bg_batch = background.ok_or(Error::MissingBackground)?;
        let bg = bg_loss(known, bg_batch, centers, margins)?;
        out.bg = bg.loss;
        out.active_bg_pairs = bg.active_pairs;
        axpy(grad.as_mut_slice(), lambda_bg, bg.grad_known.as_slice());
        let mut gb = bg.grad_bg;
        gb.as_mut_slice().iter_mut().for_each(|v| *v *= lambda_bg);
        grad_bg = Some(gb);
    }
    out.total = out.intra + lambda_inter * out.inter + lambda_bg * out.bg;
    Ok((
        out,
        TotalGrads {
            known: grad,
            background: grad_bg,
        },
    ))
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::etf::{build_centers, dynamic_margins};
    use alloc::vec;
    use alloc::vec::Vec;

    fn setup() -> (EtfCenters, MarginSchedule) {
        let centers = build_centers(4, 3, 100.0).unwrap();
        let margins = dynamic_margins(&[10, 20, 30, 40], 35.0, 65.0, 100.0).unwrap();
        (centers, margins)
    }

    #[test]
    fn features_on_centers_give_zero_intra() {
        let (centers, _) = setup();
        let labels = vec![0, 1, 2, 3, 1];
        let rows: Vec<Vec<f64>> = labels.iter().map(|&y| centers.center(y).to_vec()).collect();
        let f = Matrix::from_rows(&rows).unwrap();
        let out = intra_loss(&FeatureBatch::known(&f, &labels), &centers).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.grad.as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_sample_intra_is_squared_offset() {
        let (centers, _) = setup();
        let mut row = centers.center(2).to_vec();
        row[1] += 3.0;
        let f = Matrix::from_rows(&[row]).unwrap();
        let out = intra_loss(&FeatureBatch::known(&f, &[2]), &centers).unwrap();
        assert!((out.loss - 9.0).abs() < 1e-9);
    }

    #[test]
    fn collapsed_features_have_no_inter_loss() {
        let (centers, margins) = setup();
        let labels = vec![0, 1, 2, 3];
        let rows: Vec<Vec<f64>> = labels.iter().map(|&y| centers.center(y).to_vec()).collect();
        let f = Matrix::from_rows(&rows).unwrap();
        let out = inter_loss(&FeatureBatch::known(&f, &labels), &centers, &margins).unwrap();
        assert_eq!(out.loss, 0.0);
        assert_eq!(out.active_pairs, 0);
        // hinge argument is m - d^2 with d^2 = 2 R^2 C / (C - 1)
        assert!(65.0 - 2.0 * 1e4 * 4.0 / 3.0 < 0.0);
    }

    #[test]
    fn midpoint_feature_contributes_its_margin() {
        let (centers, margins) = setup();
        let mid: Vec<f64> = centers
            .center(0)
            .iter()
            .zip(centers.center(1))
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let f = Matrix::from_rows(&[mid]).unwrap();
        let out = inter_loss(&FeatureBatch::known(&f, &[0]), &centers, &margins).unwrap();
        // only the pair with class 1 is active; the others are far more distant
        assert_eq!(out.active_pairs, 1);
        assert!((out.loss - margins.margin(0)).abs() < 1e-9);
    }

    #[test]
    fn bg_far_away_is_inactive() {
        let (centers, margins) = setup();
        let labels = vec![0, 1];
        let f = Matrix::from_rows(&[centers.center(0).to_vec(), centers.center(1).to_vec()]).unwrap();
        let g = Matrix::from_rows(&[vec![500.0, 500.0, 500.0]]).unwrap();
        let out = bg_loss(&FeatureBatch::known(&f, &labels), &FeatureBatch::background(&g), &centers, &margins).unwrap();
        assert_eq!(out.loss, 0.0);
        assert_eq!(out.active_pairs, 0);
    }

    #[test]
    fn bg_on_center_contributes_margin() {
        let (centers, margins) = setup();
        let f = Matrix::from_rows(&[centers.center(2).to_vec(), vec![900.0, 0.0, 0.0]]).unwrap();
        let g = Matrix::from_rows(&[centers.center(2).to_vec(), vec![-900.0, 0.0, 0.0]]).unwrap();
        // second known sample sits far from its center so its own distance
        // dominates and every pair involving it is active; use only row 0
        let f0 = f.select_rows(&[0]);
        let out = bg_loss(&FeatureBatch::known(&f0, &[2]), &FeatureBatch::background(&g), &centers, &margins).unwrap();
        assert_eq!(out.active_pairs, 1);
        assert!((out.loss - margins.margin(2) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn role_and_range_errors() {
        let (centers, margins) = setup();
        let f = Matrix::zeros(2, 3);
        let bg = FeatureBatch::background(&f);
        assert!(matches!(intra_loss(&bg, &centers), Err(Error::InvalidBatch(_))));
        let bad = FeatureBatch::known(&f, &[0, 4]);
        assert!(matches!(intra_loss(&bad, &centers), Err(Error::InvalidBatch(_))));
        let ok = FeatureBatch::known(&f, &[0, 1]);
        assert!(matches!(bg_loss(&ok, &ok, &centers, &margins), Err(Error::InvalidBatch(_))));
        let empty = Matrix::zeros(0, 3);
        assert!(matches!(
            bg_loss(&ok, &FeatureBatch::background(&empty), &centers, &margins),
            Err(Error::Empty(_))
        ));
        let wrong = dynamic_margins(&[1, 1, 1], 35.0, 55.0, 100.0).unwrap();
        assert!(matches!(inter_loss(&ok, &centers, &wrong), Err(Error::ShapeMismatch(_))));
        assert!(matches!(
            total_loss(&ok, None, &centers, &margins, 0.1, 0.1),
            Err(Error::MissingBackground)
        ));
    }

    #[test]
    fn zero_weights_reduce_to_intra() {
        let (centers, margins) = setup();
        let f = Matrix::from_rows(&[vec![1.0, -2.0, 3.0], vec![40.0, 5.0, -6.0]]).unwrap();
        let labels = [1, 3];
        let batch = FeatureBatch::known(&f, &labels);
        let intra = intra_loss(&batch, &centers).unwrap();
        let (br, grads) = total_loss(&batch, None, &centers, &margins, 0.0, 0.0).unwrap();
        assert_eq!(br.total.to_bits(), intra.loss.to_bits());
        assert_eq!(br.inter, 0.0);
        assert_eq!(br.bg, 0.0);
        let a: Vec<u64> = grads.known.as_slice().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = intra.grad.as_slice().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }
}
