//! Fixed class centers and the class-adaptive margin schedule.
//!
//! Centers are the vertices of a regular simplex inscribed in a sphere of
//! radius `R`, centered at the origin. Any two centers sit at distance
//! `R * sqrt(2C / (C - 1))` and have inner product `-R^2 / (C - 1)`.
//!
//! Margins shrink linearly with class frequency:
//! `m_c = m_min + (m_max - m_min) * (1 - n_c / N)`, so rare classes get
//! margins close to `m_max` and a class holding all the data gets `m_min`.
//! Valid margin ranges satisfy `0 < m_min < m_max < R / sqrt(2)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Matrix, Result};

/// `C` class centers in `R^d`, all at norm `R`, forming a regular simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct EtfCenters {
    radius: f64,
    centers: Matrix,
}

impl EtfCenters {
    pub fn num_classes(&self) -> usize {
        self.centers.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.centers.cols()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center(&self, class: usize) -> &[f64] {
        self.centers.row(class)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.centers
    }

    /// Rebuilds centers from stored values (checkpoints). The values are
    /// taken as-is; call [`EtfCenters::check_geometry`] to validate them.
    pub fn from_parts(radius: f64, centers: Matrix) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if centers.rows() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 centers, got {}",
                centers.rows()
            )));
        }
        Ok(Self { radius, centers })
    }

    /// Largest deviation from the simplex invariants (norms, pairwise
    /// distances, zero centroid), relative to `R`.
    pub fn check_geometry(&self) -> f64 {
        let c = self.num_classes();
        let r = self.radius;
        let target = pairwise_distance_unchecked(c, r);
        let mut worst: f64 = 0.0;
        for i in 0..c {
            let s = self.center(i);
            let norm = libm::sqrt(s.iter().map(|v| v * v).sum::<f64>());
            worst = worst.max((norm - r).abs());
            for j in (i + 1)..c {
                let dist = libm::sqrt(crate::squared_distance(s, self.center(j)));
                worst = worst.max((dist - target).abs());
            }
        }
        for k in 0..self.embed_dim() {
            let sum: f64 = (0..c).map(|i| self.center(i)[k]).sum();
            worst = worst.max(sum.abs());
        }
        worst / r
    }
}

/// Builds the `C` simplex vertices in `R^d` with norm `R`.
///
/// The centered basis directions `e_i - 1/C` are expressed in the Helmert
/// orthonormal basis of the sum-zero hyperplane, which puts them in the first
/// `C - 1` coordinates; the remaining `d - C + 1` coordinates are zero.
pub fn build_centers(num_classes: usize, embed_dim: usize, radius: f64) -> Result<EtfCenters> {
    if num_classes < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive and finite, got {radius}"
        )));
    }
    if embed_dim < num_classes - 1 {
        return Err(Error::DimensionTooSmall {
            embed_dim,
            num_classes,
        });
    }

    let c = num_classes as f64;
    // |e_i - 1/C| = sqrt((C - 1) / C) for every i
    let scale = radius / libm::sqrt((c - 1.0) / c);
    let mut centers = Matrix::zeros(num_classes, embed_dim);
    // Helmert vector k (1-based) is (1, ..., 1, -k, 0, ...) / sqrt(k (k + 1))
    // with k leading ones; its i-th entry is the i-th center's coordinate k - 1.
    for k in 1..num_classes {
        let kf = k as f64;
        let norm = libm::sqrt(kf * (kf + 1.0));
        for i in 0..k {
            centers.row_mut(i)[k - 1] = scale / norm;
        }
        centers.row_mut(k)[k - 1] = -kf * scale / norm;
    }
    Ok(EtfCenters { radius, centers })
}

fn pairwise_distance_unchecked(num_classes: usize, radius: f64) -> f64 {
    let c = num_classes as f64;
    radius * libm::sqrt(2.0 * c / (c - 1.0))
}

/// Distance between any two simplex vertices: `R * sqrt(2C / (C - 1))`.
pub fn pairwise_center_distance(num_classes: usize, radius: f64) -> Result<f64> {
    if num_classes < 2 || !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need num_classes >= 2 and radius > 0, got {num_classes} and {radius}"
        )));
    }
    Ok(pairwise_distance_unchecked(num_classes, radius))
}

/// `R / sqrt(2)`, the upper bound on `m_max`.
pub fn margin_upper_bound(radius: f64) -> f64 {
    radius / core::f64::consts::SQRT_2
}

/// Checks `0 < m_min < m_max < R / sqrt(2)`.
pub fn check_margin_range(m_min: f64, m_max: f64, radius: f64) -> Result<()> {
    let bound = margin_upper_bound(radius);
    let ok = m_min > 0.0 && m_min < m_max && m_max < bound && radius.is_finite();
    if ok {
        Ok(())
    } else {
        Err(Error::MarginConstraint {
            m_min,
            m_max,
            radius,
            bound,
        })
    }
}

/// The affine margin rule evaluated at class frequency `p`.
///
/// Written as `p * m_min + (1 - p) * m_max`, which returns `m_max` at `p = 0`
/// and `m_min` at `p = 1` exactly.
pub fn margin_at(p: f64, m_min: f64, m_max: f64) -> f64 {
    if p >= 1.0 {
        return m_min;
    }
    (p * m_min + (1.0 - p) * m_max).clamp(m_min, m_max)
}

/// Per-class margins plus the counts and range they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginSchedule {
    margins: Vec<f64>,
    m_min: f64,
    m_max: f64,
    class_counts: Vec<u64>,
}

impl MarginSchedule {
    pub fn margin(&self, class: usize) -> f64 {
        self.margins[class]
    }

    pub fn margins(&self) -> &[f64] {
        &self.margins
    }

    pub fn num_classes(&self) -> usize {
        self.margins.len()
    }

    pub fn m_min(&self) -> f64 {
        self.m_min
    }

    pub fn m_max(&self) -> f64 {
        self.m_max
    }

    pub fn class_counts(&self) -> &[u64] {
        &self.class_counts
    }

    /// Same schedule with every margin squared. Used when margins should be
    /// read in linear-distance units against squared distances.
    pub fn squared(&self) -> Self {
        Self {
            margins: self.margins.iter().map(|m| m * m).collect(),
            ..self.clone()
        }
    }

    /// Reassembles a schedule from stored values without re-deriving margins.
    pub fn from_parts(margins: Vec<f64>, m_min: f64, m_max: f64, class_counts: Vec<u64>) -> Result<Self> {
        if margins.is_empty() || margins.len() != class_counts.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} margins for {} class counts",
                margins.len(),
                class_counts.len()
            )));
        }
        if margins.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidParameter("margins must be finite and non-negative".into()));
        }
        Ok(Self {
            margins,
            m_min,
            m_max,
            class_counts,
        })
    }
}

fn check_counts(class_counts: &[u64]) -> Result<u64> {
    if class_counts.is_empty() {
        return Err(Error::InvalidParameter("class counts are empty".into()));
    }
    if let Some(c) = class_counts.iter().position(|&n| n == 0) {
        return Err(Error::InvalidParameter(format!(
            "class {c} has no training samples; every class needs at least one"
        )));
    }
    class_counts
        .iter()
        .try_fold(0u64, |acc, &n| acc.checked_add(n))
        .ok_or_else(|| Error::InvalidParameter("class counts overflow u64".into()))
}

/// Frequency-adaptive margins from training class counts.
pub fn dynamic_margins(class_counts: &[u64], m_min: f64, m_max: f64, radius: f64) -> Result<MarginSchedule> {
    check_margin_range(m_min, m_max, radius)?;
    let total = check_counts(class_counts)? as f64;
    let margins = class_counts
        .iter()
        .map(|&n| margin_at(n as f64 / total, m_min, m_max))
        .collect();
    Ok(MarginSchedule {
        margins,
        m_min,
        m_max,
        class_counts: class_counts.to_vec(),
    })
}

/// One shared margin `(m_min + m_max) / 2` for every class, regardless of counts.
pub fn uniform_margins(class_counts: &[u64], m_min: f64, m_max: f64, radius: f64) -> Result<MarginSchedule> {
    check_margin_range(m_min, m_max, radius)?;
    check_counts(class_counts)?;
    let mid = 0.5 * (m_min + m_max);
    Ok(MarginSchedule {
        margins: vec![mid; class_counts.len()],
        m_min,
        m_max,
        class_counts: class_counts.to_vec(),
    })
}

/// True iff closed balls of radius `m_max` around the centers are pairwise
/// disjoint, i.e. `2 m_max` is below the smallest center distance.
pub fn verify_ball_disjointness(centers: &EtfCenters, m_max: f64) -> bool {
    let c = centers.num_classes();
    let mut min_dist = f64::INFINITY;
    for i in 0..c {
        for j in (i + 1)..c {
            let d = libm::sqrt(crate::squared_distance(centers.center(i), centers.center(j)));
            min_dist = min_dist.min(d);
        }
    }
    2.0 * m_max < min_dist
}
