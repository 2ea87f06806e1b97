//! Open-set classification with fixed simplex-ETF class centers and
//! class-adaptive margins.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs and a seed: center construction, the margin
//! schedule, the three-term margin loss and its gradients, a small MLP
//! embedding network, RMSprop, the training loop, synthetic benchmark
//! generation and the ACC / AUROC / OSCR evaluation suite. File formats, the
//! CLI and the experiment runner live in the `dmdsc` crate.
//!
//! ```
//! use dmdsc_core::etf::{build_centers, dynamic_margins};
//!
//! let centers = build_centers(4, 3, 100.0).unwrap();
//! let margins = dynamic_margins(&[100, 100, 100, 100], 35.0, 65.0, 100.0).unwrap();
//! assert_eq!(centers.num_classes(), 4);
//! assert!((margins.margin(0) - 57.5).abs() < 1e-12);
//! ```
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod etf;
pub mod eval;
pub mod loss;
pub mod matrix;
pub mod net;
pub mod optim;
pub mod train;

pub use error::{Error, Result};
pub use etf::{EtfCenters, MarginSchedule};
pub use matrix::Matrix;

/// Squared Euclidean distance between two equal-length slices.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}
