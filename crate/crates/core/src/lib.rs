//! Streaming nonparametric anomaly detection.
//!
//! The pieces, bottom up:
//!
//! - [`neighbors`]: exact Euclidean k-nearest-neighbor queries into a fixed
//!   reference set, with a kd-tree and a brute-force scan that must agree
//!   exactly.
//! - [`gem`]: a bipartite-kNN baseline (BP-GEM) trained on nominal data. Each
//!   new sample gets an outlier-evidence score: its total edge length into the
//!   reference partition minus the baseline's decision boundary. Negative
//!   means nominal-looking, positive means outlying.
//! - [`detectors`]: sequential stopping rules. ODIT accumulates the outlier
//!   evidence through a zero-clipped recursion and alarms at a threshold;
//!   the same recursion with log-likelihood ratios is the classic CUSUM.
//!   Batch CUSUM and the discrepancy (maximum window sum) statistic are
//!   provided as crossing-equivalent formulations.
//! - [`likelihood`]: pointwise log-likelihood ratios for the parametric
//!   baselines (clairvoyant and misspecified mixture models, Gaussian ML fits).
//! - [`simlab`]: seeded scenario generation, threshold calibration, and Monte
//!   Carlo evaluation producing average-detection-delay vs false-alarm curves.

#![forbid(unsafe_code)]

pub mod detectors;
pub mod error;
pub mod gem;
pub mod likelihood;
pub mod neighbors;
pub mod point;
pub mod simlab;

pub use error::Error;
pub use point::Point;

pub type Result<T> = std::result::Result<T, Error>;
