//! Pointwise log-likelihood ratios for the parametric CUSUM baselines.
//!
//! Two model shapes: a zero-mean isotropic Gaussian against the mixture
//! `(1-eps) f0 + eps * U([0,b]^d)` (the clairvoyant baseline uses the true
//! uniform bound, the misspecified one a wrong bound), and a pair of
//! ML-fitted multivariate Gaussians for real-data baselines.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::point::{dataset_dim, Point};
use crate::{Error, Result};

const LN_TWO_PI: f64 = 1.837_877_066_409_345_6;

/// `log(exp(a) + exp(b))` without overflow; both inputs finite.
fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// A multivariate Gaussian with a precomputed Cholesky factor of its
/// covariance, so density evaluation is a triangular solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvGaussian {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    #[serde(skip)]
    lower: Option<DMatrix<f64>>,
    #[serde(skip)]
    log_norm: f64,
}

impl MvGaussian {
    /// Builds from explicit moments. The covariance must be symmetric
    /// positive definite; near-singular fits are an error, not a silent
    /// regularization.
    pub fn from_moments(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 {
            return Err(Error::Empty("mean vector is empty"));
        }
        if covariance.len() != dim || covariance.iter().any(|row| row.len() != dim) {
            return Err(Error::invalid(
                "covariance",
                format!("must be {dim}x{dim} to match the mean"),
            ));
        }
        if mean.iter().any(|v| !v.is_finite())
            || covariance.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite {
                context: "gaussian moments".into(),
            });
        }
        let mat = DMatrix::from_fn(dim, dim, |i, j| covariance[i][j]);
        if (&mat - mat.transpose()).abs().max() > 1e-9 {
            return Err(Error::invalid("covariance", "must be symmetric"));
        }
        let chol = mat.clone().cholesky().ok_or_else(|| {
            Error::SingularCovariance(
                "covariance is singular or not positive definite; regularize it \
                 (e.g. add a small diagonal term) or fit on more varied data"
                    .into(),
            )
        })?;
        let lower = chol.l();
        let log_det: f64 = 2.0 * lower.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let log_norm = -0.5 * (dim as f64 * LN_TWO_PI + log_det);
        Ok(Self {
            mean,
            covariance,
            lower: Some(lower),
            log_norm,
        })
    }

    /// Maximum-likelihood fit: sample mean and covariance divided by N.
    /// Fails when the fitted covariance is singular, which is guaranteed
    /// whenever there are no more samples than dimensions.
    pub fn fit_ml(data: &[Point]) -> Result<Self> {
        let dim = dataset_dim(data)?;
        let n = data.len();
        if n < 2 {
            return Err(Error::invalid(
                "data",
                format!("maximum-likelihood fit needs at least 2 points, got {n}"),
            ));
        }
        let mut mean = vec![0.0; dim];
        for p in data {
            for (m, c) in mean.iter_mut().zip(p.coords()) {
                *m += c;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut covariance = vec![vec![0.0; dim]; dim];
        for p in data {
            let centered: Vec<f64> = p
                .coords()
                .iter()
                .zip(&mean)
                .map(|(c, m)| c - m)
                .collect();
            for i in 0..dim {
                for j in 0..dim {
                    covariance[i][j] += centered[i] * centered[j];
                }
            }
        }
        for row in &mut covariance {
            for v in row.iter_mut() {
                *v /= n as f64;
            }
        }
        Self::from_moments(mean, covariance).map_err(|e| match e {
            Error::SingularCovariance(msg) if n <= dim => Error::SingularCovariance(format!(
                "{msg} (only {n} samples for {dim} dimensions)"
            )),
            other => other,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &[Vec<f64>] {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_pdf(&self, x: &Point) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.dim(),
            });
        }
        let lower = self
            .lower
            .as_ref()
            .expect("MvGaussian constructed without factorization");
        let centered = DVector::from_fn(self.dim(), |i, _| x.coords()[i] - self.mean[i]);
        let z = lower
            .solve_lower_triangular(&centered)
            .expect("Cholesky factor has positive diagonal");
        Ok(self.log_norm - 0.5 * z.norm_squared())
    }
}

/// Log density of a zero-mean isotropic Gaussian with per-axis `sigma`.
fn isotropic_log_pdf(x: &Point, sigma: f64) -> f64 {
    let d = x.dim() as f64;
    let norm_sq: f64 = x.coords().iter().map(|c| c * c).sum();
    -0.5 * d * (LN_TWO_PI + 2.0 * sigma.ln()) - norm_sq / (2.0 * sigma * sigma)
}

/// Pointwise-evaluable pair of densities for log-likelihood ratios.
#[derive(Debug, Clone)]
pub enum LikelihoodModel {
    /// Nominal: zero-mean isotropic Gaussian with per-axis `sigma`.
    /// Alternative: `(1-epsilon) f0 + epsilon * U([0, uniform_bound]^d)`.
    GaussianVsMixture {
        dim: usize,
        sigma: f64,
        epsilon: f64,
        uniform_bound: f64,
    },
    /// Fitted nominal and anomalous Gaussians.
    GaussianVsGaussian {
        nominal: MvGaussian,
        anomalous: MvGaussian,
    },
}

impl LikelihoodModel {
    pub fn gaussian_vs_mixture(
        dim: usize,
        sigma: f64,
        epsilon: f64,
        uniform_bound: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::invalid("sigma", "must be positive and finite"));
        }
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::invalid(
                "epsilon",
                "must lie in [0, 1); at 1 the likelihood ratio is infinite outside the box",
            ));
        }
        if !uniform_bound.is_finite() || uniform_bound <= 0.0 {
            return Err(Error::invalid("uniform_bound", "must be positive and finite"));
        }
        Ok(Self::GaussianVsMixture {
            dim,
            sigma,
            epsilon,
            uniform_bound,
        })
    }

    pub fn gaussian_vs_gaussian(nominal: MvGaussian, anomalous: MvGaussian) -> Result<Self> {
        if nominal.dim() != anomalous.dim() {
            return Err(Error::DimensionMismatch {
                expected: nominal.dim(),
                actual: anomalous.dim(),
            });
        }
        Ok(Self::GaussianVsGaussian { nominal, anomalous })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::GaussianVsMixture { dim, .. } => *dim,
            Self::GaussianVsGaussian { nominal, .. } => nominal.dim(),
        }
    }

    /// `log f1(x) - log f0(x)`. Finite everywhere: the Gaussian nominal
    /// density is strictly positive.
    pub fn log_likelihood_ratio(&self, x: &Point) -> Result<f64> {
        match self {
            Self::GaussianVsMixture {
                dim,
                sigma,
                epsilon,
                uniform_bound,
            } => {
                if x.dim() != *dim {
                    return Err(Error::DimensionMismatch {
                        expected: *dim,
                        actual: x.dim(),
                    });
                }
                if *epsilon == 0.0 {
                    return Ok(0.0);
                }
                let log_keep = (1.0 - epsilon).ln();
                let inside = x
                    .coords()
                    .iter()
                    .all(|c| (0.0..=*uniform_bound).contains(c));
                if !inside {
                    return Ok(log_keep);
                }
                // llr = log((1-eps) + eps * u_b(x) / f0(x)) with u_b = b^-d.
                let log_f0 = isotropic_log_pdf(x, *sigma);
                let log_uniform_term =
                    epsilon.ln() - *dim as f64 * uniform_bound.ln() - log_f0;
                Ok(log_add_exp(log_keep, log_uniform_term))
            }
            Self::GaussianVsGaussian { nominal, anomalous } => {
                Ok(anomalous.log_pdf(x)? - nominal.log_pdf(x)?)
            }
        }
    }
}
