//! Bipartite-kNN (BP-GEM) baseline training and per-sample outlier scoring.
//!
//! Training randomly splits the nominal data into a scored partition and a
//! reference partition, computes every scored point's total edge length into
//! the reference partition, and keeps the low-length points as the baseline
//! vertex set — an empirical stand-in for the minimum volume set of the
//! nominal distribution. The decision boundary sits at the largest total edge
//! length in the vertex set, which leaves the `tail_count` most outlying
//! training points outside; a fresh sample scores positive evidence exactly
//! when its own total edge length exceeds that boundary.
//!
//! The baseline is frozen after training: scoring never re-selects vertices,
//! so anomalous test data cannot contaminate the reference.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::neighbors::NeighborIndex;
use crate::point::{dataset_dim, Point};
use crate::{Error, Result};

/// Training configuration. `gamma` and `tail_count` have data-dependent
/// defaults resolved when training sees the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GemParams {
    /// Neighbors fetched per query (k).
    pub k: usize,
    /// How many of the trailing neighbors enter the total edge length
    /// (s, with 1 <= s <= k). The sum runs over the (k-s+1)-th..k-th nearest.
    pub s: usize,
    /// Edge-length weighting exponent, 0 < gamma < d.
    /// `None` resolves to 1.0 for d >= 2 and 0.5 for d = 1.
    pub gamma: Option<f64>,
    /// Significance level: target fraction of nominal samples scoring positive.
    pub alpha: f64,
    /// How many of the most outlying training points stay outside the baseline
    /// vertex set; the decision boundary is the largest total edge length left
    /// inside. `None` resolves to round(alpha * n1), clamped to 1..=n1-1.
    pub tail_count: Option<usize>,
    /// Fraction of the training data assigned to the scored partition (N1).
    pub partition_fraction: f64,
    /// Seed for the partition shuffle.
    pub seed: u64,
}

impl Default for GemParams {
    fn default() -> Self {
        Self {
            k: 1,
            s: 1,
            gamma: None,
            alpha: 0.05,
            tail_count: None,
            partition_fraction: 0.1,
            seed: 0,
        }
    }
}

/// `GemParams` after data-dependent defaults are fixed; this is what a trained
/// model carries and what gets persisted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedGemParams {
    pub k: usize,
    pub s: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub tail_count: usize,
    pub partition_fraction: f64,
    pub seed: u64,
}

fn validate_k_s(k: usize, s: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k", "must be at least 1"));
    }
    if s == 0 || s > k {
        return Err(Error::invalid("s", format!("must satisfy 1 <= s <= k (k={k}, s={s})")));
    }
    Ok(())
}

fn validate_gamma(gamma: f64, dim: usize) -> Result<()> {
    if !gamma.is_finite() || gamma <= 0.0 || gamma >= dim as f64 {
        return Err(Error::invalid(
            "gamma",
            format!("must satisfy 0 < gamma < d (gamma={gamma}, d={dim})"),
        ));
    }
    Ok(())
}

impl GemParams {
    fn resolve(&self, dim: usize, n1: usize, n2: usize) -> Result<ResolvedGemParams> {
        validate_k_s(self.k, self.s)?;
        if self.k > n2 {
            return Err(Error::invalid(
                "k",
                format!("needs k <= |reference partition| ({} > {n2})", self.k),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha", "must lie in (0, 1)"));
        }
        let gamma = self
            .gamma
            .unwrap_or(if dim >= 2 { 1.0 } else { 0.5 });
        validate_gamma(gamma, dim)?;
        let tail_count = match self.tail_count {
            Some(t) => {
                if t == 0 || t >= n1 {
                    return Err(Error::invalid(
                        "tail_count",
                        format!("must lie in 1..=n1-1 (tail_count={t}, n1={n1})"),
                    ));
                }
                t
            }
            None => ((self.alpha * n1 as f64).round() as usize).clamp(1, n1 - 1),
        };
        Ok(ResolvedGemParams {
            k: self.k,
            s: self.s,
            gamma,
            alpha: self.alpha,
            tail_count,
            partition_fraction: self.partition_fraction,
            seed: self.seed,
        })
    }
}

/// Sum of the gamma-powered distances from `query` to its (k-s+1)-th through
/// k-th nearest neighbors in `reference`. Any positive weight is accepted
/// here; the 0 < gamma < d constraint applies to trained baselines.
pub fn total_edge_length(
    query: &Point,
    reference: &NeighborIndex,
    k: usize,
    s: usize,
    gamma: f64,
) -> Result<f64> {
    validate_k_s(k, s)?;
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::invalid("gamma", "must be positive and finite"));
    }
    let neighbors = reference.knn(query, k)?;
    Ok(neighbors[k - s..]
        .iter()
        .map(|n| n.distance.powf(gamma))
        .sum())
}

/// Seeded random split of the training data into the scored partition (first)
/// and the reference partition (second). Disjoint cover; reproducible.
pub fn partition_training(
    data: &[Point],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<Point>, Vec<Point>)> {
    dataset_dim(data)?;
    if data.len() < 2 {
        return Err(Error::invalid(
            "data",
            format!("need at least 2 training points, got {}", data.len()),
        ));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("partition_fraction", "must lie in (0, 1)"));
    }
    let n1 = (fraction * data.len() as f64).round() as usize;
    if n1 == 0 || n1 >= data.len() {
        return Err(Error::invalid(
            "partition_fraction",
            format!(
                "fraction {fraction} of {} points leaves an empty partition",
                data.len()
            ),
        ));
    }
    let mut ids: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let scored = ids[..n1].iter().map(|&i| data[i].clone()).collect();
    let reference = ids[n1..].iter().map(|&i| data[i].clone()).collect();
    Ok((scored, reference))
}

/// A trained, frozen BP-GEM baseline.
///
/// Invariants: `baseline_lengths` holds the vertex-set total edge lengths
/// sorted ascending, `threshold_length` equals its last entry, and every
/// excluded (tail) training point had a total edge length at least as large.
/// Ties at the boundary keep earlier training-order points inside.
#[derive(Debug)]
pub struct GemModel {
    reference: NeighborIndex,
    params: ResolvedGemParams,
    baseline_lengths: Vec<f64>,
    threshold_length: f64,
    n1: usize,
}

impl GemModel {
    /// Trains the baseline: partitions `data`, computes each scored point's
    /// total edge length into the reference partition, and keeps everything
    /// except the `tail_count` largest as the vertex set.
    pub fn train(data: &[Point], params: &GemParams) -> Result<Self> {
        let dim = dataset_dim(data)?;
        let (scored, reference_points) =
            partition_training(data, params.partition_fraction, params.seed)?;
        let n1 = scored.len();
        let resolved = params.resolve(dim, n1, reference_points.len())?;
        let reference = NeighborIndex::build(reference_points)?;
        let mut lengths: Vec<(f64, usize)> = Vec::with_capacity(n1);
        for (i, p) in scored.iter().enumerate() {
            lengths.push((
                total_edge_length(p, &reference, resolved.k, resolved.s, resolved.gamma)?,
                i,
            ));
        }
        lengths.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let vertex_count = n1 - resolved.tail_count;
        let baseline_lengths: Vec<f64> =
            lengths[..vertex_count].iter().map(|&(l, _)| l).collect();
        let threshold_length = *baseline_lengths.last().unwrap();
        Ok(Self {
            reference,
            params: resolved,
            baseline_lengths,
            threshold_length,
            n1,
        })
    }

    /// Reassembles a model from persisted parts, revalidating the invariants.
    pub fn from_parts(
        reference_points: Vec<Point>,
        params: ResolvedGemParams,
        baseline_lengths: Vec<f64>,
        threshold_length: f64,
        n1: usize,
    ) -> Result<Self> {
        let dim = dataset_dim(&reference_points)?;
        validate_k_s(params.k, params.s)?;
        validate_gamma(params.gamma, dim)?;
        if params.k > reference_points.len() {
            return Err(Error::invalid("k", "exceeds reference partition size"));
        }
        if params.tail_count == 0 || params.tail_count >= n1 {
            return Err(Error::invalid("tail_count", "must lie in 1..=n1-1"));
        }
        if baseline_lengths.len() != n1 - params.tail_count {
            return Err(Error::invalid(
                "baseline_lengths",
                format!(
                    "expected {} vertex lengths, got {}",
                    n1 - params.tail_count,
                    baseline_lengths.len()
                ),
            ));
        }
        if baseline_lengths.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::NonFinite {
                context: "baseline_lengths".into(),
            });
        }
        if baseline_lengths.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid(
                "baseline_lengths",
                "must be sorted ascending",
            ));
        }
        if *baseline_lengths.last().unwrap() != threshold_length {
            return Err(Error::invalid(
                "threshold_length",
                "must equal the largest baseline length",
            ));
        }
        let reference = NeighborIndex::build(reference_points)?;
        Ok(Self {
            reference,
            params,
            baseline_lengths,
            threshold_length,
            n1,
        })
    }

    /// Outlier evidence for one sample: its total edge length into the
    /// reference partition minus the decision boundary. Negative values are
    /// nominal-looking, positive values outlying. The model is not mutated.
    pub fn outlier_score(&self, x: &Point) -> Result<f64> {
        let length = total_edge_length(
            x,
            &self.reference,
            self.params.k,
            self.params.s,
            self.params.gamma,
        )?;
        Ok(length - self.threshold_length)
    }

    pub fn params(&self) -> &ResolvedGemParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.reference.dim()
    }

    /// (N1, N2): scored and reference partition sizes.
    pub fn training_sizes(&self) -> (usize, usize) {
        (self.n1, self.reference.len())
    }

    /// Vertex-set total edge lengths, sorted ascending.
    pub fn baseline_lengths(&self) -> &[f64] {
        &self.baseline_lengths
    }

    /// The decision boundary: largest total edge length in the vertex set.
    pub fn threshold_length(&self) -> f64 {
        self.threshold_length
    }

    pub fn reference_points(&self) -> &[Point] {
        self.reference.points()
    }
}

/// Hard decision on one sample's outlier evidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Nominal,
    Anomalous,
}

/// Nominal iff the evidence is <= 0 (ties go to nominal).
pub fn outlier_decide(score: f64) -> Verdict {
    if score <= 0.0 {
        Verdict::Nominal
    } else {
        Verdict::Anomalous
    }
}
