//! Scenario generation, threshold calibration, and Monte Carlo evaluation.
//!
//! Streams follow a change-point template: nominal draws from a zero-mean
//! isotropic Gaussian up to (excluding) the change time, then draws from the
//! mixture `(1-eps) f0 + eps * U([0,1]^d)`. Everything is seeded: per-trial
//! seeds derive from a root seed, so full runs reproduce exactly and trials
//! are independent given their seeds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::gem::GemModel;
use crate::likelihood::LikelihoodModel;
use crate::point::Point;
use crate::{Error, Result};

/// Generative description of one nominal/anomalous stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub dim: usize,
    /// Per-axis standard deviation of the nominal Gaussian.
    pub sigma: f64,
    /// Mixture weight of the uniform component after the change.
    pub epsilon: f64,
    /// 1-based index of the first post-change sample.
    pub change_time: u64,
    /// Total stream length.
    pub horizon: u64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(Error::invalid("sigma", "must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon", "must lie in [0, 1]"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon", "must be at least 1"));
        }
        if self.change_time == 0 || self.change_time > self.horizon {
            return Err(Error::invalid(
                "change_time",
                format!(
                    "must lie in 1..=horizon ({} vs horizon {})",
                    self.change_time, self.horizon
                ),
            ));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Seed-derivation purposes; every stream drawn by this module gets its seed
/// from `derive_seed(root, purpose, index)` so runs never share RNG streams.
pub mod purposes {
    /// Pure-nominal calibration streams.
    pub const CALIBRATION: u64 = 1;
    /// Per-trial change streams, shared across detectors within a trial.
    pub const TRIAL: u64 = 2;
    /// Per-trial pure-nominal streams for the time-to-false-alarm column.
    pub const NOMINAL: u64 = 3;
    /// Training data generated for detectors under evaluation.
    pub const TRAINING: u64 = 4;
}

/// SplitMix64-style mix of (root, purpose, index) into a stream seed.
pub fn derive_seed(root: u64, purpose: u64, index: u64) -> u64 {
    let mut z = root
        ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn nominal_point(rng: &mut ChaCha8Rng, dim: usize, normal: &Normal<f64>) -> Result<Point> {
    Point::new((0..dim).map(|_| normal.sample(rng)).collect())
}

/// One mixture draw: a Bernoulli(epsilon) coin, then either a uniform point
/// on [0,1]^d or a nominal point. The coin is always consumed first so the
/// draw order is stable.
fn mixture_point(
    rng: &mut ChaCha8Rng,
    dim: usize,
    epsilon: f64,
    normal: &Normal<f64>,
) -> Result<Point> {
    let coin: f64 = rng.random();
    if coin < epsilon {
        Point::new((0..dim).map(|_| rng.random::<f64>()).collect())
    } else {
        nominal_point(rng, dim, normal)
    }
}

fn normal_dist(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| Error::invalid("sigma", e.to_string()))
}

/// `n` i.i.d. nominal draws, seeded by the scenario.
pub fn gen_nominal(n: usize, scenario: &Scenario) -> Result<Vec<Point>> {
    scenario.validate()?;
    let normal = normal_dist(scenario.sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    (0..n)
        .map(|_| nominal_point(&mut rng, scenario.dim, &normal))
        .collect()
}

/// `n` i.i.d. draws from the post-change mixture.
pub fn gen_anomalous(n: usize, scenario: &Scenario) -> Result<Vec<Point>> {
    scenario.validate()?;
    let normal = normal_dist(scenario.sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    (0..n)
        .map(|_| mixture_point(&mut rng, scenario.dim, scenario.epsilon, &normal))
        .collect()
}

/// A full stream: samples 1..change_time-1 nominal, change_time..horizon from
/// the mixture, all from one seeded generator.
pub fn gen_stream(scenario: &Scenario) -> Result<Vec<Point>> {
    scenario.validate()?;
    let normal = normal_dist(scenario.sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut stream = Vec::with_capacity(scenario.horizon as usize);
    for _ in 1..scenario.change_time {
        stream.push(nominal_point(&mut rng, scenario.dim, &normal)?);
    }
    for _ in scenario.change_time..=scenario.horizon {
        stream.push(mixture_point(
            &mut rng,
            scenario.dim,
            scenario.epsilon,
            &normal,
        )?);
    }
    Ok(stream)
}

/// A detector under evaluation: either the trained nonparametric baseline or
/// a parametric likelihood model. Both reduce a sample to one evidence value
/// that feeds the zero-clipped recursion.
pub enum DetectorKind<'a> {
    Odit(&'a GemModel),
    Cusum(&'a LikelihoodModel),
}

impl DetectorKind<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Self::Odit(model) => model.dim(),
            Self::Cusum(model) => model.dim(),
        }
    }

    pub fn evidence(&self, x: &Point) -> Result<f64> {
        match self {
            Self::Odit(model) => model.outlier_score(x),
            Self::Cusum(model) => model.log_likelihood_ratio(x),
        }
    }
}

/// A named detector plus the threshold grid to sweep.
pub struct DetectorConfig<'a> {
    pub name: String,
    pub kind: DetectorKind<'a>,
    pub thresholds: Vec<f64>,
}

/// Running maximum of the zero-clipped statistic along a stream. Since the
/// statistic at threshold `h` alarms exactly when this path reaches `h`, one
/// pass serves every threshold.
fn running_max_path(kind: &DetectorKind, stream: &[Point]) -> Result<Vec<f64>> {
    let mut acc = 0.0;
    let mut max = 0.0;
    let mut path = Vec::with_capacity(stream.len());
    for x in stream {
        acc = (acc + kind.evidence(x)?).max(0.0);
        if acc > max {
            max = acc;
        }
        path.push(max);
    }
    Ok(path)
}

/// First 1-based time the nondecreasing path reaches `h`.
fn first_crossing(running_max: &[f64], h: f64) -> Option<u64> {
    let idx = running_max.partition_point(|&v| v < h);
    (idx < running_max.len()).then(|| idx as u64 + 1)
}

/// Calibration constraint for the stopping threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CalibrationTarget {
    /// Smallest threshold whose probability of alarming within `window`
    /// nominal samples is at most `alpha`.
    FalseAlarmProb { alpha: f64, window: u64 },
    /// Smallest threshold whose mean alarm time over `window`-sample nominal
    /// streams (censored at the window end) is at least `beta`.
    MeanTimeToFalseAlarm { beta: f64, window: u64 },
}

/// Calibration outcome: the threshold plus the achieved target statistic and
/// its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub achieved: f64,
    pub std_error: f64,
    pub trials: u64,
}

const MIN_THRESHOLD: f64 = 1e-9;
const BISECTION_STEPS: u32 = 90;

/// Monte Carlo threshold calibration over pure-nominal streams.
///
/// The per-stream running-max statistic is computed once; the constraint as a
/// function of the threshold is then exact on this pool, so bisection over
/// the threshold resolves to machine precision and is monotone in the target.
pub fn calibrate_threshold(
    kind: &DetectorKind,
    scenario: &Scenario,
    target: &CalibrationTarget,
    trials: u64,
) -> Result<Calibration> {
    scenario.validate()?;
    if kind.dim() != scenario.dim {
        return Err(Error::DimensionMismatch {
            expected: scenario.dim,
            actual: kind.dim(),
        });
    }
    if trials < 100 {
        return Err(Error::invalid("trials", "need at least 100 trials"));
    }
    let window = match target {
        CalibrationTarget::FalseAlarmProb { alpha, window } => {
            if !(*alpha > 0.0 && *alpha <= 1.0) {
                return Err(Error::invalid("alpha", "must lie in (0, 1]"));
            }
            *window
        }
        CalibrationTarget::MeanTimeToFalseAlarm { beta, window } => {
            if !beta.is_finite() || *beta < 1.0 {
                return Err(Error::invalid("beta", "must be at least 1"));
            }
            *window
        }
    };
    if window == 0 {
        return Err(Error::invalid("window", "must be at least 1"));
    }

    let mut paths = Vec::with_capacity(trials as usize);
    for i in 0..trials {
        let s = scenario.with_seed(derive_seed(scenario.seed, purposes::CALIBRATION, i));
        let stream = gen_nominal(window as usize, &s)?;
        paths.push(running_max_path(kind, &stream)?);
    }

    let hi0 = paths
        .iter()
        .map(|p| *p.last().unwrap())
        .fold(0.0f64, f64::max)
        + 1.0;

    match target {
        CalibrationTarget::FalseAlarmProb { alpha, .. } => {
            let maxima: Vec<f64> = paths.iter().map(|p| *p.last().unwrap()).collect();
            let fa = |h: f64| {
                maxima.iter().filter(|m| **m >= h).count() as f64 / trials as f64
            };
            let report = |h: f64| {
                let p = fa(h);
                Calibration {
                    threshold: h,
                    achieved: p,
                    std_error: (p * (1.0 - p) / trials as f64).sqrt(),
                    trials,
                }
            };
            if fa(MIN_THRESHOLD) <= *alpha {
                return Ok(report(MIN_THRESHOLD));
            }
            let (mut lo, mut hi) = (MIN_THRESHOLD, hi0);
            debug_assert!(fa(hi) <= *alpha);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if fa(mid) <= *alpha {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(report(hi))
        }
        CalibrationTarget::MeanTimeToFalseAlarm { beta, window } => {
            let censored_time = |path: &[f64], h: f64| -> f64 {
                first_crossing(path, h).unwrap_or(*window) as f64
            };
            let stats = |h: f64| -> (f64, f64) {
                let times: Vec<f64> = paths.iter().map(|p| censored_time(p, h)).collect();
                let mean = times.iter().sum::<f64>() / trials as f64;
                let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>()
                    / trials as f64;
                (mean, (var / trials as f64).sqrt())
            };
            let report = |h: f64| {
                let (mean, se) = stats(h);
                Calibration {
                    threshold: h,
                    achieved: mean,
                    std_error: se,
                    trials,
                }
            };
            if stats(MIN_THRESHOLD).0 >= *beta {
                return Ok(report(MIN_THRESHOLD));
            }
            let reachable = stats(hi0).0;
            if reachable < *beta {
                return Err(Error::TargetUnreachable {
                    lo: MIN_THRESHOLD,
                    hi: hi0,
                    reason: format!(
                        "best achievable mean time to false alarm is {reachable} \
                         (window {window}), target {beta}"
                    ),
                });
            }
            let (mut lo, mut hi) = (MIN_THRESHOLD, hi0);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if stats(mid).0 >= *beta {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(report(hi))
        }
    }
}

/// One operating point of a detector at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub threshold: f64,
    /// Fraction of trials alarming before the change time.
    pub false_alarm_prob: f64,
    /// Mean of (T - change_time) over trials alarming at or after the change;
    /// censored trials count at the horizon. 0 when no trial qualifies.
    pub avg_detection_delay: f64,
    pub detection_count: u64,
    pub false_alarm_count: u64,
    /// Trials with no alarm by the horizon (counted at the horizon in the
    /// delay average, reported here so nothing is silently dropped).
    pub censored_count: u64,
    pub trial_count: u64,
    /// Mean alarm time over matched pure-nominal streams, censored at the
    /// horizon.
    pub mean_time_to_false_alarm: f64,
}

/// Operating points for one detector across its threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCurve {
    pub detector: String,
    pub points: Vec<EvalPoint>,
}

/// Monte Carlo sweep producing delay-vs-false-alarm operating points.
///
/// Every trial generates one change stream shared by all detectors (common
/// random numbers) plus one pure-nominal stream for the time-to-false-alarm
/// column. A detector's statistic path is computed once per stream and reused
/// across its whole threshold grid.
pub fn evaluate_add_far(
    detectors: &[DetectorConfig],
    scenario: &Scenario,
    trials: u64,
) -> Result<Vec<EvalCurve>> {
    scenario.validate()?;
    if trials < 100 {
        return Err(Error::invalid("trials", "need at least 100 trials"));
    }
    if detectors.is_empty() {
        return Err(Error::Empty("no detectors to evaluate"));
    }
    for det in detectors {
        if det.thresholds.is_empty() {
            return Err(Error::Empty("detector has an empty threshold grid"));
        }
        if det
            .thresholds
            .iter()
            .any(|h| !h.is_finite() || *h <= 0.0)
        {
            return Err(Error::invalid(
                "thresholds",
                format!("detector `{}` has a non-positive threshold", det.name),
            ));
        }
        if det.kind.dim() != scenario.dim {
            return Err(Error::DimensionMismatch {
                expected: scenario.dim,
                actual: det.kind.dim(),
            });
        }
    }

    let n_det = detectors.len();
    let mut change_paths: Vec<Vec<Vec<f64>>> = (0..n_det).map(|_| Vec::new()).collect();
    let mut nominal_paths: Vec<Vec<Vec<f64>>> = (0..n_det).map(|_| Vec::new()).collect();
    for i in 0..trials {
        let change_stream =
            gen_stream(&scenario.with_seed(derive_seed(scenario.seed, purposes::TRIAL, i)))?;
        let nominal_stream = gen_nominal(
            scenario.horizon as usize,
            &scenario.with_seed(derive_seed(scenario.seed, purposes::NOMINAL, i)),
        )?;
        for (d, det) in detectors.iter().enumerate() {
            change_paths[d].push(running_max_path(&det.kind, &change_stream)?);
            nominal_paths[d].push(running_max_path(&det.kind, &nominal_stream)?);
        }
    }

    let mut curves = Vec::with_capacity(n_det);
    for (d, det) in detectors.iter().enumerate() {
        let mut points = Vec::with_capacity(det.thresholds.len());
        for &h in &det.thresholds {
            let mut false_alarms = 0u64;
            let mut detections = 0u64;
            let mut censored = 0u64;
            let mut delay_sum = 0.0;
            for path in &change_paths[d] {
                match first_crossing(path, h) {
                    Some(t) if t < scenario.change_time => false_alarms += 1,
                    Some(t) => {
                        detections += 1;
                        delay_sum += (t - scenario.change_time) as f64;
                    }
                    None => {
                        censored += 1;
                        delay_sum += (scenario.horizon - scenario.change_time) as f64;
                    }
                }
            }
            let qualifying = detections + censored;
            let avg_detection_delay = if qualifying > 0 {
                delay_sum / qualifying as f64
            } else {
                0.0
            };
            let mtfa_sum: f64 = nominal_paths[d]
                .iter()
                .map(|path| first_crossing(path, h).unwrap_or(scenario.horizon) as f64)
                .sum();
            points.push(EvalPoint {
                threshold: h,
                false_alarm_prob: false_alarms as f64 / trials as f64,
                avg_detection_delay,
                detection_count: detections,
                false_alarm_count: false_alarms,
                censored_count: censored,
                trial_count: trials,
                mean_time_to_false_alarm: mtfa_sum / trials as f64,
            });
        }
        curves.push(EvalCurve {
            detector: det.name.clone(),
            points,
        });
    }
    Ok(curves)
}
