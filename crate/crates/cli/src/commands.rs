//! Command implementations. Each one takes resolved configuration plus
//! command-specific arguments, writes data rows to the given writer, and
//! returns a machine-readable summary where the command has one. Diagnostics
//! never go through these writers; the binary routes them to stderr.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use odit::detectors::SequentialDetector;
use odit::gem::GemModel;
use odit::likelihood::LikelihoodModel;
use odit::simlab::{
    calibrate_threshold, derive_seed, evaluate_add_far, gen_nominal, gen_stream, purposes,
    Calibration, CalibrationTarget, DetectorConfig, DetectorKind, EvalCurve, Scenario,
};
use serde::Serialize;

use crate::archive;
use crate::config::{default_uniform_bound, DetectorSettings, ResolvedConfig};
use crate::csvio::{fmt_f64, format_point_row, PointRows};
use crate::error::{CliError, CliResult};

fn write_line(w: &mut dyn Write, line: &str) -> CliResult<()> {
    writeln!(w, "{line}").map_err(|e| CliError::Data(format!("write failed: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string(value).map_err(|e| CliError::Data(format!("serialize failed: {e}")))
}

#[derive(Serialize)]
pub struct TrainSummary {
    pub command: &'static str,
    pub model: String,
    pub dim: usize,
    pub n1: usize,
    pub n2: usize,
    pub tail_count: usize,
    pub threshold_length: f64,
    pub source_digest: String,
}

/// `train`: nominal CSV in, model archive out.
pub fn train(
    cfg: &ResolvedConfig,
    data_path: &Path,
    out_path: &Path,
    has_header: bool,
) -> CliResult<String> {
    let bytes = std::fs::read(data_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", data_path.display())))?;
    let source_digest = archive::sha256_hex(&bytes);
    let points = crate::csvio::load_csv(bytes.as_slice(), has_header)
        .map_err(|e| CliError::Data(format!("{}: {e}", data_path.display())))?;
    let model = GemModel::train(&points, &cfg.gem)?;
    archive::save_model(&model, out_path, Some(source_digest.clone()))?;
    let (n1, n2) = model.training_sizes();
    to_json(&TrainSummary {
        command: "train",
        model: out_path.display().to_string(),
        dim: model.dim(),
        n1,
        n2,
        tail_count: model.params().tail_count,
        threshold_length: model.threshold_length(),
        source_digest,
    })
}

/// `score`: one evidence value per data row, streamed.
pub fn score(
    model: &GemModel,
    input: impl BufRead,
    has_header: bool,
    w: &mut dyn Write,
) -> CliResult<u64> {
    write_line(w, "t,score")?;
    let mut t = 0u64;
    for row in PointRows::new(input, has_header) {
        let point = row?;
        t += 1;
        let evidence = model.outlier_score(&point)?;
        write_line(w, &format!("{t},{}", fmt_f64(evidence)))?;
    }
    Ok(t)
}

pub struct DetectOutcome {
    pub rows: u64,
    pub alarm_at: Option<u64>,
    pub final_statistic: f64,
}

/// `detect`: streaming detection, row at a time, stopping at the first alarm.
/// Memory stays O(model) regardless of stream length.
pub fn detect(
    model: &GemModel,
    input: impl BufRead,
    has_header: bool,
    threshold: f64,
    w: &mut dyn Write,
) -> CliResult<DetectOutcome> {
    let mut detector = SequentialDetector::new(threshold)?;
    write_line(w, "t,statistic,alarm")?;
    for row in PointRows::new(input, has_header) {
        let point = row?;
        let evidence = model.outlier_score(&point)?;
        let alarm = detector.update(evidence)?;
        write_line(
            w,
            &format!(
                "{},{},{}",
                detector.time(),
                fmt_f64(detector.statistic()),
                u8::from(alarm)
            ),
        )?;
        if alarm {
            break;
        }
    }
    Ok(DetectOutcome {
        rows: detector.time(),
        alarm_at: detector.stopped_at(),
        final_statistic: detector.statistic(),
    })
}

/// `simulate`: writes the scenario's stream as CSV rows (no header).
pub fn simulate(cfg: &ResolvedConfig, w: &mut dyn Write) -> CliResult<u64> {
    let stream = gen_stream(&cfg.scenario)?;
    for point in &stream {
        write_line(w, &format_point_row(point))?;
    }
    Ok(stream.len() as u64)
}

/// Trains the nonparametric detector on generated nominal data; used by
/// `calibrate`/`evaluate` when no pre-trained model is supplied.
pub fn train_from_scenario(cfg: &ResolvedConfig) -> CliResult<GemModel> {
    let train_scenario = cfg
        .scenario
        .with_seed(derive_seed(cfg.seed, purposes::TRAINING, 0));
    let data = gen_nominal(cfg.train_size, &train_scenario)?;
    Ok(GemModel::train(&data, &cfg.gem)?)
}

fn mixture_model(cfg: &ResolvedConfig, name: &str) -> CliResult<LikelihoodModel> {
    let bound = cfg
        .detectors
        .iter()
        .find(|d| d.name == name)
        .map(|d| d.uniform_bound)
        .unwrap_or_else(|| default_uniform_bound(name));
    Ok(LikelihoodModel::gaussian_vs_mixture(
        cfg.scenario.dim,
        cfg.scenario.sigma,
        cfg.scenario.epsilon,
        bound,
    )?)
}

#[derive(Serialize)]
pub struct CalibrateSummary {
    pub command: &'static str,
    pub detector: String,
    pub target: &'static str,
    pub target_value: f64,
    pub window: u64,
    pub trials: u64,
    pub threshold: f64,
    pub achieved: f64,
    pub std_error: f64,
    pub seed: u64,
}

/// `calibrate`: Monte Carlo threshold selection against a false-alarm target.
pub fn calibrate(
    cfg: &ResolvedConfig,
    detector: &str,
    model: Option<&GemModel>,
    target: &CalibrationTarget,
) -> CliResult<String> {
    let owned_gem;
    let owned_like;
    let kind = match detector {
        "odit" => {
            let m = match model {
                Some(m) => m,
                None => {
                    owned_gem = train_from_scenario(cfg)?;
                    &owned_gem
                }
            };
            DetectorKind::Odit(m)
        }
        "cusum" | "gcusum" => {
            owned_like = mixture_model(cfg, detector)?;
            DetectorKind::Cusum(&owned_like)
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown detector `{other}` (known: odit, cusum, gcusum)"
            )))
        }
    };
    let cal: Calibration = calibrate_threshold(&kind, &cfg.scenario, target, cfg.trials)?;
    let (target_name, target_value, window) = match target {
        CalibrationTarget::FalseAlarmProb { alpha, window } => {
            ("false_alarm_prob", *alpha, *window)
        }
        CalibrationTarget::MeanTimeToFalseAlarm { beta, window } => {
            ("mean_time_to_false_alarm", *beta, *window)
        }
    };
    to_json(&CalibrateSummary {
        command: "calibrate",
        detector: detector.to_string(),
        target: target_name,
        target_value,
        window,
        trials: cal.trials,
        threshold: cal.threshold,
        achieved: cal.achieved,
        std_error: cal.std_error,
        seed: cfg.seed,
    })
}

#[derive(Serialize)]
pub struct EvaluateSummary<'a> {
    pub command: &'static str,
    pub out: String,
    pub seed: u64,
    pub trials: u64,
    pub train_size: usize,
    pub config_digest: String,
    pub scenario: &'a Scenario,
    pub detectors: &'a [DetectorSettings],
}

/// Writes one curve CSV: `detector,h,far,add,censored,trials`.
pub fn write_curves(curves: &[EvalCurve], w: &mut dyn Write) -> CliResult<()> {
    write_line(w, "detector,h,far,add,censored,trials")?;
    for curve in curves {
        for p in &curve.points {
            write_line(
                w,
                &format!(
                    "{},{},{},{},{},{}",
                    curve.detector,
                    fmt_f64(p.threshold),
                    fmt_f64(p.false_alarm_prob),
                    fmt_f64(p.avg_detection_delay),
                    p.censored_count,
                    p.trial_count
                ),
            )?;
        }
    }
    Ok(())
}

/// `evaluate`: the full sweep. Trains the nonparametric detector on generated
/// nominal data, builds the parametric baselines, runs the common-random-
/// numbers Monte Carlo, and writes the curve CSV; returns the run metadata
/// record.
pub fn evaluate(cfg: &ResolvedConfig, out_path: &Path) -> CliResult<String> {
    if cfg.detectors.is_empty() {
        return Err(CliError::Usage(
            "evaluate needs at least one [detectors.<name>] section with a threshold grid"
                .into(),
        ));
    }
    for det in &cfg.detectors {
        if det.thresholds.is_empty() {
            return Err(CliError::Usage(format!(
                "detector `{}` has an empty threshold grid",
                det.name
            )));
        }
    }
    let gem_model = if cfg.detectors.iter().any(|d| d.name == "odit") {
        Some(train_from_scenario(cfg)?)
    } else {
        None
    };
    let mut likelihoods: BTreeMap<String, LikelihoodModel> = BTreeMap::new();
    for det in &cfg.detectors {
        if det.name != "odit" {
            likelihoods.insert(det.name.clone(), mixture_model(cfg, &det.name)?);
        }
    }
    let detector_configs: Vec<DetectorConfig> = cfg
        .detectors
        .iter()
        .map(|d| DetectorConfig {
            name: d.name.clone(),
            kind: if d.name == "odit" {
                DetectorKind::Odit(gem_model.as_ref().expect("trained above"))
            } else {
                DetectorKind::Cusum(&likelihoods[&d.name])
            },
            thresholds: d.thresholds.clone(),
        })
        .collect();

    let curves = evaluate_add_far(&detector_configs, &cfg.scenario, cfg.trials)?;

    let file = std::fs::File::create(out_path)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    write_curves(&curves, &mut w)?;
    w.flush()
        .map_err(|e| CliError::Data(format!("write failed: {e}")))?;

    to_json(&EvaluateSummary {
        command: "evaluate",
        out: out_path.display().to_string(),
        seed: cfg.seed,
        trials: cfg.trials,
        train_size: cfg.train_size,
        config_digest: cfg.digest(),
        scenario: &cfg.scenario,
        detectors: &cfg.detectors,
    })
}
