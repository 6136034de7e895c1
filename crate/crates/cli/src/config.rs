//! Run configuration: a TOML key-value file plus command-line overrides,
//! validated as a whole so a broken config produces one aggregated report
//! instead of a trickle of errors.

use std::collections::BTreeMap;
use std::path::Path;

use odit::gem::GemParams;
use odit::simlab::Scenario;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Raw `[gem]` section; every field optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GemSection {
    pub k: Option<usize>,
    pub s: Option<usize>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub tail_count: Option<usize>,
    pub partition_fraction: Option<f64>,
}

/// Raw `[scenario]` section.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub dim: Option<usize>,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub change_time: Option<u64>,
    pub horizon: Option<u64>,
}

/// Raw `[run]` section.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub train_size: Option<usize>,
}

/// Raw `[detectors.<name>]` section.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub thresholds: Option<Vec<f64>>,
    pub uniform_bound: Option<f64>,
}

/// Whole config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub gem: Option<GemSection>,
    pub scenario: Option<ScenarioSection>,
    pub run: Option<RunSection>,
    pub detectors: Option<BTreeMap<String, DetectorSection>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config file {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))
    }
}

/// Command-line overrides; any field present wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub train_size: Option<usize>,
    pub k: Option<usize>,
    pub s: Option<usize>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub tail_count: Option<usize>,
    pub partition_fraction: Option<f64>,
    pub dim: Option<usize>,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub change_time: Option<u64>,
    pub horizon: Option<u64>,
}

/// One detector entry for `calibrate`/`evaluate`: name decides the kind
/// (`odit`, `cusum`, or `gcusum`).
#[derive(Debug, Clone, Serialize)]
pub struct DetectorSettings {
    pub name: String,
    pub thresholds: Vec<f64>,
    /// Upper bound of the uniform component assumed by a parametric detector.
    /// Ignored for `odit`.
    pub uniform_bound: f64,
}

/// Fully resolved configuration. One root seed drives everything: the
/// scenario, the partition shuffle, and all derived per-trial streams.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub seed: u64,
    pub trials: u64,
    pub train_size: usize,
    pub gem: GemParams,
    pub scenario: Scenario,
    pub detectors: Vec<DetectorSettings>,
}

pub const KNOWN_DETECTORS: [&str; 3] = ["odit", "cusum", "gcusum"];

pub fn default_uniform_bound(name: &str) -> f64 {
    if name == "gcusum" {
        0.9
    } else {
        1.0
    }
}

/// Merges file + overrides + defaults and validates every field, reporting
/// all problems at once.
pub fn resolve(file: &FileConfig, over: &Overrides) -> CliResult<ResolvedConfig> {
    let gem_s = file.gem.clone().unwrap_or_default();
    let sc_s = file.scenario.clone().unwrap_or_default();
    let run_s = file.run.clone().unwrap_or_default();

    let seed = over.seed.or(run_s.seed).unwrap_or(0);
    let trials = over.trials.or(run_s.trials).unwrap_or(200);
    let train_size = over.train_size.or(run_s.train_size).unwrap_or(2000);

    let defaults = GemParams::default();
    let gem = GemParams {
        k: over.k.or(gem_s.k).unwrap_or(defaults.k),
        s: over.s.or(gem_s.s).unwrap_or(defaults.s),
        gamma: over.gamma.or(gem_s.gamma),
        alpha: over.alpha.or(gem_s.alpha).unwrap_or(defaults.alpha),
        tail_count: over.tail_count.or(gem_s.tail_count),
        partition_fraction: over
            .partition_fraction
            .or(gem_s.partition_fraction)
            .unwrap_or(defaults.partition_fraction),
        seed,
    };
    let scenario = Scenario {
        dim: over.dim.or(sc_s.dim).unwrap_or(2),
        sigma: over.sigma.or(sc_s.sigma).unwrap_or(0.1),
        epsilon: over.epsilon.or(sc_s.epsilon).unwrap_or(0.2),
        change_time: over.change_time.or(sc_s.change_time).unwrap_or(100),
        horizon: over.horizon.or(sc_s.horizon).unwrap_or(500),
        seed,
    };

    let mut detectors = Vec::new();
    if let Some(map) = &file.detectors {
        for (name, section) in map {
            detectors.push(DetectorSettings {
                name: name.clone(),
                thresholds: section.thresholds.clone().unwrap_or_default(),
                uniform_bound: section
                    .uniform_bound
                    .unwrap_or_else(|| default_uniform_bound(name)),
            });
        }
    }

    let mut issues = Vec::new();
    if gem.k == 0 {
        issues.push("gem.k must be at least 1".to_string());
    }
    if gem.s == 0 || gem.s > gem.k {
        issues.push(format!(
            "gem.s must satisfy 1 <= s <= k (s={}, k={})",
            gem.s, gem.k
        ));
    }
    if let Some(g) = gem.gamma {
        if !g.is_finite() || g <= 0.0 {
            issues.push(format!("gem.gamma must be positive and finite, got {g}"));
        }
    }
    if !(gem.alpha > 0.0 && gem.alpha < 1.0) {
        issues.push(format!("gem.alpha must lie in (0, 1), got {}", gem.alpha));
    }
    if !(gem.partition_fraction > 0.0 && gem.partition_fraction < 1.0) {
        issues.push(format!(
            "gem.partition_fraction must lie in (0, 1), got {}",
            gem.partition_fraction
        ));
    }
    if scenario.dim == 0 {
        issues.push("scenario.dim must be at least 1".to_string());
    }
    if !scenario.sigma.is_finite() || scenario.sigma <= 0.0 {
        issues.push(format!(
            "scenario.sigma must be positive and finite, got {}",
            scenario.sigma
        ));
    }
    if !(0.0..=1.0).contains(&scenario.epsilon) {
        issues.push(format!(
            "scenario.epsilon must lie in [0, 1], got {}",
            scenario.epsilon
        ));
    }
    if scenario.horizon == 0 {
        issues.push("scenario.horizon must be at least 1".to_string());
    } else if scenario.change_time == 0 || scenario.change_time > scenario.horizon {
        issues.push(format!(
            "scenario.change_time must lie in 1..=horizon ({} vs {})",
            scenario.change_time, scenario.horizon
        ));
    }
    if trials == 0 {
        issues.push("run.trials must be at least 1".to_string());
    }
    if train_size < 2 {
        issues.push(format!("run.train_size must be at least 2, got {train_size}"));
    }
    for det in &detectors {
        if !KNOWN_DETECTORS.contains(&det.name.as_str()) {
            issues.push(format!(
                "unknown detector `{}` (known: {})",
                det.name,
                KNOWN_DETECTORS.join(", ")
            ));
        }
        if det
            .thresholds
            .iter()
            .any(|h| !h.is_finite() || *h <= 0.0)
        {
            issues.push(format!(
                "detector `{}` has a non-positive threshold",
                det.name
            ));
        }
        if !det.uniform_bound.is_finite() || det.uniform_bound <= 0.0 {
            issues.push(format!(
                "detector `{}` uniform_bound must be positive and finite",
                det.name
            ));
        }
    }

    if !issues.is_empty() {
        return Err(CliError::Usage(format!(
            "invalid configuration:\n  - {}",
            issues.join("\n  - ")
        )));
    }

    Ok(ResolvedConfig {
        seed,
        trials,
        train_size,
        gem,
        scenario,
        detectors,
    })
}

impl ResolvedConfig {
    /// Canonical digest of the resolved configuration, recorded in outputs so
    /// a result file can be traced back to the exact run settings.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        crate::archive::sha256_hex(canonical.as_bytes())
    }
}
