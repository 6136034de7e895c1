//! Model persistence: a self-describing JSON archive carrying the resolved
//! parameters, the full reference partition, the baseline lengths, and the
//! decision boundary, protected by a version field and a SHA-256 checksum
//! over the payload bytes. Loading rebuilds the index deterministically, so a
//! round trip reproduces identical scoring bit for bit.

use std::path::Path;

use odit::gem::{GemModel, ResolvedGemParams};
use odit::Point;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize, Deserialize)]
struct ArchivePayload {
    params: ResolvedGemParams,
    dim: usize,
    n1: usize,
    n2: usize,
    /// SHA-256 of the training CSV, when the model came from a file.
    source_digest: Option<String>,
    baseline_lengths: Vec<f64>,
    threshold_length: f64,
    reference_points: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct ArchiveHeader<'a> {
    format_version: u32,
    checksum: String,
    #[serde(borrow)]
    payload: &'a RawValue,
}

pub fn save_model(model: &GemModel, path: &Path, source_digest: Option<String>) -> CliResult<()> {
    let (n1, n2) = model.training_sizes();
    let payload = ArchivePayload {
        params: model.params().clone(),
        dim: model.dim(),
        n1,
        n2,
        source_digest,
        baseline_lengths: model.baseline_lengths().to_vec(),
        threshold_length: model.threshold_length(),
        reference_points: model
            .reference_points()
            .iter()
            .map(|p| p.coords().to_vec())
            .collect(),
    };
    let payload_json = serde_json::to_string(&payload)
        .map_err(|e| CliError::Data(format!("cannot serialize model: {e}")))?;
    let checksum = sha256_hex(payload_json.as_bytes());
    // Assembled by hand so the checksum covers exactly the embedded bytes.
    let text = format!(
        "{{\"format_version\":{FORMAT_VERSION},\"checksum\":\"{checksum}\",\"payload\":{payload_json}}}\n"
    );
    std::fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> CliResult<GemModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let header: ArchiveHeader = serde_json::from_str(&text).map_err(|e| {
        CliError::Data(format!(
            "{}: model archive is corrupt or truncated: {e}",
            path.display()
        ))
    })?;
    if header.format_version != FORMAT_VERSION {
        return Err(CliError::Data(format!(
            "{}: unsupported model archive version {} (this build reads version {FORMAT_VERSION})",
            path.display(),
            header.format_version
        )));
    }
    let actual = sha256_hex(header.payload.get().as_bytes());
    if actual != header.checksum {
        return Err(CliError::Data(format!(
            "{}: model archive checksum mismatch (file corrupted?)",
            path.display()
        )));
    }
    let payload: ArchivePayload = serde_json::from_str(header.payload.get()).map_err(|e| {
        CliError::Data(format!("{}: malformed model payload: {e}", path.display()))
    })?;
    if payload.reference_points.len() != payload.n2 {
        return Err(CliError::Data(format!(
            "{}: archive claims {} reference points but carries {}",
            path.display(),
            payload.n2,
            payload.reference_points.len()
        )));
    }
    let points: Vec<Point> = payload
        .reference_points
        .into_iter()
        .map(Point::new)
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Data(format!("{}: bad reference point: {e}", path.display())))?;
    GemModel::from_parts(
        points,
        payload.params,
        payload.baseline_lengths,
        payload.threshold_length,
        payload.n1,
    )
    .map_err(|e| CliError::Data(format!("{}: inconsistent model archive: {e}", path.display())))
}
