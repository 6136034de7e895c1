use crate::{Error, Result};

/// A d-dimensional observation with finite coordinates.
///
/// Non-finite values are rejected at construction so they can never reach a
/// reference set or a detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("point needs at least one coordinate"));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("coordinate {i}"),
            });
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

/// Validates that `points` is nonempty and dimensionally uniform; returns d.
pub fn dataset_dim(points: &[Point]) -> Result<usize> {
    let first = points.first().ok_or(Error::Empty("dataset has no points"))?;
    let dim = first.dim();
    for p in points {
        if p.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.dim(),
            });
        }
    }
    Ok(dim)
}
