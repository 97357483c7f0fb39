//! Size cost of each quality property on the serialized entity.

use std::path::Path;

use dqcurate_core::entity::{self, DecodeMode, Dimension, Entity};
use dqcurate_core::metrics::overhead_percent;
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadRow {
    pub dimension: String,
    /// Serialized size with the property present.
    pub enriched_bytes: usize,
    /// Serialized size with the property removed.
    pub raw_bytes: usize,
    pub percent: f64,
}

/// For each dimension: size with and without the property and the relative
/// increase. Observations and absent properties yield 0%.
pub fn overhead_report(fixture: &Entity) -> Result<Vec<OverheadRow>> {
    let full = entity::measure_size(fixture).map_err(EvalError::invalid)?;
    Dimension::ALL
        .into_iter()
        .map(|dim| {
            let raw = match fixture {
                Entity::Assessment(a) => entity::measure_size_without(a, dim).map_err(EvalError::invalid)?,
                Entity::Observation(_) => full,
            };
            from_counts(dim.key(), full, raw)
        })
        .collect()
}

/// Overhead row from externally measured byte counts.
pub fn from_counts(dimension: &str, enriched_bytes: usize, raw_bytes: usize) -> Result<OverheadRow> {
    Ok(OverheadRow {
        dimension: dimension.to_string(),
        enriched_bytes,
        raw_bytes,
        percent: overhead_percent(enriched_bytes, raw_bytes).map_err(EvalError::invalid)?,
    })
}

pub fn load_fixture(path: &Path) -> Result<Entity> {
    let bytes = std::fs::read(path)?;
    entity::deserialize(&bytes, DecodeMode::Strict).map_err(EvalError::invalid)
}

pub fn write_overhead_csv(rows: &[OverheadRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
