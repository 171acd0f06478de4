//! Diffraction records tagged with their origin.

use crate::error::{Error, Result};
use crate::field::RealField;
use crate::geometry::Position;

/// Where a diffraction pattern came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Real,
    Simulated,
}

impl Provenance {
    pub fn code(self) -> u8 {
        match self {
            Provenance::Real => 0,
            Provenance::Simulated => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Provenance::Real),
            1 => Some(Provenance::Simulated),
            _ => None,
        }
    }
}

/// One measured or simulated far-field intensity pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffractionRecord {
    pub position: Position,
    pub provenance: Provenance,
    pub intensity: RealField,
}

/// Ordered intensity patterns of a common `probe_size x probe_size` shape.
///
/// All intensities are finite and nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffractionStack {
    probe_size: usize,
    records: Vec<DiffractionRecord>,
}

impl DiffractionStack {
    pub fn new(probe_size: usize, records: Vec<DiffractionRecord>) -> Result<Self> {
        if probe_size == 0 {
            return Err(Error::Dimension("probe size must be at least 1".into()));
        }
        for (k, rec) in records.iter().enumerate() {
            validate_record(probe_size, k, rec)?;
        }
        Ok(Self { probe_size, records })
    }

    pub fn empty(probe_size: usize) -> Result<Self> {
        Self::new(probe_size, Vec::new())
    }

    pub fn probe_size(&self) -> usize {
        self.probe_size
    }

    pub fn records(&self) -> &[DiffractionRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<DiffractionRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn positions(&self) -> Vec<Position> {
        self.records.iter().map(|r| r.position).collect()
    }

    pub fn count(&self, provenance: Provenance) -> usize {
        self.records.iter().filter(|r| r.provenance == provenance).count()
    }

    /// Records with the given provenance, in their original order.
    pub fn filter_provenance(&self, provenance: Provenance) -> DiffractionStack {
        DiffractionStack {
            probe_size: self.probe_size,
            records: self
                .records
                .iter()
                .filter(|r| r.provenance == provenance)
                .cloned()
                .collect(),
        }
    }

    /// Same records, all re-tagged with `provenance`.
    pub fn with_provenance(mut self, provenance: Provenance) -> DiffractionStack {
        for r in &mut self.records {
            r.provenance = provenance;
        }
        self
    }
}

fn validate_record(probe_size: usize, k: usize, rec: &DiffractionRecord) -> Result<()> {
    if rec.intensity.shape() != (probe_size, probe_size) {
        return Err(Error::Dimension(format!(
            "record {k} has a {}x{} pattern, expected {probe_size}x{probe_size}",
            rec.intensity.rows(),
            rec.intensity.cols()
        )));
    }
    if let Some(v) = rec.intensity.data().iter().find(|v| **v < 0.0) {
        return Err(Error::Validation(format!(
            "record {k} has a negative intensity {v}"
        )));
    }
    Ok(())
}
