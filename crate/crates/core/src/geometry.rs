//! Scan positions on the object grid.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Top-left corner of a probe window, in object pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position {
    pub row: usize,
    pub col: usize,
}

impl Position {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// An ordered set of probe windows over a square `object_size` object.
///
/// Every window lies fully inside the object and no position repeats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanGeometry {
    object_size: usize,
    probe_size: usize,
    step: usize,
    positions: Vec<Position>,
}

impl ScanGeometry {
    pub fn new(
        object_size: usize,
        probe_size: usize,
        step: usize,
        positions: Vec<Position>,
    ) -> Result<Self> {
        check_sizes(object_size, probe_size, step)?;
        let limit = object_size - probe_size;
        let mut seen = HashSet::with_capacity(positions.len());
        for p in &positions {
            if p.row > limit || p.col > limit {
                return Err(Error::Geometry(format!(
                    "position ({}, {}) puts the {probe_size}px window outside the {object_size}px object",
                    p.row, p.col
                )));
            }
            if !seen.insert(*p) {
                return Err(Error::Geometry(format!(
                    "duplicate position ({}, {})",
                    p.row, p.col
                )));
            }
        }
        Ok(Self { object_size, probe_size, step, positions })
    }

    pub fn object_size(&self) -> usize {
        self.object_size
    }

    pub fn probe_size(&self) -> usize {
        self.probe_size
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn contains(&self, p: Position) -> bool {
        self.positions.contains(&p)
    }
}

fn check_sizes(object_size: usize, probe_size: usize, step: usize) -> Result<()> {
    if probe_size == 0 || probe_size > object_size {
        return Err(Error::Dimension(format!(
            "probe size must satisfy 1 <= S <= T, got S={probe_size}, T={object_size}"
        )));
    }
    if step == 0 {
        return Err(Error::Dimension("scan step must be at least 1".into()));
    }
    Ok(())
}

/// Row-major raster of windows at multiples of `step` along both axes.
pub fn raster_geometry(object_size: usize, probe_size: usize, step: usize) -> Result<ScanGeometry> {
    check_sizes(object_size, probe_size, step)?;
    let axis: Vec<usize> = (0..=object_size - probe_size).step_by(step).collect();
    let positions = axis
        .iter()
        .flat_map(|&r| axis.iter().map(move |&c| Position::new(r, c)))
        .collect();
    Ok(ScanGeometry { object_size, probe_size, step, positions })
}

/// Linear overlap between neighbouring windows: `100 * (S - step) / S`.
/// Negative values mean gaps between windows.
pub fn overlap_percent(probe_size: usize, step: usize) -> f64 {
    100.0 * (probe_size as f64 - step as f64) / probe_size as f64
}
