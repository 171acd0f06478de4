//! Dense row-major 2-D fields.
//!
//! [`ComplexField`] holds objects, probes and exit waves; [`RealField`] holds
//! grayscale images and intensities. Both reject non-finite values at
//! construction so downstream numerics never see NaN or Inf from their inputs.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Element types a [`Field`] may hold.
pub trait FieldValue: Copy + Default + PartialEq + std::fmt::Debug + Send + Sync {
    fn is_finite_value(&self) -> bool;
}

impl FieldValue for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl FieldValue for Complex64 {
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// A `rows x cols` grid stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type ComplexField = Field<Complex64>;
pub type RealField = Field<f64>;

impl<T: FieldValue> Field<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "field must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} values for a {rows}x{cols} field, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite_value()) {
            return Err(Error::NonFinite(format!(
                "field value at ({}, {}) is not finite",
                idx / cols,
                idx % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    /// Mutable access for in-crate solvers. Callers must keep values finite.
    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Re-check the finiteness invariant after in-place updates.
    pub(crate) fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite_value()) {
            None => Ok(()),
            Some(idx) => Err(Error::NonFinite(format!(
                "value at ({}, {}) became non-finite",
                idx / self.cols,
                idx % self.cols
            ))),
        }
    }

    pub fn map<U: FieldValue>(&self, f: impl Fn(T) -> U) -> Result<Field<U>> {
        Field::new(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }
}

impl ComplexField {
    /// Phase map in (-pi, pi].
    pub fn phase(&self) -> RealField {
        Field {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.arg()).collect(),
        }
    }

    pub fn amplitude(&self) -> RealField {
        Field {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.norm()).collect(),
        }
    }

    /// Multiply every value by the unit phasor `exp(j * phi)`.
    pub fn rotate_phase(&self, phi: f64) -> ComplexField {
        let rot = Complex64::from_polar(1.0, phi);
        Field {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * rot).collect(),
        }
    }

    pub fn max_norm_diff(&self, other: &ComplexField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}
