//! PTA: n-dimensional float64 / complex128 array container.
//!
//! ```text
//! "PTYA" | version u16 = 1 | dtype u16 (1 real, 2 complex) | ndim u16 | pad u16 = 0
//! dims: ndim x u64 | payload: row-major little-endian (complex as re, im)
//! ```

use std::path::Path;

use num_complex::Complex64;

use super::{read_file, write_file, Reader};
use crate::error::{Error, Result};
use crate::field::{ComplexField, RealField};

pub const MAGIC: &[u8; 4] = b"PTYA";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum DType {
    Real = 1,
    Complex = 2,
}

impl DType {
    fn size(self) -> usize {
        match self {
            DType::Real => 8,
            DType::Complex => 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PtaData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PtaArray {
    pub dims: Vec<u64>,
    pub data: PtaData,
}

impl PtaArray {
    pub fn dtype(&self) -> DType {
        match self.data {
            PtaData::Real(_) => DType::Real,
            PtaData::Complex(_) => DType::Complex,
        }
    }

    fn len(&self) -> usize {
        match &self.data {
            PtaData::Real(v) => v.len(),
            PtaData::Complex(v) => v.len(),
        }
    }
}

impl From<&ComplexField> for PtaArray {
    fn from(f: &ComplexField) -> Self {
        Self { dims: vec![f.rows() as u64, f.cols() as u64], data: PtaData::Complex(f.data().to_vec()) }
    }
}

impl From<&RealField> for PtaArray {
    fn from(f: &RealField) -> Self {
        Self { dims: vec![f.rows() as u64, f.cols() as u64], data: PtaData::Real(f.data().to_vec()) }
    }
}

fn element_count(dims: &[u64]) -> Result<usize> {
    dims.iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d))
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| Error::Format("PTA dimensions overflow".into()))
}

pub fn encode(array: &PtaArray) -> Result<Vec<u8>> {
    if element_count(&array.dims)? != array.len() {
        return Err(Error::Format(format!(
            "PTA dims {:?} do not match {} values",
            array.dims,
            array.len()
        )));
    }
    let ndim = u16::try_from(array.dims.len()).map_err(|_| Error::Format("too many PTA dimensions".into()))?;
    let mut out = Vec::with_capacity(12 + 8 * array.dims.len() + array.len() * array.dtype().size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(array.dtype() as u16).to_le_bytes());
    out.extend_from_slice(&ndim.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    for d in &array.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    match &array.data {
        PtaData::Real(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        PtaData::Complex(v) => v.iter().for_each(|z| {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }),
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<PtaArray> {
    let mut r = Reader::new(bytes, "PTA");
    if &r.array::<4>()? != MAGIC {
        return Err(Error::Format("not a PTA file (bad magic)".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported PTA version {version}")));
    }
    let dtype = match r.u16()? {
        1 => DType::Real,
        2 => DType::Complex,
        other => return Err(Error::Format(format!("unknown PTA dtype {other}"))),
    };
    let ndim = r.u16()? as usize;
    if r.u16()? != 0 {
        return Err(Error::Format("PTA pad field must be zero".into()));
    }
    let dims = (0..ndim).map(|_| r.u64()).collect::<Result<Vec<u64>>>()?;
    let count = element_count(&dims)?;
    if count.checked_mul(dtype.size()) != Some(r.remaining()) {
        return Err(Error::Format(format!(
            "PTA payload is {} bytes, expected {count} x {}",
            r.remaining(),
            dtype.size()
        )));
    }
    let data = match dtype {
        DType::Real => PtaData::Real((0..count).map(|_| r.f64()).collect::<Result<_>>()?),
        DType::Complex => PtaData::Complex(
            (0..count)
                .map(|_| Ok(Complex64::new(r.f64()?, r.f64()?)))
                .collect::<Result<_>>()?,
        ),
    };
    r.finish()?;
    Ok(PtaArray { dims, data })
}

fn matrix_dims(array: &PtaArray) -> Result<(usize, usize)> {
    match array.dims.as_slice() {
        &[rows, cols] => Ok((rows as usize, cols as usize)),
        other => Err(Error::Format(format!("expected a 2-D PTA array, got dims {other:?}"))),
    }
}

pub fn to_complex_field(array: PtaArray) -> Result<ComplexField> {
    let (rows, cols) = matrix_dims(&array)?;
    match array.data {
        PtaData::Complex(v) => ComplexField::new(rows, cols, v),
        PtaData::Real(v) => ComplexField::new(rows, cols, v.into_iter().map(|x| Complex64::new(x, 0.0)).collect()),
    }
}

pub fn to_real_field(array: PtaArray) -> Result<RealField> {
    let (rows, cols) = matrix_dims(&array)?;
    match array.data {
        PtaData::Real(v) => RealField::new(rows, cols, v),
        PtaData::Complex(_) => Err(Error::Format("expected a real PTA array, got complex".into())),
    }
}

pub fn read(path: &Path) -> Result<PtaArray> {
    decode(&read_file(path)?)
}

pub fn write(path: &Path, array: &PtaArray) -> Result<()> {
    write_file(path, &encode(array)?)
}

pub fn read_complex(path: &Path) -> Result<ComplexField> {
    to_complex_field(read(path)?)
}

pub fn write_complex(path: &Path, field: &ComplexField) -> Result<()> {
    write(path, &PtaArray::from(field))
}
