//! PTD: diffraction stack with embedded positions and provenance.
//!
//! ```text
//! "PTYD" | version u16 = 1 | S u32 | count u64
//! count x { row i32 | col i32 | provenance u8 (0 real, 1 simulated) | 3 zero bytes | S*S f64 }
//! ```

use std::path::Path;

use super::{read_file, write_file, Reader};
use crate::error::{Error, Result};
use crate::field::RealField;
use crate::geometry::Position;
use crate::stack::{DiffractionRecord, DiffractionStack, Provenance};

pub const MAGIC: &[u8; 4] = b"PTYD";
pub const VERSION: u16 = 1;

fn coord(v: usize, what: &str) -> Result<i32> {
    i32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in i32")))
}

pub fn encode(stack: &DiffractionStack) -> Result<Vec<u8>> {
    let s = stack.probe_size();
    let s32 = u32::try_from(s).map_err(|_| Error::Format("probe size does not fit in u32".into()))?;
    let mut out = Vec::with_capacity(18 + stack.len() * (12 + 8 * s * s));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&s32.to_le_bytes());
    out.extend_from_slice(&(stack.len() as u64).to_le_bytes());
    for rec in stack.records() {
        out.extend_from_slice(&coord(rec.position.row, "row")?.to_le_bytes());
        out.extend_from_slice(&coord(rec.position.col, "col")?.to_le_bytes());
        out.push(rec.provenance.code());
        out.extend_from_slice(&[0, 0, 0]);
        for v in rec.intensity.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<DiffractionStack> {
    let mut r = Reader::new(bytes, "PTD");
    if &r.array::<4>()? != MAGIC {
        return Err(Error::Format("not a PTD file (bad magic)".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported PTD version {version}")));
    }
    let s = r.u32()? as usize;
    if s == 0 {
        return Err(Error::Format("PTD probe size is zero".into()));
    }
    let count = r.u64()?;
    let record_bytes = (s * s).checked_mul(8).and_then(|b| b.checked_add(12));
    let expected = record_bytes.and_then(|b| usize::try_from(count).ok()?.checked_mul(b));
    if expected != Some(r.remaining()) {
        return Err(Error::Format(format!(
            "PTD declares {count} records of size {s} but holds {} payload bytes",
            r.remaining()
        )));
    }
    let mut records = Vec::with_capacity(count as usize);
    for k in 0..count {
        let (row, col) = (r.i32()?, r.i32()?);
        if row < 0 || col < 0 {
            return Err(Error::Format(format!("record {k} has negative position ({row}, {col})")));
        }
        let code = r.u8()?;
        let provenance = Provenance::from_code(code)
            .ok_or_else(|| Error::Format(format!("record {k} has unknown provenance {code}")))?;
        if r.array::<3>()? != [0, 0, 0] {
            return Err(Error::Format(format!("record {k} has nonzero padding")));
        }
        let values = (0..s * s).map(|_| r.f64()).collect::<Result<Vec<f64>>>()?;
        let intensity = RealField::new(s, s, values)?;
        records.push(DiffractionRecord {
            position: Position::new(row as usize, col as usize),
            provenance,
            intensity,
        });
    }
    r.finish()?;
    DiffractionStack::new(s, records)
}

pub fn read(path: &Path) -> Result<DiffractionStack> {
    decode(&read_file(path)?)
}

pub fn write(path: &Path, stack: &DiffractionStack) -> Result<()> {
    write_file(path, &encode(stack)?)
}
