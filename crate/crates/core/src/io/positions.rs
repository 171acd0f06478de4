//! Scan positions as `index,row,col` CSV.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Position;

pub const HEADER: &str = "index,row,col";

pub fn to_csv(positions: &[Position]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for (k, p) in positions.iter().enumerate() {
        out.push_str(&format!("{k},{},{}\n", p.row, p.col));
    }
    out
}

pub fn from_csv(text: &str) -> Result<Vec<Position>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "positions CSV must start with '{HEADER}', got {other:?}"
            )))
        }
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::Format(format!("line {}: bad value '{s}': {e}", k + 2)))
            };
            match fields.as_slice() {
                [idx, row, col] => {
                    if parse(idx)? != k {
                        return Err(Error::Format(format!("line {}: index out of sequence", k + 2)));
                    }
                    Ok(Position::new(parse(row)?, parse(col)?))
                }
                _ => Err(Error::Format(format!("line {}: expected 3 fields", k + 2))),
            }
        })
        .collect()
}

pub fn read(path: &Path) -> Result<Vec<Position>> {
    from_csv(&std::fs::read_to_string(path)?)
}

pub fn write(path: &Path, positions: &[Position]) -> Result<()> {
    std::fs::write(path, to_csv(positions))?;
    Ok(())
}
