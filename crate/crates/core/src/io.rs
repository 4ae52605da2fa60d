//! Plain-text point files: one point per line, coordinates separated by
//! whitespace or commas; blank lines and lines starting with `#` are
//! skipped.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

pub fn parse_points<R: BufRead>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("`{t}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {} coordinates, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_cloud(path: &Path, intrinsic_dim: usize) -> Result<PointCloud> {
    let file =
        std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let rows = parse_points(std::io::BufReader::new(file))?;
    PointCloud::from_rows(&rows, intrinsic_dim)
}

/// Writes coordinates with enough digits to round-trip exactly.
pub fn write_points<W: Write>(cloud: &PointCloud, out: &mut W) -> std::io::Result<()> {
    for p in cloud.points() {
        let line: Vec<String> = p.iter().map(|c| format!("{c:e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}
