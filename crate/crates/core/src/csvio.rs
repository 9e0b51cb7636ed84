//! Minimal CSV helpers.
//!
//! All emitted files are UTF-8, LF line endings, `.` decimal separator, one
//! mandatory header row. Floats are written with Rust's shortest
//! round-trip formatting, so identical values always produce identical
//! bytes and files parse back losslessly.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::scalar::Scalar;

/// Shortest round-trip decimal form of a scalar.
pub fn fmt<T: Scalar>(v: T) -> String {
    format!("{}", v.to_f64_c())
}

/// Write a CSV file atomically (temp file + rename).
pub fn write_csv<P: AsRef<Path>>(
    path: P,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> io::Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("csv.tmp");
    {
        let mut f = io::BufWriter::new(fs::File::create(&tmp)?);
        writeln!(f, "{}", header.join(","))?;
        for row in rows {
            writeln!(f, "{}", row.join(","))?;
        }
        f.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Read a CSV of floats; returns the header and the data rows.
pub fn read_csv<P: AsRef<Path>>(path: P) -> io::Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path.as_ref())?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "empty csv"))?
        .split(',')
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        let row = row.map_err(|e| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{}:{}: {e}", path.as_ref().display(), k + 2),
            )
        })?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        let vals: [f64; 5] = [0.1, -0.0, 1.0 / 3.0, 1e-300, 123456.789012345];
        write_csv(
            &p,
            &["v"],
            vals.iter().map(|v| vec![fmt(*v)]),
        )
        .unwrap();
        let (header, rows) = read_csv(&p).unwrap();
        assert_eq!(header, vec!["v"]);
        for (row, v) in rows.iter().zip(vals.iter()) {
            assert_eq!(row[0].to_bits(), v.to_bits());
        }
    }
}
