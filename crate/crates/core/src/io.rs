//! CSV plumbing shared by the file formats.

use std::path::Path;

use crate::error::{Error, Result};

/// Decimal rendering with 17 significant digits, enough to round-trip any
/// `f64`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Reads a CSV file whose header must equal `header` exactly, returning the
/// data rows.
pub(crate) fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let found: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(Error::Format {
            path: path.to_owned(),
            reason: format!("expected header {:?}, found {:?}", header.join(","), found.join(",")),
        });
    }
    reader.records().map(|r| r.map_err(Error::from)).collect()
}

pub(crate) fn field<T: std::str::FromStr>(
    path: &Path,
    record: &csv::StringRecord,
    column: usize,
) -> Result<T> {
    let raw = record.get(column).unwrap_or("");
    raw.parse().map_err(|_| Error::Format {
        path: path.to_owned(),
        reason: format!(
            "line {}: cannot parse column {column} value {raw:?}",
            record.position().map_or(0, |p| p.line())
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt17_roundtrips() {
        for &x in &[0.0, 1.0, -0.1, std::f64::consts::PI, 1e-300, 6.02214076e23] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt17(f64::INFINITY), "inf");
    }
}
