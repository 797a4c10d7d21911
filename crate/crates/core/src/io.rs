//! File formats: JSON documents and CSV tables written by the command line
//! front end. Complex numbers are always `[re, im]` pairs.

use std::fs;
use std::path::Path;

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{CMat, Mat2, C64};

pub fn ser_c64<S: Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

pub fn ser_c64_vec<S: Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

/// Matrix as a list of rows of `[re, im]` pairs.
pub fn ser_cmat<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect();
    rows.serialize(s)
}

/// 2×2 matrix as `[m00, m01, m10, m11]`, each `[re, im]`.
pub fn mat2_entries(m: &Mat2) -> [[f64; 2]; 4] {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]].map(|z| [z.re, z.im])
}

pub fn c64_pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))
}

pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::ConfigParse(format!("{what}: {e}")))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes a CSV file with the given header and rows of floats.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    for row in rows {
        w.write_record(row.iter().map(|x| format_float(*x)))
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip representation.
pub fn format_float(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -2.5e-17, 1.0 / 3.0, 12345.678] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn matrix_serialization() {
        let m = CMat::from_row_slice(1, 2, &[C64::new(1.0, 2.0), C64::new(3.0, -4.0)]);
        #[derive(Serialize)]
        struct W {
            #[serde(serialize_with = "ser_cmat")]
            m: CMat,
        }
        let s = serde_json::to_string(&W { m }).unwrap();
        assert_eq!(s, r#"{"m":[[[1.0,2.0],[3.0,-4.0]]]}"#);
    }
}
