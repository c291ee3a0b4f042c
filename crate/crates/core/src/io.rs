//! Field snapshots and norm tables on disk.
//!
//! Snapshot layout: `b"GPF1"`, `dim: u32`, `n: u32`, `L: f64`, `t: f64`,
//! `representation: u8` (0 physical, 1 spectral), then the values in flat
//! grid order as interleaved little-endian `f64` pairs.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::{Field, Representation};
use crate::grid::Grid;
use crate::scalar::Real;

pub const MAGIC: &[u8; 4] = b"GPF1";
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 8 + 1;

pub fn encode_snapshot<T: Real>(field: &Field<T>, t: f64) -> Vec<u8> {
    let g = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&g.box_length().to_f64_lossy().to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    out.push(match field.representation() {
        Representation::Physical => 0,
        Representation::Spectral => 1,
    });
    for v in field.values() {
        out.extend_from_slice(&v.re.to_f64_lossy().to_le_bytes());
        out.extend_from_slice(&v.im.to_f64_lossy().to_le_bytes());
    }
    out
}

pub fn decode_snapshot<T: Real>(bytes: &[u8]) -> Result<(Field<T>, f64)> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing GPF1 header".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    let (dim, n, l, t) = (u32_at(4) as usize, u32_at(8) as usize, f64_at(12), f64_at(20));
    let repr = match bytes[28] {
        0 => Representation::Physical,
        1 => Representation::Spectral,
        r => return Err(Error::Format(format!("unknown representation tag {r}"))),
    };
    let grid = Grid::<T>::new(dim, n, T::lit(l))?;
    let expected = HEADER_LEN + 16 * grid.len();
    if bytes.len() != expected {
        return Err(Error::Format(format!("expected {expected} bytes for a {dim}D {n}-point grid, found {}", bytes.len())));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect();
    Ok((Field::from_values(&grid, values, repr)?, t))
}

pub fn write_snapshot<T: Real>(path: impl AsRef<Path>, field: &Field<T>, t: f64) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode_snapshot(field, t))?;
    Ok(())
}

pub fn read_snapshot<T: Real>(path: impl AsRef<Path>) -> Result<(Field<T>, f64)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_snapshot(&bytes)
}

/// One row of a long-format norm table.
#[derive(Clone, Debug, PartialEq)]
pub struct NormRow {
    pub t: f64,
    pub norm_name: String,
    pub value: f64,
}

impl NormRow {
    pub fn new(t: f64, norm_name: impl Into<String>, value: f64) -> Self {
        Self {
            t,
            norm_name: norm_name.into(),
            value,
        }
    }
}

pub fn write_norm_table(path: impl AsRef<Path>, rows: &[NormRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "norm_name", "value"])?;
    for r in rows {
        w.write_record([format!("{:e}", r.t), r.norm_name.clone(), format!("{:e}", r.value)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_norm_table(path: impl AsRef<Path>) -> Result<Vec<NormRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["t", "norm_name", "value"] {
        return Err(Error::Format(format!("unexpected norm table header {header:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let num = |i: usize| rec[i].parse::<f64>().map_err(|e| Error::Format(format!("{e} in {:?}", &rec[i])));
            Ok(NormRow::new(num(0)?, &rec[1], num(2)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::random_field;

    #[test]
    fn snapshot_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        for (dim, n) in [(2, 8), (3, 8)] {
            let g = Grid::<f64>::new(dim, n, 7.5).unwrap();
            let f = random_field(&g, 1);
            for field in [f.clone(), f.into_spectral()] {
                let p = dir.path().join("s.gpf");
                write_snapshot(&p, &field, 2.5).unwrap();
                let (back, t) = read_snapshot::<f64>(&p).unwrap();
                assert_eq!(t, 2.5);
                assert_eq!(back.representation(), field.representation());
                assert_eq!(back.grid(), field.grid());
                assert_eq!(back.values(), field.values());
            }
        }
    }

    #[test]
    fn header_layout_and_corruption() {
        let g = Grid::<f64>::new(2, 8, 1.0).unwrap();
        let bytes = encode_snapshot(&random_field(&g, 2), 0.0);
        assert_eq!(&bytes[..4], b"GPF1");
        assert_eq!(bytes.len(), 29 + 16 * 64);
        assert!(decode_snapshot::<f64>(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_snapshot::<f64>(&bad).is_err());
        let mut bad = bytes;
        bad[28] = 7;
        assert!(decode_snapshot::<f64>(&bad).is_err());
    }

    #[test]
    fn norm_table_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.csv");
        let rows = vec![NormRow::new(0.0, "L2", 1.25), NormRow::new(0.5, "energy", 3.0e-7)];
        write_norm_table(&p, &rows).unwrap();
        assert_eq!(read_norm_table(&p).unwrap(), rows);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,norm_name,value\n"));
    }
}
