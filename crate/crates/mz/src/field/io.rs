//! The `FLD1` binary field format.
//!
//! Layout (bit-exact): ASCII magic `FLD1\n`; one UTF-8 JSON header line
//! terminated by `\n`; then raw little-endian 64-bit floats of length
//! `product(shape) * components`.

use crate::error::MzError;
use crate::field::grid::{Boundary, Grid, GridField};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 5] = b"FLD1\n";

#[derive(Serialize, Deserialize)]
struct Header {
    dim: usize,
    shape: Vec<usize>,
    components: usize,
    spacing: f64,
    origin: Vec<f64>,
    boundary: Boundary,
    dtype: String,
    layout: String,
}

pub fn write_field(path: &Path, field: &GridField) -> Result<()> {
    field.validate()?;
    let header = Header {
        dim: field.grid.dim,
        shape: field.grid.shape.clone(),
        components: field.components,
        spacing: field.grid.spacing,
        origin: field.grid.origin.clone(),
        boundary: field.grid.boundary,
        dtype: "f64le".into(),
        layout: "row-major-node,component-fastest".into(),
    };
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for v in &field.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<GridField> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)
        .map_err(|_| MzError::Format("file too short for magic".into()))?;
    if &magic != MAGIC {
        return Err(MzError::Format(format!("bad magic {:?}, expected FLD1", magic)));
    }
    let mut header_line = String::new();
    r.read_line(&mut header_line)?;
    let header: Header = serde_json::from_str(header_line.trim_end_matches('\n'))
        .map_err(|e| MzError::Format(format!("bad header JSON: {e}")))?;
    if header.dtype != "f64le" {
        return Err(MzError::Format(format!("unsupported dtype {}", header.dtype)));
    }
    if header.layout != "row-major-node,component-fastest" {
        return Err(MzError::Format(format!("unsupported layout {}", header.layout)));
    }
    let grid = Grid::new(header.shape, header.spacing, header.origin, header.boundary)?;
    if grid.dim != header.dim {
        return Err(MzError::Format("dim field does not match shape length".into()));
    }
    let n = grid.node_count() * header.components;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != n * 8 {
        return Err(MzError::Format(format!(
            "payload length {} bytes, expected {} ({} values)",
            payload.len(),
            n * 8,
            n
        )));
    }
    let mut data = Vec::with_capacity(n);
    for chunk in payload.chunks_exact(8) {
        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let field = GridField { grid, components: header.components, data };
    field.validate()?;
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_field() -> GridField {
        let grid = Grid::new(vec![5, 5], 0.25, vec![0.0, 0.0], Boundary::Extend).unwrap();
        GridField::from_fn(grid, 2, |x, out| {
            out[0] = x[0] + 2.0 * x[1];
            out[1] = (x[0] * x[1]).sin();
        })
    }

    #[test]
    fn round_trip_payload_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fld");
        let field = sample_field();
        write_field(&path, &field).unwrap();
        let back = read_field(&path).unwrap();
        assert_eq!(field.data, back.data);
        assert_eq!(field.grid, back.grid);
        // Writing the read field again reproduces the bytes.
        let path2 = dir.path().join("g.fld");
        write_field(&path2, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fld");
        write_field(&path, &sample_field()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        match read_field(&path) {
            Err(MzError::Format(msg)) => assert!(msg.contains("payload length")),
            other => panic!("expected payload-length error, got {other:?}"),
        }
    }

    #[test]
    fn magic_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fld");
        std::fs::write(&path, b"NOPE\n{}\n").unwrap();
        assert!(matches!(read_field(&path), Err(MzError::Format(_))));
    }

    #[test]
    fn payload_size_arithmetic() {
        // A 64^3 field with 10 components carries 64^3 * 10 * 8 payload bytes.
        let grid = Grid::new(vec![64, 64, 64], 1.0 / 63.0, vec![0.0; 3], Boundary::Periodic).unwrap();
        let field = GridField::zeros(grid, 10);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.fld");
        write_field(&path, &field).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header_len = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        let header2 = bytes[header_len..].iter().position(|&b| b == b'\n').unwrap() + 1;
        assert_eq!(bytes.len() - header_len - header2, 64 * 64 * 64 * 10 * 8);
    }
}
