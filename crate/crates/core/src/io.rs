//! Field persistence and plot-data export.
//!
//! Binary container: magic "CRPB", format version u32, s_min/s_max as f64,
//! n_s/n_t as u32, then row-major (s-major) little-endian f64 pairs. The
//! JSON debug format is lossless for f64 values.

use crate::error::{Error, Result};
use crate::field::{Field, Loop};
use crate::grid::{CylinderGrid, TimeGrid};
use crate::plane::PlanePoint;
use crate::winding::WTrace;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"CRPB";
const VERSION: u32 = 1;

pub fn write_field_binary(path: &Path, field: &Field) -> Result<()> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(24 + 16 * field.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&grid.s_min.to_le_bytes());
    out.extend_from_slice(&grid.s_max.to_le_bytes());
    out.extend_from_slice(&(grid.n_s as u32).to_le_bytes());
    out.extend_from_slice(&(grid.n_t() as u32).to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.p.to_le_bytes());
        out.extend_from_slice(&v.q.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn read_field_binary(path: &Path) -> Result<Field> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 28 || &buf[0..4] != MAGIC {
        return Err(Error::Format(format!("{}: not a field container", path.display())));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let s_min = f64::from_le_bytes(buf[8..16].try_into().unwrap());
    let s_max = f64::from_le_bytes(buf[16..24].try_into().unwrap());
    let n_s = u32::from_le_bytes(buf[24..28].try_into().unwrap()) as usize;
    let n_t = u32::from_le_bytes(buf[28..32].try_into().unwrap()) as usize;
    let expected = 32 + 16 * n_s * n_t;
    if buf.len() != expected {
        return Err(Error::Format(format!(
            "container length {} does not match header ({} expected)",
            buf.len(),
            expected
        )));
    }
    let grid = CylinderGrid::new(s_min, s_max, n_s, TimeGrid::new(n_t)?)?;
    let mut values = Vec::with_capacity(n_s * n_t);
    for chunk in buf[32..].chunks_exact(16) {
        values.push(PlanePoint::new(
            f64::from_le_bytes(chunk[0..8].try_into().unwrap()),
            f64::from_le_bytes(chunk[8..16].try_into().unwrap()),
        ));
    }
    Field::new(grid, values)
}

/// Lossless JSON debug form of a field.
#[derive(Debug, Serialize, Deserialize)]
pub struct FieldJson {
    pub s_min: f64,
    pub s_max: f64,
    pub n_s: usize,
    pub n_t: usize,
    pub values: Vec<[f64; 2]>,
}

pub fn write_field_json(path: &Path, field: &Field) -> Result<()> {
    let grid = field.grid();
    let doc = FieldJson {
        s_min: grid.s_min,
        s_max: grid.s_max,
        n_s: grid.n_s,
        n_t: grid.n_t(),
        values: field.values().iter().map(|v| [v.p, v.q]).collect(),
    };
    let file = std::fs::File::create(path)?;
    serde_json::to_writer(file, &doc)?;
    Ok(())
}

pub fn read_field_json(path: &Path) -> Result<Field> {
    let file = std::fs::File::open(path)?;
    let doc: FieldJson = serde_json::from_reader(file)?;
    let grid = CylinderGrid::new(doc.s_min, doc.s_max, doc.n_s, TimeGrid::new(doc.n_t)?)?;
    let values = doc.values.iter().map(|v| PlanePoint::new(v[0], v[1])).collect();
    Field::new(grid, values)
}

/// Field reader dispatching on the extension (.crpb binary, .json debug).
pub fn read_field(path: &Path) -> Result<Field> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_field_json(path),
        _ => read_field_binary(path),
    }
}

pub fn write_loop_csv(path: &Path, loop_: &Loop) -> Result<()> {
    let mut out = String::from("t,p,q\n");
    for (j, v) in loop_.values().iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", loop_.time().node(j), v.p, v.q));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_wtrace_csv(path: &Path, trace: &WTrace) -> Result<()> {
    let mut out = String::from("s,w,separation,valid\n");
    for sample in &trace.samples {
        let w = sample.w_value.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            sample.s, w, sample.separation, sample.valid
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Plane trajectory samples (sigma, p, q), e.g. projected orbits.
pub fn write_trajectory_csv(path: &Path, rows: &[(f64, PlanePoint)]) -> Result<()> {
    let mut out = String::from("sigma,p,q\n");
    for (sigma, v) in rows {
        out.push_str(&format!("{},{},{}\n", sigma, v.p, v.q));
    }
    std::fs::write(path, out)?;
    Ok(())
}
