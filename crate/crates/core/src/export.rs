//! On-disk formats: CSV dumps (one node per row) and a raw little-endian
//! block with a fixed 64-byte header for lossless round-tripping of scalar
//! fields.
//!
//! Header layout (little-endian):
//!
//! ```text
//! offset  size  content
//!      0     4  magic "HLAB"
//!      4     4  version (u32, currently 1)
//!      8     4  dimension (u32)
//!     12     4  topology (u32: 0 periodic, 1 box)
//!     16    12  per-axis node counts (3 x u32)
//!     28     8  snapshot time (f64)
//!     36    24  per-axis extents (3 x f64)
//!     60     4  padding (zero)
//! ```

use crate::fields::ScalarField;
use crate::grid::{GridSpec, Topology, MAX_DIM};
use crate::report::EstimateReport;
use std::io::{self, Read, Write};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"HLAB";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("bad magic; not a field block")]
    BadMagic,
    #[error("unsupported block version {0}")]
    BadVersion(u32),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("value payload has {got} bytes, expected {expected}")]
    TruncatedPayload { got: usize, expected: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{0}")]
    Field(String),
}

/// One row per node: coordinates then the value.
pub fn write_field_csv(w: &mut impl Write, field: &ScalarField) -> io::Result<()> {
    let g = field.grid();
    let d = g.dim();
    let axes: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
    writeln!(w, "{},value", axes.join(","))?;
    for (i, v) in field.values().iter().enumerate() {
        let p = g.position(i);
        for c in 0..d {
            write!(w, "{},", p[c])?;
        }
        writeln!(w, "{v}")?;
    }
    Ok(())
}

/// Margin dump: coordinates, margin, excluded flag.
pub fn write_margins_csv(w: &mut impl Write, report: &EstimateReport) -> io::Result<()> {
    let Some(field) = &report.margin_field else {
        // Pair-based reports list endpoint coordinates instead.
        writeln!(w, "x,y,margin")?;
        if let Some(pairs) = &report.pair_margins {
            for p in pairs {
                let fmt = |v: &[f64]| {
                    v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
                };
                writeln!(w, "{},{},{}", fmt(&p.x), fmt(&p.y), p.margin)?;
            }
        }
        return Ok(());
    };
    let g = field.grid();
    let d = g.dim();
    let axes: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
    writeln!(w, "{},margin,excluded", axes.join(","))?;
    let mask = report.excluded_mask.as_deref().unwrap_or(&[]);
    for (i, v) in field.values().iter().enumerate() {
        let p = g.position(i);
        for c in 0..d {
            write!(w, "{},", p[c])?;
        }
        writeln!(w, "{v},{}", u8::from(mask.get(i).copied().unwrap_or(false)))?;
    }
    Ok(())
}

/// Time-series dump: t, quantity, dissipation, finite-difference slope.
pub fn write_series_csv(
    w: &mut impl Write,
    times: &[f64],
    quantity: &[f64],
    dissipation: &[f64],
) -> io::Result<()> {
    writeln!(w, "t,quantity,dissipation,slope")?;
    for i in 0..times.len() {
        let slope = if i + 1 < times.len() {
            (quantity[i + 1] - quantity[i]) / (times[i + 1] - times[i])
        } else {
            f64::NAN
        };
        let d = dissipation.get(i).copied().unwrap_or(f64::NAN);
        writeln!(w, "{},{},{},{}", times[i], quantity[i], d, slope)?;
    }
    Ok(())
}

pub fn write_field_block(
    w: &mut impl Write,
    field: &ScalarField,
    time: f64,
) -> Result<(), ExportError> {
    let g = field.grid();
    let mut header = [0u8; HEADER_LEN];
    header[0..4].copy_from_slice(MAGIC);
    header[4..8].copy_from_slice(&VERSION.to_le_bytes());
    header[8..12].copy_from_slice(&(g.dim() as u32).to_le_bytes());
    let topo: u32 = match g.topology() {
        Topology::Periodic => 0,
        Topology::Box => 1,
    };
    header[12..16].copy_from_slice(&topo.to_le_bytes());
    for a in 0..MAX_DIM {
        let count = if a < g.dim() { g.count(a) as u32 } else { 1 };
        header[16 + 4 * a..20 + 4 * a].copy_from_slice(&count.to_le_bytes());
    }
    header[28..36].copy_from_slice(&time.to_le_bytes());
    for a in 0..MAX_DIM {
        let extent = if a < g.dim() { g.extent(a) } else { 1.0 };
        header[36 + 8 * a..44 + 8 * a].copy_from_slice(&extent.to_le_bytes());
    }
    w.write_all(&header)?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field_block(r: &mut impl Read) -> Result<(ScalarField, f64), ExportError> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[0..4] != MAGIC {
        return Err(ExportError::BadMagic);
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(ExportError::BadVersion(version));
    }
    let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let topology = match u32::from_le_bytes(header[12..16].try_into().unwrap()) {
        0 => Topology::Periodic,
        1 => Topology::Box,
        other => return Err(ExportError::CorruptHeader(format!("topology tag {other}"))),
    };
    let mut counts = [1usize; MAX_DIM];
    for a in 0..MAX_DIM {
        counts[a] = u32::from_le_bytes(header[16 + 4 * a..20 + 4 * a].try_into().unwrap()) as usize;
    }
    let time = f64::from_le_bytes(header[28..36].try_into().unwrap());
    let mut extents = [1.0f64; MAX_DIM];
    for a in 0..MAX_DIM {
        extents[a] = f64::from_le_bytes(header[36 + 8 * a..44 + 8 * a].try_into().unwrap());
    }
    let grid = GridSpec::new(dim, &extents[..dim.min(MAX_DIM)], &counts[..dim.min(MAX_DIM)], topology)
        .map_err(|e| ExportError::CorruptHeader(e.to_string()))?;
    let n = grid.node_count();
    let mut payload = vec![0u8; n * 8];
    let mut got = 0usize;
    while got < payload.len() {
        match r.read(&mut payload[got..])? {
            0 => return Err(ExportError::TruncatedPayload { got, expected: n * 8 }),
            k => got += k,
        }
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let field = ScalarField::new(grid, values).map_err(|e| ExportError::Field(e.to_string()))?;
    Ok((field, time))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn block_round_trip() {
        let g = GridSpec::cube(2, 3.0, 9, Topology::Box).unwrap();
        let f = ScalarField::from_fn(&g, |p| p[0] * 2.0 - p[1] + 0.125);
        let mut buf = Vec::new();
        write_field_block(&mut buf, &f, 0.75).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 81 * 8);
        let (back, t) = read_field_block(&mut buf.as_slice()).unwrap();
        assert_eq!(t, 0.75);
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid(), f.grid());
    }

    #[test]
    fn block_rejects_garbage() {
        let mut buf = vec![0u8; 128];
        assert!(matches!(read_field_block(&mut buf.as_slice()), Err(ExportError::BadMagic)));
        buf[0..4].copy_from_slice(MAGIC);
        buf[4..8].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(read_field_block(&mut buf.as_slice()), Err(ExportError::BadVersion(7))));
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let g = GridSpec::cube(1, 1.0, 8, Topology::Periodic).unwrap();
        let f = ScalarField::constant(&g, 1.5);
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.starts_with("x0,value\n"));
    }

    proptest! {
        #[test]
        fn block_round_trip_any_field(
            dim in 1usize..=3,
            count in 8usize..12,
            seed in any::<u64>(),
            time in 0.0f64..10.0,
        ) {
            let g = GridSpec::cube(dim, 2.0, count, Topology::Periodic).unwrap();
            let mut state = seed | 1;
            let values: Vec<f64> = (0..g.node_count())
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                    (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                })
                .collect();
            let f = ScalarField::new(g, values).unwrap();
            let mut buf = Vec::new();
            write_field_block(&mut buf, &f, time).unwrap();
            let (back, t) = read_field_block(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back.values(), f.values());
            prop_assert_eq!(t, time);
        }
    }
}
