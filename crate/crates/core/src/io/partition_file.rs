//! Per-point component ids for every hierarchy level, as CSV or packed binary.
//!
//! Binary layout: 8-byte magic `SUPPART1`, u32 point count, u8 level count,
//! three zero bytes of padding (16-byte header), then `N x L` little-endian
//! u32 ids, point-major.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::partition::HierarchicalPartition;

pub const PARTITION_MAGIC: &[u8; 8] = b"SUPPART1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionFormat {
    Csv,
    Binary,
}

pub fn write_partition(
    path: impl AsRef<Path>,
    hierarchy: &HierarchicalPartition,
    format: PartitionFormat,
) -> Result<()> {
    let levels: Vec<&[u32]> = hierarchy
        .levels
        .iter()
        .map(|l| l.assignment.as_slice())
        .collect();
    write_assignments(path, &levels, format)
}

pub fn write_assignments(
    path: impl AsRef<Path>,
    levels: &[impl AsRef<[u32]>],
    format: PartitionFormat,
) -> Result<()> {
    let path = path.as_ref();
    if levels.is_empty() {
        return Err(Error::invalid("cannot write an empty hierarchy"));
    }
    let n = levels[0].as_ref().len();
    if levels.iter().any(|l| l.as_ref().len() != n) {
        return Err(Error::invalid("hierarchy levels cover different point counts"));
    }
    if levels.len() > u8::MAX as usize {
        return Err(Error::invalid("more than 255 hierarchy levels"));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let result = match format {
        PartitionFormat::Csv => write_csv(&mut w, levels, n),
        PartitionFormat::Binary => write_binary(&mut w, levels, n),
    };
    result.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_csv<W: Write>(w: &mut W, levels: &[impl AsRef<[u32]>], n: usize) -> std::io::Result<()> {
    write!(w, "point_id")?;
    for l in 0..levels.len() {
        write!(w, ",level{l}")?;
    }
    writeln!(w)?;
    for p in 0..n {
        write!(w, "{p}")?;
        for level in levels {
            write!(w, ",{}", level.as_ref()[p])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn write_binary<W: Write>(w: &mut W, levels: &[impl AsRef<[u32]>], n: usize) -> std::io::Result<()> {
    w.write_all(PARTITION_MAGIC)?;
    w.write_all(&(n as u32).to_le_bytes())?;
    w.write_all(&[levels.len() as u8, 0, 0, 0])?;
    for p in 0..n {
        for level in levels {
            w.write_all(&level.as_ref()[p].to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a partition file in either format; returns one assignment per level.
pub fn read_partition(path: impl AsRef<Path>) -> Result<Vec<Vec<u32>>> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(PARTITION_MAGIC) {
        parse_binary(&bytes)
    } else {
        parse_csv(BufReader::new(bytes.as_slice()))
    }
}

fn parse_binary(bytes: &[u8]) -> Result<Vec<Vec<u32>>> {
    if bytes.len() < 16 {
        return Err(Error::Parse {
            line: 0,
            message: "binary partition header truncated".into(),
        });
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let l = bytes[12] as usize;
    let body = &bytes[16..];
    if body.len() != n * l * 4 {
        return Err(Error::Parse {
            line: 0,
            message: format!("expected {} payload bytes, found {}", n * l * 4, body.len()),
        });
    }
    let mut levels = vec![Vec::with_capacity(n); l];
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        levels[i % l].push(u32::from_le_bytes(chunk.try_into().unwrap()));
    }
    Ok(levels)
}

fn parse_csv<R: BufRead>(reader: R) -> Result<Vec<Vec<u32>>> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(h))) => h,
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing CSV header".into(),
            })
        }
    };
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.first() != Some(&"point_id") || cols.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "header must be 'point_id,level0,...'".into(),
        });
    }
    let n_levels = cols.len() - 1;
    let mut levels: Vec<Vec<u32>> = vec![Vec::new(); n_levels];
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        let bad = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        if fields.len() != n_levels + 1 {
            return Err(bad(format!("expected {} fields", n_levels + 1)));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| bad(format!("bad point id '{}'", fields[0])))?;
        if id != levels[0].len() {
            return Err(bad(format!("point ids must be consecutive, found {id}")));
        }
        for (level, f) in levels.iter_mut().zip(&fields[1..]) {
            level.push(f.parse().map_err(|_| bad(format!("bad component id '{f}'")))?);
        }
    }
    Ok(levels)
}
