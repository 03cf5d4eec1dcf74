//! Embedding matrices as `SUPEMBD1`, u32 rows, u32 columns, then f32
//! row-major little-endian values.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::EmbeddingMatrix;

pub const EMBEDDING_MAGIC: &[u8; 8] = b"SUPEMBD1";

pub fn write_embeddings(path: impl AsRef<Path>, matrix: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        w.write_all(EMBEDDING_MAGIC)?;
        w.write_all(&(matrix.rows() as u32).to_le_bytes())?;
        w.write_all(&(matrix.cols() as u32).to_le_bytes())?;
        for v in matrix.as_slice() {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Parse { line: 0, message };
    if bytes.len() < 16 || &bytes[..8] != EMBEDDING_MAGIC {
        return Err(bad("missing SUPEMBD1 header".into()));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != rows * cols * 4 {
        return Err(bad(format!(
            "expected {} payload bytes, found {}",
            rows * cols * 4,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    EmbeddingMatrix::new(values, rows, cols)
}
