//! Kernel matrix serialization: `i,j,value` CSV and the `NTKM` binary layout.
//!
//! Binary layout: magic `NTKM`, u32 version, u64 n, u32 kind code, then the
//! n×n entries row-major as f64, all little-endian.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::binfmt::{expect_eof, read_f64s, read_header, read_u32, read_usize, write_f64s, write_header, write_u32, write_u64};
use crate::error::{LabError, Result};
use crate::numerics::{KernelKind, KernelMatrix};

const MAGIC: &[u8; 4] = b"NTKM";

pub fn write_kernel_binary<W: Write>(w: &mut W, k: &KernelMatrix) -> Result<()> {
    write_header(w, MAGIC)?;
    write_u64(w, k.n() as u64)?;
    write_u32(w, k.kind().code())?;
    write_f64s(w, k.entries())
}

pub fn read_kernel_binary<R: Read>(r: &mut R) -> Result<KernelMatrix> {
    read_header(r, MAGIC)?;
    let n = read_usize(r, "n")?;
    let code = read_u32(r)?;
    let kind = KernelKind::from_code(code).ok_or_else(|| LabError::Format(format!("unknown kernel kind {code}")))?;
    let count = n.checked_mul(n).ok_or_else(|| LabError::Format("n too large".into()))?;
    let entries = read_f64s(r, count)?;
    expect_eof(r)?;
    KernelMatrix::from_row_major(n, entries, kind)
}

pub fn write_kernel_csv<W: Write>(w: &mut W, k: &KernelMatrix) -> Result<()> {
    writeln!(w, "i,j,value")?;
    let n = k.n();
    for i in 0..n {
        for j in 0..n {
            writeln!(w, "{i},{j},{:e}", k.get(i, j))?;
        }
    }
    Ok(())
}

/// Reads a CSV kernel; missing entries are an error, the kind is `Generic`.
pub fn read_kernel_csv<R: BufRead>(r: R) -> Result<KernelMatrix> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != "i,j,value" {
        return Err(LabError::Format("missing `i,j,value` header".into()));
    }
    let mut triples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || LabError::Format(format!("malformed kernel row {}: {line:?}", lineno + 2));
        let mut parts = line.split(',');
        let i: usize = parts.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        let j: usize = parts.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        let v: f64 = parts.next().and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        triples.push((i, j, v));
    }
    let n = triples.iter().map(|&(i, j, _)| i.max(j) + 1).max().unwrap_or(0);
    if triples.len() != n * n {
        return Err(LabError::Format(format!("expected {} entries, found {}", n * n, triples.len())));
    }
    let mut entries = vec![f64::NAN; n * n];
    for (i, j, v) in triples {
        entries[i * n + j] = v;
    }
    KernelMatrix::from_row_major(n, entries, KernelKind::Generic)
}

pub fn save_kernel(path: &Path, k: &KernelMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e == "csv") {
        write_kernel_csv(&mut w, k)?;
    } else {
        write_kernel_binary(&mut w, k)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_kernel(path: &Path) -> Result<KernelMatrix> {
    let r = BufReader::new(File::open(path)?);
    if path.extension().is_some_and(|e| e == "csv") {
        read_kernel_csv(r)
    } else {
        read_kernel_binary(&mut { r })
    }
}
