//! `RNNP` checkpoints: magic, `u32` version, `u64` m, d, L, seed, then
//! `W`, `A`, `B`, `M0` as row-major little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::params::RnnParams;
use crate::binfmt::*;
use crate::error::{LabError, Result};

pub const MAGIC: &[u8; 4] = b"RNNP";

pub fn write_params<W: Write>(w: &mut W, p: &RnnParams) -> Result<()> {
    write_header(w, MAGIC)?;
    write_u64(w, p.m as u64)?;
    write_u64(w, p.d as u64)?;
    write_u64(w, p.len as u64)?;
    write_u64(w, p.seed)?;
    write_f64s(w, &p.w)?;
    write_f64s(w, &p.a)?;
    write_f64s(w, &p.b)?;
    write_f64s(w, &p.m0)?;
    Ok(())
}

pub fn read_params<R: Read>(r: &mut R) -> Result<RnnParams> {
    read_header(r, MAGIC)?;
    let m = read_usize(r, "m")?;
    let d = read_usize(r, "d")?;
    let len = read_usize(r, "L")?;
    let seed = read_u64(r)?;
    let mm = m.checked_mul(m).ok_or_else(|| LabError::Format("m too large".into()))?;
    let w = read_f64s(r, mm)?;
    let a = read_f64s(r, m * d)?;
    let b = read_f64s(r, m)?;
    let m0 = read_f64s(r, m)?;
    expect_eof(r)?;
    RnnParams::from_parts(d, len, seed, w, a, b, m0)
}

pub fn save_params(path: &Path, p: &RnnParams) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_params(&mut w, p)?;
    w.flush()?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<RnnParams> {
    read_params(&mut BufReader::new(File::open(path)?))
}
