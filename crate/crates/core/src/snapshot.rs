//! Little-endian read/write helpers shared by the binary snapshot formats.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::time::Time;

pub fn write_u8(w: &mut impl Write, v: u8) -> Result<()> {
    w.write_all(&[v])?;
    Ok(())
}

pub fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_i64(w: &mut impl Write, v: i64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_bits().to_le_bytes())?;
    Ok(())
}

pub fn write_time(w: &mut impl Write, t: Time) -> Result<()> {
    write_i64(w, t.numer())?;
    write_i64(w, t.denom())
}

pub fn read_u8(r: &mut impl Read) -> Result<u8> {
    let mut buf = [0u8; 1];
    r.read_exact(&mut buf)?;
    Ok(buf[0])
}

pub fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_i64(r: &mut impl Read) -> Result<i64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(i64::from_le_bytes(buf))
}

pub fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

pub fn read_time(r: &mut impl Read) -> Result<Time> {
    let num = read_i64(r)?;
    let den = read_i64(r)?;
    if den <= 0 {
        return Err(Error::Snapshot(format!("invalid time denominator {den}")));
    }
    Ok(Time::new(num, den))
}

pub fn expect_magic(r: &mut impl Read, magic: &[u8; 8]) -> Result<()> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    if &buf != magic {
        return Err(Error::Snapshot(format!(
            "bad magic: expected {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&buf)
        )));
    }
    Ok(())
}

pub fn expect_version(r: &mut impl Read, version: u32) -> Result<()> {
    let v = read_u32(r)?;
    if v != version {
        return Err(Error::Snapshot(format!(
            "unsupported snapshot version {v} (expected {version})"
        )));
    }
    Ok(())
}

/// Reads a length field and guards against absurd allocations from corrupt data.
pub fn read_len(r: &mut impl Read, what: &str) -> Result<usize> {
    let v = read_u64(r)?;
    if v > (1 << 40) {
        return Err(Error::Snapshot(format!("implausible {what} count {v}")));
    }
    Ok(v as usize)
}
