//! Little-endian primitives shared by the binary model formats.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::{Error, Result};

pub fn write_magic<W: Write>(w: &mut W, magic: &[u8; 4]) -> Result<()> {
    w.write_all(magic)?;
    Ok(())
}

pub fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    if &buf != magic {
        return Err(Error::ModelFormat(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&buf),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

pub fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_u32::<LittleEndian>(v)?;
    Ok(())
}

pub fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(r.read_u32::<LittleEndian>()?)
}

pub fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_f64::<LittleEndian>(v)?;
    Ok(())
}

pub fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(r.read_f64::<LittleEndian>()?)
}

pub fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::ModelFormat(format!("bad utf-8 string: {e}")))
}

pub fn write_f32_slice<W: Write>(w: &mut W, values: &[f32]) -> Result<()> {
    for &v in values {
        w.write_f32::<LittleEndian>(v)?;
    }
    Ok(())
}

pub fn read_f32_vec<R: Read>(r: &mut R, len: usize) -> Result<Vec<f32>> {
    let mut out = vec![0.0f32; len];
    r.read_f32_into::<LittleEndian>(&mut out)?;
    Ok(out)
}

/// Pack a bit per flag, least-significant bit first.
pub fn write_bitmap<W: Write>(w: &mut W, bits: &[bool]) -> Result<()> {
    let mut byte = 0u8;
    for (i, &b) in bits.iter().enumerate() {
        if b {
            byte |= 1 << (i % 8);
        }
        if i % 8 == 7 {
            w.write_all(&[byte])?;
            byte = 0;
        }
    }
    if bits.len() % 8 != 0 {
        w.write_all(&[byte])?;
    }
    Ok(())
}

pub fn read_bitmap<R: Read>(r: &mut R, len: usize) -> Result<Vec<bool>> {
    let mut bytes = vec![0u8; len.div_ceil(8)];
    r.read_exact(&mut bytes)?;
    Ok((0..len).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
}
