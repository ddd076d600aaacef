//! SQGF1 snapshot files.
//!
//! Layout: `b"SQGF1"`, u32 LE `K`, u32 LE flags, then `(2K+1)^2` coefficients in
//! row-major order (`k1 = -K..K` outer, `k2 = -K..K` inner). Flag bit 0 marks a
//! mean-free field; bit 1 marks f64 (re, im) pairs, otherwise pairs are f32.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{SpectralError, SpectralField};

pub const MAGIC: &[u8; 5] = b"SQGF1";
pub const FLAG_MEAN_FREE: u32 = 1;
pub const FLAG_F64: u32 = 2;

pub fn write_field(w: &mut impl Write, f: &SpectralField) -> Result<(), SpectralError> {
    let k = f.max_freq();
    let mut flags = FLAG_F64;
    if f.is_mean_free() {
        flags |= FLAG_MEAN_FREE;
    }
    let mut buf = Vec::with_capacity(13 + 16 * (2 * k + 1).pow(2));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(k as u32).to_le_bytes());
    buf.extend_from_slice(&flags.to_le_bytes());
    for c in f.to_full() {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_field(r: &mut impl Read) -> Result<SpectralField, SpectralError> {
    let mut head = [0u8; 13];
    r.read_exact(&mut head)?;
    if &head[..5] != MAGIC {
        return Err(SpectralError::Format("bad magic, expected SQGF1".into()));
    }
    let k = u32::from_le_bytes(head[5..9].try_into().unwrap()) as usize;
    let flags = u32::from_le_bytes(head[9..13].try_into().unwrap());
    let n = (2 * k + 1).pow(2);
    let wide = flags & FLAG_F64 != 0;
    let mut body = vec![0u8; n * if wide { 16 } else { 8 }];
    r.read_exact(&mut body)?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(SpectralError::Format("trailing bytes after coefficient block".into()));
    }
    let full: Vec<Complex64> = if wide {
        body.chunks_exact(16)
            .map(|b| Complex64::new(f64::from_le_bytes(b[..8].try_into().unwrap()), f64::from_le_bytes(b[8..].try_into().unwrap())))
            .collect()
    } else {
        body.chunks_exact(8)
            .map(|b| {
                Complex64::new(
                    f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
                    f32::from_le_bytes(b[4..].try_into().unwrap()) as f64,
                )
            })
            .collect()
    };
    let field = SpectralField::from_full(k, &full, 0.0)?;
    if (flags & FLAG_MEAN_FREE != 0) != field.is_mean_free() {
        return Err(SpectralError::Format("mean-free flag disagrees with the zero coefficient".into()));
    }
    Ok(field)
}

pub fn save(path: impl AsRef<Path>, f: &SpectralField) -> Result<(), SpectralError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_field(&mut file, f)?;
    file.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<SpectralField, SpectralError> {
    let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_field(&mut file)
}
