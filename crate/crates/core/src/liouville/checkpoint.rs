//! Density-matrix checkpoint format: one ASCII header line
//! `BHRHO v1 L N hermitian` followed by dim^2 little-endian (re, im) f64
//! pairs in row-major order. Writing and reading round-trip bit-exactly.

use std::io::{BufRead, BufReader, Read, Write};

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::FockBasis;

pub fn write<W: Write>(
    mut w: W,
    basis: &FockBasis,
    data: &Array2<Complex64>,
    hermitian: bool,
) -> Result<()> {
    writeln!(
        w,
        "BHRHO v1 {} {} {}",
        basis.sites(),
        basis.particles(),
        u8::from(hermitian)
    )?;
    let mut buf = [0u8; 16];
    for z in data.iter() {
        buf[..8].copy_from_slice(&z.re.to_le_bytes());
        buf[8..].copy_from_slice(&z.im.to_le_bytes());
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read<R: Read>(r: R) -> Result<(usize, u32, bool, Array2<Complex64>)> {
    let mut reader = BufReader::new(r);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "BHRHO" || fields[1] != "v1" {
        return Err(Error::Checkpoint(format!("bad header: {}", header.trim_end())));
    }
    let sites: usize = fields[2]
        .parse()
        .map_err(|_| Error::Checkpoint("unparsable site count".into()))?;
    let particles: u32 = fields[3]
        .parse()
        .map_err(|_| Error::Checkpoint("unparsable particle count".into()))?;
    let hermitian = match fields[4] {
        "0" => false,
        "1" => true,
        other => return Err(Error::Checkpoint(format!("bad hermitian flag: {other}"))),
    };
    let dim = crate::fock::sector_dimension(sites, particles)
        .filter(|&d| d <= usize::MAX as u128)
        .ok_or_else(|| Error::Checkpoint("sector dimension overflow".into()))? as usize;

    let mut data = Array2::<Complex64>::zeros((dim, dim));
    let mut buf = [0u8; 16];
    for z in data.iter_mut() {
        reader.read_exact(&mut buf).map_err(|e| {
            Error::Checkpoint(format!("truncated payload ({e})"))
        })?;
        let re = f64::from_le_bytes(buf[..8].try_into().unwrap());
        let im = f64::from_le_bytes(buf[8..].try_into().unwrap());
        *z = Complex64::new(re, im);
    }
    let mut extra = [0u8; 1];
    if reader.read(&mut extra)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after payload".into()));
    }
    Ok((sites, particles, hermitian, data))
}
