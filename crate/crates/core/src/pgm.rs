//! 8-bit binary PGM (P5) import/export.
//!
//! Phase fields map through the affine rule `phi = 2 * (pixel / 255) - 1`
//! on read and `pixel = round(255 * (phi + 1) / 2)` on write, clamping phi
//! into `[-1, 1]` before quantizing. Masks use 255 for damaged cells and 0
//! for intact ones.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{InpaintMask, PhaseField};

/// Map a pixel intensity to the phase scale.
#[inline]
pub fn pixel_to_phi(pixel: u8) -> f64 {
    2.0 * (pixel as f64 / 255.0) - 1.0
}

/// Map a phase value to a pixel intensity, clamping into the well range.
#[inline]
pub fn phi_to_pixel(phi: f64) -> u8 {
    let clamped = phi.clamp(-1.0, 1.0);
    (255.0 * (clamped + 1.0) / 2.0).round() as u8
}

pub fn write_field<W: Write>(field: &PhaseField, mut out: W) -> Result<()> {
    write!(out, "P5\n{} {}\n255\n", field.nx(), field.ny())?;
    let bytes: Vec<u8> = field.values().iter().map(|&v| phi_to_pixel(v)).collect();
    out.write_all(&bytes)?;
    Ok(())
}

pub fn read_field<R: Read>(reader: R) -> Result<PhaseField> {
    let (nx, ny, bytes) = read_p5(reader)?;
    let values = bytes.iter().map(|&b| pixel_to_phi(b)).collect();
    PhaseField::from_values(nx, ny, 1.0, 1.0, values)
}

pub fn write_mask<W: Write>(mask: &InpaintMask, mut out: W) -> Result<()> {
    write!(out, "P5\n{} {}\n255\n", mask.nx(), mask.ny())?;
    let bytes: Vec<u8> = mask
        .damaged_slice()
        .iter()
        .map(|&d| if d { 255 } else { 0 })
        .collect();
    out.write_all(&bytes)?;
    Ok(())
}

pub fn read_mask<R: Read>(reader: R) -> Result<InpaintMask> {
    let (nx, ny, bytes) = read_p5(reader)?;
    InpaintMask::from_damaged(nx, ny, bytes.iter().map(|&b| b >= 128).collect())
}

pub fn write_field_path<P: AsRef<Path>>(field: &PhaseField, path: P) -> Result<()> {
    write_field(field, std::fs::File::create(path)?)
}

pub fn read_field_path<P: AsRef<Path>>(path: P) -> Result<PhaseField> {
    read_field(std::fs::File::open(path)?)
}

pub fn write_mask_path<P: AsRef<Path>>(mask: &InpaintMask, path: P) -> Result<()> {
    write_mask(mask, std::fs::File::create(path)?)
}

pub fn read_mask_path<P: AsRef<Path>>(path: P) -> Result<InpaintMask> {
    read_mask(std::fs::File::open(path)?)
}

/// Parse a binary P5 stream: magic, comments, width/height/maxval, raster.
fn read_p5<R: Read>(mut reader: R) -> Result<(usize, usize, Vec<u8>)> {
    let mut data = Vec::new();
    reader.read_to_end(&mut data)?;
    if data.len() < 2 || &data[..2] != b"P5" {
        return Err(Error::Format {
            what: "PGM",
            detail: "missing P5 magic".into(),
        });
    }
    let mut pos = 2;
    let mut header = [0usize; 3];
    for slot in header.iter_mut() {
        *slot = read_header_int(&data, &mut pos)?;
    }
    let (width, height, maxval) = (header[0], header[1], header[2]);
    if maxval != 255 {
        return Err(Error::Format {
            what: "PGM",
            detail: format!("only maxval 255 is supported, got {maxval}"),
        });
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let needed = width * height;
    if data.len() < pos + needed {
        return Err(Error::Truncated {
            needed: pos + needed,
            found: data.len(),
        });
    }
    Ok((width, height, data[pos..pos + needed].to_vec()))
}

fn read_header_int(data: &[u8], pos: &mut usize) -> Result<usize> {
    // Skip whitespace and '#' comments.
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < data.len() && data[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if *pos == start {
        return Err(Error::Format {
            what: "PGM",
            detail: "expected integer in header".into(),
        });
    }
    std::str::from_utf8(&data[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(Error::Format {
            what: "PGM",
            detail: "unparseable header integer".into(),
        })
}
