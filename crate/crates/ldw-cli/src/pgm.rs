//! Minimal PGM (P2 ascii / P5 binary) reader and P5 writer.
//!
//! Header tokens may be separated by any whitespace and `#` comments. P5
//! samples are 1 byte up to maxval 255, 2 bytes big-endian above that.

use anyhow::{bail, Context, Result};
use std::path::Path;

use ldw_core::FeatureMap;

#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

impl Pgm {
    /// Grayscale map scaled to `[0, 1]` by the maxval.
    pub fn to_map(&self) -> Result<FeatureMap> {
        let scale = 1.0 / self.maxval as f64;
        let data = self.pixels.iter().map(|p| *p as f64 * scale).collect();
        Ok(FeatureMap::new(1, self.height, self.width, data)?)
    }
}

/// Quantize a single-channel map to 8-bit pixels: clamp to `[0, 1]`, then
/// round onto 0..=255.
pub fn map_to_pixels(map: &FeatureMap) -> Result<Vec<u8>> {
    if map.channels() != 1 {
        bail!("pgm output needs a single channel, got {}", map.channels());
    }
    Ok(map
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect())
}

pub fn decode(bytes: &[u8]) -> Result<Pgm> {
    let mut lexer = Lexer { bytes, pos: 0 };
    let magic = lexer.token().context("missing magic")?;
    let binary = match magic.as_slice() {
        b"P5" => true,
        b"P2" => false,
        other => bail!("not a pgm file (magic {:?})", String::from_utf8_lossy(other)),
    };
    let width = lexer.number().context("missing width")?;
    let height = lexer.number().context("missing height")?;
    let maxval = lexer.number().context("missing maxval")?;
    if width == 0 || height == 0 {
        bail!("degenerate image {width}x{height}");
    }
    if maxval == 0 || maxval > 65535 {
        bail!("maxval {maxval} out of range 1..=65535");
    }
    let maxval = maxval as u16;
    let count = width * height;

    let pixels = if binary {
        // exactly one whitespace byte separates the header from the raster
        lexer.skip_single_whitespace()?;
        let wide = maxval > 255;
        let raster = lexer.rest();
        let expected = count * if wide { 2 } else { 1 };
        if raster.len() != expected {
            bail!("raster holds {} bytes, expected {expected}", raster.len());
        }
        if wide {
            raster
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]))
                .collect()
        } else {
            raster.iter().map(|b| *b as u16).collect()
        }
    } else {
        let mut pixels = Vec::with_capacity(count);
        for _ in 0..count {
            pixels.push(lexer.number().context("raster ended early")? as u16);
        }
        if lexer.token().is_some() {
            bail!("trailing values after {count} pixels");
        }
        pixels
    };
    if let Some(p) = pixels.iter().find(|p| **p > maxval) {
        bail!("pixel value {p} exceeds maxval {maxval}");
    }
    Ok(Pgm {
        width,
        height,
        maxval,
        pixels,
    })
}

/// Binary P5 with maxval 255.
pub fn encode_p5(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        bail!(
            "pixel count {} does not match {width}x{height}",
            pixels.len()
        );
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<Pgm> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    decode(&bytes).with_context(|| format!("malformed pgm {}", path.display()))
}

pub fn write_file(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let bytes = encode_p5(width, height, pixels)?;
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

struct Lexer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    /// Next whitespace-delimited token, skipping `#` comments.
    fn token(&mut self) -> Option<Vec<u8>> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos >= self.bytes.len() {
                return None;
            }
            if self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            let start = self.pos;
            while self.pos < self.bytes.len()
                && !self.bytes[self.pos].is_ascii_whitespace()
                && self.bytes[self.pos] != b'#'
            {
                self.pos += 1;
            }
            return Some(self.bytes[start..self.pos].to_vec());
        }
    }

    fn number(&mut self) -> Result<usize> {
        let token = self.token().context("unexpected end of header")?;
        std::str::from_utf8(&token)
            .ok()
            .and_then(|s| s.parse().ok())
            .with_context(|| format!("bad number {:?}", String::from_utf8_lossy(&token)))
    }

    fn skip_single_whitespace(&mut self) -> Result<()> {
        if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
            Ok(())
        } else {
            bail!("missing whitespace after maxval")
        }
    }

    fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }
}
