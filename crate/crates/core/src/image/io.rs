//! 8-bit grayscale PGM (binary `P5`) and PNG codecs.
//!
//! Masks share the same container: `0` is missing, anything else observed.
//! Mask files are written with `255` for observed pixels.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{ImageGrid, MaskGrid};
use crate::error::{Error, Result};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

/// Reads an 8-bit grayscale PGM or PNG. The format is sniffed from the
/// file contents, not the extension.
pub fn read_image(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let mut bytes = Vec::new();
    File::open(path.as_ref())?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

/// Writes `image` as PNG when the extension is `.png`, PGM otherwise.
/// Values are clamped to `[0, 255]` and rounded half-to-even.
pub fn write_image(path: impl AsRef<Path>, image: &ImageGrid) -> Result<()> {
    let bytes: Vec<u8> = image.pixels().iter().map(|&v| quantize(v)).collect();
    write_bytes(path.as_ref(), image.height(), image.width(), &bytes)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<MaskGrid> {
    let img = read_image(path)?;
    let bits = img.pixels().iter().map(|&v| v > 0.0).collect();
    MaskGrid::new(img.height(), img.width(), bits)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &MaskGrid) -> Result<()> {
    let bytes: Vec<u8> = mask
        .bits()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect();
    write_bytes(path.as_ref(), mask.height(), mask.width(), &bytes)
}

fn quantize(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round_ties_even() as u8
}

fn write_bytes(path: &Path, height: usize, width: usize, bytes: &[u8]) -> Result<()> {
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let mut out = BufWriter::new(File::create(path)?);
    if is_png {
        encode_png(&mut out, height, width, bytes)?;
    } else {
        write!(out, "P5\n{width} {height}\n255\n")?;
        out.write_all(bytes)?;
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn decode(bytes: &[u8]) -> Result<ImageGrid> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else if bytes.starts_with(b"P6") || bytes.starts_with(b"P3") {
        Err(Error::Unsupported("color PPM input".into()))
    } else {
        Err(Error::Malformed(
            "expected a binary PGM (P5) or PNG signature".into(),
        ))
    }
}

/// Cursor over PNM header tokens, skipping whitespace and `#` comments.
struct HeaderTokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderTokens<'a> {
    fn next_number(&mut self, what: &str) -> Result<usize> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Malformed(format!(
                "PGM header is missing the {what}"
            )));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Malformed(format!("PGM {what} is not a valid number")))
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<ImageGrid> {
    let mut tokens = HeaderTokens { bytes, pos: 2 };
    let width = tokens.next_number("width")?;
    let height = tokens.next_number("height")?;
    let maxval = tokens.next_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Malformed(format!(
            "PGM has empty size {width}x{height}"
        )));
    }
    if maxval == 0 {
        return Err(Error::Malformed("PGM maxval must be positive".into()));
    }
    if maxval > 255 {
        return Err(Error::Unsupported(format!(
            "16-bit PGM (maxval {maxval}); only 8-bit input is accepted"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(tokens.pos) {
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return Err(Error::Malformed("PGM header is not terminated".into())),
    }
    let data = &bytes[tokens.pos + 1..];
    let n = width * height;
    if data.len() < n {
        return Err(Error::Malformed(format!(
            "PGM raster holds {} bytes, expected {n}",
            data.len()
        )));
    }
    let scale = 255.0 / maxval as f64;
    let pixels = data[..n]
        .iter()
        .map(|&b| {
            if maxval == 255 {
                b as f64
            } else {
                (b.min(maxval as u8) as f64 * scale).round()
            }
        })
        .collect();
    ImageGrid::new(height, width, pixels)
}

fn decode_png(bytes: &[u8]) -> Result<ImageGrid> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Malformed(format!("PNG: {e}")))?;
    let info = reader.info();
    let (width, height) = (info.width as usize, info.height as usize);
    match info.color_type {
        png::ColorType::Grayscale => {}
        other => {
            return Err(Error::Unsupported(format!(
                "PNG color type {other:?}; only grayscale is accepted"
            )))
        }
    }
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Unsupported(format!(
            "PNG bit depth {:?}; only 8-bit is accepted",
            info.bit_depth
        )));
    }
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(width * height)];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Malformed(format!("PNG: {e}")))?;
    let line = frame.line_size;
    let mut pixels = Vec::with_capacity(width * height);
    for r in 0..height {
        pixels.extend(buf[r * line..r * line + width].iter().map(|&b| b as f64));
    }
    ImageGrid::new(height, width, pixels)
}

fn encode_png(out: &mut impl Write, height: usize, width: usize, bytes: &[u8]) -> Result<()> {
    let mut encoder = png::Encoder::new(out, width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writer
        .write_image_data(bytes)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_reference_pgm() {
        let mut bytes = b"P5 2 2 255\n".to_vec();
        bytes.extend([0u8, 64, 128, 255]);
        let img = decode(&bytes).unwrap();
        assert_eq!(img.shape(), (2, 2));
        assert_eq!(img.pixels(), &[0.0, 64.0, 128.0, 255.0]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# made by hand\n3 1\n# depth\n255\n".to_vec();
        bytes.extend([1u8, 2, 3]);
        let img = decode(&bytes).unwrap();
        assert_eq!(img.shape(), (1, 3));
        assert_eq!(img.pixels(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn rejects_sixteen_bit_pgm() {
        let mut bytes = b"P5 1 1 65535\n".to_vec();
        bytes.extend([0u8, 1]);
        assert!(matches!(decode(&bytes), Err(Error::Unsupported(_))));
    }

    #[test]
    fn rejects_truncated_and_garbage() {
        assert!(matches!(
            decode(b"P5 4 4 255\n\x00\x01"),
            Err(Error::Malformed(_))
        ));
        assert!(matches!(decode(b"P5 4"), Err(Error::Malformed(_))));
        assert!(matches!(decode(b"GIF89a"), Err(Error::Malformed(_))));
        assert!(matches!(
            decode(b"P6 1 1 255\n\x00\x00\x00"),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn quantize_rounds_half_to_even_and_clamps() {
        assert_eq!(quantize(0.5), 0);
        assert_eq!(quantize(1.5), 2);
        assert_eq!(quantize(2.5), 2);
        assert_eq!(quantize(-7.0), 0);
        assert_eq!(quantize(300.0), 255);
    }

    #[test]
    fn rejects_color_png() {
        let mut bytes = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut bytes, 1, 1);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[1, 2, 3]).unwrap();
        }
        assert!(matches!(decode(&bytes), Err(Error::Unsupported(_))));
    }
}
