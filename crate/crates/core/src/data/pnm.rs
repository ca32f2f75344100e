//! PGM (P2/P5) and PPM (P3/P6) decoding to normalized grayscale, plus
//! 8-bit binary encoders.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    GrayAscii,
    GrayBinary,
    RgbAscii,
    RgbBinary,
}

impl Kind {
    fn samples(self) -> usize {
        match self {
            Kind::GrayAscii | Kind::GrayBinary => 1,
            Kind::RgbAscii | Kind::RgbBinary => 3,
        }
    }
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.data.len() {
            let b = self.data[self.pos];
            if b == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.pos >= self.data.len() {
                malformed(format!("truncated while reading {what}"))
            } else {
                malformed(format!("expected a number for {what}"))
            });
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .expect("ascii digits")
            .parse::<u32>()
            .map_err(|_| malformed(format!("{what} out of range")))
    }
}

/// Luma weights applied to normalized RGB.
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Decode a PNM byte stream into a grayscale image in `[0, 1]`.
pub fn decode_pnm(data: &[u8]) -> Result<Image> {
    if data.len() < 2 || data[0] != b'P' {
        return Err(malformed("missing PNM magic"));
    }
    let kind = match data[1] {
        b'2' => Kind::GrayAscii,
        b'3' => Kind::RgbAscii,
        b'5' => Kind::GrayBinary,
        b'6' => Kind::RgbBinary,
        other => return Err(malformed(format!("unsupported PNM type P{}", other as char))),
    };
    let mut cur = Cursor { data, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(malformed(format!("degenerate size {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(malformed(format!("unsupported maxval {maxval}")));
    }
    let n = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(kind.samples()))
        .ok_or_else(|| malformed("image too large"))?;
    let scale = maxval as f64;
    let mut samples = Vec::with_capacity(n);
    match kind {
        Kind::GrayAscii | Kind::RgbAscii => {
            for _ in 0..n {
                let v = cur.number("sample")?;
                if v > maxval {
                    return Err(malformed(format!("sample {v} exceeds maxval {maxval}")));
                }
                samples.push(v as f64 / scale);
            }
        }
        Kind::GrayBinary | Kind::RgbBinary => {
            // exactly one whitespace byte separates header and payload
            match data.get(cur.pos) {
                Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
                _ => return Err(malformed("missing whitespace after header")),
            }
            let bytes_per = if maxval > 255 { 2 } else { 1 };
            let payload = &data[cur.pos..];
            if payload.len() < n * bytes_per {
                return Err(malformed(format!(
                    "truncated payload: need {} bytes, have {}",
                    n * bytes_per,
                    payload.len()
                )));
            }
            for i in 0..n {
                let v = if bytes_per == 2 {
                    u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]) as u32
                } else {
                    payload[i] as u32
                };
                if v > maxval {
                    return Err(malformed(format!("sample {v} exceeds maxval {maxval}")));
                }
                samples.push(v as f64 / scale);
            }
        }
    }
    let pixels = match kind.samples() {
        1 => samples,
        _ => samples.chunks_exact(3).map(|c| luma(c[0], c[1], c[2])).collect(),
    };
    Image::new(height, width, pixels)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    decode_pnm(&bytes)
}

/// Binary 8-bit PGM (P5).
pub fn encode_pgm(width: usize, height: usize, bytes: &[u8]) -> Result<Vec<u8>> {
    if bytes.len() != width * height {
        return Err(Error::Shape(format!("{width}x{height} PGM needs {} bytes", width * height)));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(bytes);
    Ok(out)
}

/// Binary 8-bit PPM (P6), `rgb` interleaved.
pub fn encode_ppm(width: usize, height: usize, rgb: &[u8]) -> Result<Vec<u8>> {
    if rgb.len() != width * height * 3 {
        return Err(Error::Shape(format!("{width}x{height} PPM needs {} bytes", width * height * 3)));
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    Ok(out)
}

/// Quantize `[0, 1]` pixels (clamped) to bytes.
pub fn quantize(image: &Image) -> Vec<u8> {
    image
        .pixels()
        .iter()
        .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

/// PGM of an image already in `[0, 1]`, without rescaling.
pub fn image_to_pgm(image: &Image) -> Vec<u8> {
    encode_pgm(image.width(), image.height(), &quantize(image)).expect("size matches")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p5_scaling() {
        let mut data = b"P5\n2 2\n255\n".to_vec();
        data.extend_from_slice(&[0, 255, 128, 64]);
        let img = decode_pnm(&data).unwrap();
        assert_eq!(img.pixels()[0], 0.0);
        assert_eq!(img.pixels()[1], 1.0);
        assert!((img.pixels()[2] - 0.50196).abs() < 1e-5);
        assert!((img.pixels()[3] - 0.25098).abs() < 1e-5);
    }

    #[test]
    fn ascii_formats_with_comments() {
        let img = decode_pnm(b"P3\n# white\n1 1\n255\n255 255 255\n").unwrap();
        assert!((img.pixels()[0] - 1.0).abs() < 1e-15);
        let img = decode_pnm(b"P2 2 1 # c\n 4\n0 4").unwrap();
        assert_eq!(img.pixels(), &[0.0, 1.0]);
    }

    #[test]
    fn p6_red_is_luma_weight() {
        let mut data = b"P6 1 1 255\n".to_vec();
        data.extend_from_slice(&[255, 0, 0]);
        assert!((decode_pnm(&data).unwrap().pixels()[0] - 0.299).abs() < 1e-15);
    }

    #[test]
    fn sixteen_bit_payload() {
        let mut data = b"P5 1 1 65535\n".to_vec();
        data.extend_from_slice(&[0x80, 0x00]);
        assert!((decode_pnm(&data).unwrap().pixels()[0] - 32768.0 / 65535.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(decode_pnm(b"P7 1 1 255\n\0").is_err());
        assert!(decode_pnm(b"P5 2 2 255\n\0\0").is_err());
        assert!(decode_pnm(b"P5 1 1 0\n\0").is_err());
        assert!(decode_pnm(b"P5 1 1 70000\n\0").is_err());
        assert!(decode_pnm(b"P5 x 1 255\n\0").is_err());
        assert!(decode_pnm(b"P2 1 1 10 11").is_err());
        assert!(decode_pnm(b"P5 1").is_err());
    }
}
