//! Netpbm (PGM/PPM) reading and writing, plus a lossless plain-text map format.
//!
//! Supported magic numbers are `P2`/`P5` (grayscale) and `P3`/`P6` (RGB) with
//! `maxval` up to 65535. Samples wider than one byte are big-endian. Header
//! tokens may be separated by any run of whitespace and `#` comments.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::map::{Image, SaliencyMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    Binary,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Pnm {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&b) = self.bytes.get(self.pos) {
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    /// Reads the next decimal token, returning its start offset and value.
    fn number(&mut self, what: &str) -> Result<(usize, u32)> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value * 10 + u64::from(b - b'0');
            if value > u64::from(u32::MAX) {
                return Err(Error::Pnm {
                    offset: start,
                    message: format!("{what} is too large"),
                });
            }
            self.pos += 1;
        }
        if self.pos == start {
            return Err(match self.bytes.get(self.pos) {
                None => self.err(format!("truncated: expected {what}")),
                Some(b) => self.err(format!("expected {what}, found byte 0x{b:02x}")),
            });
        }
        // a token must end at whitespace, a comment or end of input
        if let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_whitespace() && b != b'#' {
                return Err(self.err(format!("malformed {what}: unexpected byte 0x{b:02x}")));
            }
        }
        Ok((start, value as u32))
    }
}

/// Decodes a PGM or PPM byte stream into an [`Image`] scaled to `[0, 1]`.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    let (channels, encoding) = match bytes.get(..2) {
        Some(b"P2") => (1, Encoding::Ascii),
        Some(b"P3") => (3, Encoding::Ascii),
        Some(b"P5") => (1, Encoding::Binary),
        Some(b"P6") => (3, Encoding::Binary),
        Some(m) => {
            return Err(Error::Pnm {
                offset: 0,
                message: format!("unsupported magic number {:?}", String::from_utf8_lossy(m)),
            })
        }
        None => {
            return Err(Error::Pnm {
                offset: bytes.len(),
                message: "truncated: missing magic number".into(),
            })
        }
    };
    let mut cur = Cursor { bytes, pos: 2 };
    match cur.bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() || *b == b'#' => {}
        Some(_) => return Err(cur.err("malformed header: magic number not followed by whitespace")),
        None => return Err(cur.err("truncated: header ends after magic number")),
    }
    let header_start = cur.pos;
    let width = cur.number("width")?.1 as usize;
    let height = cur.number("height")?.1 as usize;
    let (maxval_at, maxval) = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Pnm {
            offset: header_start,
            message: format!("invalid dimensions {width}x{height}"),
        });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Pnm {
            offset: maxval_at,
            message: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| cur.err("image dimensions overflow"))?;
    let scale = f64::from(maxval);
    let mut values = Vec::with_capacity(count);

    match encoding {
        Encoding::Ascii => {
            for _ in 0..count {
                let (at, s) = cur.number("sample")?;
                if s > maxval {
                    return Err(Error::Pnm {
                        offset: at,
                        message: format!("sample {s} exceeds maxval {maxval}"),
                    });
                }
                values.push(f64::from(s) / scale);
            }
        }
        Encoding::Binary => {
            match cur.bytes.get(cur.pos) {
                Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
                Some(_) => {
                    return Err(
                        cur.err("malformed header: expected single whitespace before raster")
                    )
                }
                None => return Err(cur.err("truncated: missing raster")),
            }
            let wide = maxval > 255;
            let sample_bytes = if wide { 2 } else { 1 };
            let needed = count * sample_bytes;
            let available = bytes.len() - cur.pos;
            if available < needed {
                return Err(Error::Pnm {
                    offset: bytes.len(),
                    message: format!("truncated raster: need {needed} bytes, found {available}"),
                });
            }
            let raster = &bytes[cur.pos..cur.pos + needed];
            for (k, chunk) in raster.chunks_exact(sample_bytes).enumerate() {
                let s = if wide {
                    u32::from(u16::from_be_bytes([chunk[0], chunk[1]]))
                } else {
                    u32::from(chunk[0])
                };
                if s > maxval {
                    return Err(Error::Pnm {
                        offset: cur.pos + k * sample_bytes,
                        message: format!("sample {s} exceeds maxval {maxval}"),
                    });
                }
                values.push(f64::from(s) / scale);
            }
        }
    }
    Image::new(width, height, channels, values)
}

/// Reads a PGM/PPM file.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
    decode_image(&bytes).map_err(|e| e.in_file(path))
}

fn quantize(v: f64, maxval: u16) -> u16 {
    (v * f64::from(maxval)).round() as u16
}

/// Encodes `img` as binary PGM (1 channel) or PPM (3 channels).
pub fn encode_image(img: &Image, maxval: u16) -> Result<Vec<u8>> {
    let magic = match img.channels() {
        1 => "P5",
        3 => "P6",
        c => {
            return Err(Error::param(
                "channels",
                format!("{c} channels cannot be stored as PGM/PPM"),
            ))
        }
    };
    if maxval == 0 {
        return Err(Error::param("maxval", "must be at least 1"));
    }
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", img.width(), img.height()).into_bytes();
    if maxval > 255 {
        out.reserve(img.values().len() * 2);
        for &v in img.values() {
            out.extend_from_slice(&quantize(v, maxval).to_be_bytes());
        }
    } else {
        out.extend(img.values().iter().map(|&v| quantize(v, maxval) as u8));
    }
    Ok(out)
}

/// Writes `img` as an 8-bit binary PGM/PPM.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_image(img, 255)?;
    fs::write(path, bytes).map_err(|e| Error::from(e).in_file(path))
}

/// Encodes a map as P5 with maxval 255; `v` becomes `round(v * 255)`.
pub fn encode_map(map: &SaliencyMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    out.extend(map.values().iter().map(|&v| quantize(v, 255) as u8));
    out
}

pub fn save_map(map: &SaliencyMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_map(map)).map_err(|e| Error::from(e).in_file(path))
}

/// Loads a PGM/PPM file as a saliency map; colour files are channel-averaged.
pub fn load_map(path: impl AsRef<Path>) -> Result<SaliencyMap> {
    Ok(SaliencyMap::from_image(&load_image(path)?))
}

const RAW_MAGIC: &str = "salient-map-raw";

/// Lossless text encoding: a `salient-map-raw W H` line followed by one line of
/// shortest round-trip decimals per row.
pub fn encode_map_raw(map: &SaliencyMap) -> String {
    let mut out = format!("{RAW_MAGIC} {} {}\n", map.width(), map.height());
    for row in map.values().chunks(map.width()) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn decode_map_raw(text: &str) -> Result<SaliencyMap> {
    let mut tokens = text.split_ascii_whitespace();
    let bad = |message: &str| Error::Config {
        line: 1,
        message: message.to_string(),
    };
    if tokens.next() != Some(RAW_MAGIC) {
        return Err(bad("missing raw map header"));
    }
    let mut dim = || -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad raw map dimensions"))
    };
    let width = dim()?;
    let height = dim()?;
    let values = tokens
        .map(|t| {
            t.parse::<f64>().map_err(|_| Error::Config {
                line: 0,
                message: format!("bad raw map value {t:?}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SaliencyMap::new(width, height, values)
}

pub fn save_map_raw(map: &SaliencyMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_map_raw(map)).map_err(|e| Error::from(e).in_file(path))
}

pub fn load_map_raw(path: impl AsRef<Path>) -> Result<SaliencyMap> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    decode_map_raw(&text).map_err(|e| e.in_file(path))
}
