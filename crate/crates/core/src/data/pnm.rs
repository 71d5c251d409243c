//! Binary PGM (P5) and PPM (P6) codecs, 8-bit.

use std::path::Path;

use crate::engine::Tensor;
use crate::error::{Error, Result};

fn bad(detail: impl Into<String>) -> Error {
    Error::Format {
        what: "PNM image",
        detail: detail.into(),
    }
}

/// Maps `[0, 1]` to a byte by `round(x · 255)`, clipped.
pub fn quantize(x: f64) -> u8 {
    (x * 255.0).round().clamp(0.0, 255.0) as u8
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("expected {what} at byte {start}")))
    }
}

/// Decodes a P5 or P6 file into a `[c, h, w]` tensor scaled to `[0, 1]`.
pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(bad("expected magic P5 or P6")),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(bad(format!("maxval {maxval} unsupported; only 8-bit images are read")));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("missing whitespace after maxval"));
    }
    let raster = &bytes[cur.pos + 1..];
    let n = channels * width * height;
    if raster.len() < n {
        return Err(bad(format!("raster holds {} bytes, expected {n}", raster.len())));
    }
    let scale = maxval as f64;
    // interleaved RGB → planar channels
    let mut data = vec![0.0; n];
    for (i, &b) in raster[..n].iter().enumerate() {
        let (pixel, ch) = (i / channels, i % channels);
        data[ch * width * height + pixel] = (b as f64 / scale).min(1.0);
    }
    Tensor::new(vec![channels, height, width], data)
}

/// Encodes a `[1, h, w]` tensor as P5 or a `[3, h, w]` tensor as P6.
pub fn encode(image: &Tensor) -> Result<Vec<u8>> {
    let s = image.shape();
    if s.len() != 3 || !(s[0] == 1 || s[0] == 3) {
        return Err(bad(format!("can only encode [1,h,w] or [3,h,w], got {s:?}")));
    }
    let (c, h, w) = (s[0], s[1], s[2]);
    let magic = if c == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    let data = image.data();
    for pixel in 0..h * w {
        for ch in 0..c {
            out.push(quantize(data[ch * h * w + pixel]));
        }
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format { what, detail } => Error::Format {
            what,
            detail: format!("{}: {detail}", path.display()),
        },
        other => other,
    })
}

pub fn write(path: &Path, image: &Tensor) -> Result<()> {
    std::fs::write(path, encode(image)?).map_err(|e| Error::io(path, e))
}
