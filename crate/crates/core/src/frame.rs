//! 8-bit grayscale frames and binary PGM (P5) encoding.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Dim {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(GrayFrame {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayFrame {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        GrayFrame {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Mirrors the frame about its vertical axis: (x, y) -> (W-1-x, y).
    pub fn flip_horizontal(&self) -> GrayFrame {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for row in self.pixels.chunks_exact(self.width.max(1)) {
            pixels.extend(row.iter().rev());
        }
        GrayFrame {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    pub fn invert(&self) -> GrayFrame {
        GrayFrame {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| 255 - p).collect(),
        }
    }

    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode_pgm(bytes: &[u8], context: &str) -> Result<GrayFrame> {
        let mut cursor = 0usize;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // skip whitespace and comments
            while cursor < bytes.len() {
                match bytes[cursor] {
                    b'#' => {
                        while cursor < bytes.len() && bytes[cursor] != b'\n' {
                            cursor += 1;
                        }
                    }
                    c if c.is_ascii_whitespace() => cursor += 1,
                    _ => break,
                }
            }
            let start = cursor;
            while cursor < bytes.len() && !bytes[cursor].is_ascii_whitespace() {
                cursor += 1;
            }
            if start == cursor {
                return Err(Error::format(context, "truncated PGM header"));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..cursor]).into_owned());
        }
        // exactly one whitespace byte separates the header from the raster
        cursor += 1;
        if fields[0] != "P5" {
            return Err(Error::format(
                context,
                format!("unsupported magic {:?}", fields[0]),
            ));
        }
        let parse = |s: &str, what: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::format(context, format!("bad {what} {s:?}")))
        };
        let width = parse(&fields[1], "width")?;
        let height = parse(&fields[2], "height")?;
        let maxval = parse(&fields[3], "maxval")?;
        if maxval != 255 {
            return Err(Error::format(context, format!("maxval {maxval} != 255")));
        }
        let raster = bytes.get(cursor..).unwrap_or(&[]);
        if raster.len() != width * height {
            return Err(Error::format(
                context,
                format!(
                    "raster has {} bytes, header implies {}",
                    raster.len(),
                    width * height
                ),
            ));
        }
        Ok(GrayFrame {
            width,
            height,
            pixels: raster.to_vec(),
        })
    }

    pub fn read_pgm(path: &Path) -> Result<GrayFrame> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        GrayFrame::decode_pgm(&bytes, &path.display().to_string())
    }
}
