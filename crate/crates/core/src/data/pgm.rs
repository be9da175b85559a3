//! Binary greyscale PGM (`P5`, maxval 255) and colour PPM (`P6`) output.

use std::path::Path;

use crate::error::{Error, Position, Result};
use crate::features::GrayImage;

const KIND: &str = "PGM image";

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::malformed(KIND, Position::ByteOffset(start), format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| Error::malformed(KIND, Position::ByteOffset(start), format!("{what} out of range")))
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.get(..2) != Some(b"P5") {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(Error::malformed(
            KIND,
            Position::ByteOffset(0),
            format!("unsupported magic `{found}`, expected binary `P5`"),
        ));
    }
    let mut h = Header { bytes, pos: 2 };
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(Error::malformed(KIND, Position::ByteOffset(2), "expected whitespace after magic"));
    }
    let width = h.number("width")?;
    let height = h.number("height")?;
    h.skip_space_and_comments();
    let maxval_at = h.pos;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(Error::malformed(
            KIND,
            Position::ByteOffset(maxval_at),
            format!("maxval {maxval} unsupported, expected 255"),
        ));
    }
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::malformed(KIND, Position::ByteOffset(h.pos), "expected whitespace before pixel data"));
    }
    let data_start = h.pos + 1;
    if width == 0 || height == 0 {
        return Err(Error::malformed(KIND, Position::ByteOffset(0), format!("empty image {width}x{height}")));
    }
    let available = bytes.len() - data_start;
    let needed = width.checked_mul(height).filter(|&n| n <= available).ok_or_else(|| {
        Error::malformed(
            KIND,
            Position::ByteOffset(bytes.len()),
            format!("truncated payload: {width}x{height} needs more than the {available} bytes present"),
        )
    })?;
    GrayImage::new(width, height, bytes[data_start..data_start + needed].to_vec())
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

/// Binary `P6` image from row-major RGB triples.
pub fn encode_ppm(width: usize, height: usize, rgb: &[[u8; 3]]) -> Result<Vec<u8>> {
    if rgb.len() != width * height {
        return Err(Error::invalid(format!("{} pixels for a {width}x{height} image", rgb.len())));
    }
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend(rgb.iter().flatten());
    Ok(out)
}

pub fn load_image_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    parse_pgm(&super::read_bytes(path)?).map_err(|e| e.in_file(path))
}

pub fn save_image_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    super::write_bytes(path.as_ref(), &encode_pgm(img))
}
