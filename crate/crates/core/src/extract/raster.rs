use std::path::Path;

use super::ExtractError;

/// Foreground (ink) value of a binarized raster.
pub const INK: u8 = 0;
/// Background (paper) value of a binarized raster.
pub const PAPER: u8 = 255;

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ExtractError> {
        if width == 0 || height == 0 || (width as usize) * (height as usize) != pixels.len() {
            return Err(ExtractError::Dimensions {
                width,
                height,
                len: pixels.len(),
            });
        }
        Ok(RasterImage { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        assert!(width > 0 && height > 0, "raster dimensions must be positive");
        RasterImage {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = v;
    }

    pub fn is_binary(&self) -> bool {
        self.pixels.iter().all(|&p| p == INK || p == PAPER)
    }

    pub(crate) fn require_binary(&self) -> Result<(), ExtractError> {
        if self.is_binary() {
            Ok(())
        } else {
            Err(ExtractError::NonBinaryInput)
        }
    }

    /// Ink mask, `true` where the pixel is foreground.
    pub(crate) fn ink_mask(&self) -> Vec<bool> {
        self.pixels.iter().map(|&p| p == INK).collect()
    }

    pub(crate) fn from_ink_mask(width: u32, height: u32, mask: &[bool]) -> Self {
        RasterImage {
            width,
            height,
            pixels: mask.iter().map(|&m| if m { INK } else { PAPER }).collect(),
        }
    }

    /// Encodes as binary PGM (P5).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Decodes a binary PGM (P5) with maxval ≤ 255.
    pub fn from_pgm(bytes: &[u8]) -> Result<Self, ExtractError> {
        let bad = |m: &str| ExtractError::Decode(format!("PGM: {m}"));
        let mut pos = 0usize;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // skip whitespace and comments
            while pos < bytes.len() {
                if bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                } else if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    break;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
        }
        if fields[0] != "P5" {
            return Err(bad("only binary P5 is supported"));
        }
        let parse = |s: &str| s.parse::<u32>().map_err(|_| bad("bad header number"));
        let (w, h, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(bad("maxval must be in 1..=255"));
        }
        pos += 1; // single whitespace byte after maxval
        let n = w as usize * h as usize;
        let data = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated pixel data"))?;
        let pixels = if maxval == 255 {
            data.to_vec()
        } else {
            data.iter().map(|&p| ((p as u32 * 255) / maxval) as u8).collect()
        };
        RasterImage::new(w, h, pixels)
    }

    /// Loads a PGM (P5) or PNG file, converting PNG to grayscale.
    pub fn load(path: &Path) -> Result<Self, ExtractError> {
        let bytes = std::fs::read(path).map_err(|e| ExtractError::Io(format!("{}: {e}", path.display())))?;
        if bytes.starts_with(b"P5") {
            return RasterImage::from_pgm(&bytes);
        }
        let img = image::load_from_memory(&bytes).map_err(|e| ExtractError::Decode(e.to_string()))?;
        let luma = img.to_luma8();
        RasterImage::new(luma.width(), luma.height(), luma.into_raw())
    }

    /// Writes PGM when the extension is `.pgm`, PNG otherwise.
    pub fn save(&self, path: &Path) -> Result<(), ExtractError> {
        let io = |e: std::io::Error| ExtractError::Io(format!("{}: {e}", path.display()));
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
            return std::fs::write(path, self.to_pgm()).map_err(io);
        }
        let buf = image::GrayImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("dimensions validated at construction");
        buf.save(path).map_err(|e| ExtractError::Io(format!("{}: {e}", path.display())))
    }
}
