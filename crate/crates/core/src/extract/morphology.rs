//! Thresholding and binary morphology with square structuring elements.
//!
//! Morphology follows unbounded-plane semantics: the image is treated as a
//! window onto an infinite canvas whose pixels outside the window are paper.
//! Closing therefore fills gaps touching the border exactly as it does in the
//! interior, and both closing and opening are idempotent.

use super::raster::{RasterImage, INK, PAPER};
use super::ExtractError;

/// `p < threshold` becomes ink (0), everything else paper (255).
pub fn binarize(img: &RasterImage, threshold: u8) -> RasterImage {
    let pixels = img
        .pixels()
        .iter()
        .map(|&p| if p < threshold { INK } else { PAPER })
        .collect();
    RasterImage::new(img.width(), img.height(), pixels).expect("same dimensions")
}

/// Summed-area table with a zero row/column prepended.
fn integral(mask: &[bool], w: usize, h: usize) -> Vec<u32> {
    let mut s = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0u32;
        for x in 0..w {
            row += mask[y * w + x] as u32;
            s[(y + 1) * (w + 1) + x + 1] = s[y * (w + 1) + x + 1] + row;
        }
    }
    s
}

/// Ink count in the (2r+1)² window around each pixel, clipped to the domain.
fn window_counts(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<u32> {
    let s = integral(mask, w, h);
    let mut out = vec![0u32; w * h];
    for y in 0..h {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r + 1).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(r);
            let x1 = (x + r + 1).min(w);
            out[y * w + x] = s[y1 * (w + 1) + x1] + s[y0 * (w + 1) + x0] - s[y0 * (w + 1) + x1] - s[y1 * (w + 1) + x0];
        }
    }
    out
}

fn dilate_mask(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    window_counts(mask, w, h, r).into_iter().map(|c| c > 0).collect()
}

/// Erosion where pixels outside the domain count as paper.
fn erode_mask(mask: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    let full = ((2 * r + 1) * (2 * r + 1)) as u32;
    window_counts(mask, w, h, r).into_iter().map(|c| c == full).collect()
}

/// Dilation followed by erosion; fills ink gaps narrower than 2r+1.
pub fn morphological_close(img: &RasterImage, kernel_radius: u32) -> Result<RasterImage, ExtractError> {
    img.require_binary()?;
    let (w, h, r) = (img.width() as usize, img.height() as usize, kernel_radius as usize);
    if r == 0 {
        return Ok(img.clone());
    }
    // Dilate on a canvas padded by r so the erosion can see ink that spilled
    // past the border; every erosion window of an in-image pixel then lies
    // inside the padded canvas.
    let (pw, ph) = (w + 2 * r, h + 2 * r);
    let mut padded = vec![false; pw * ph];
    let mask = img.ink_mask();
    for y in 0..h {
        padded[(y + r) * pw + r..(y + r) * pw + r + w].copy_from_slice(&mask[y * w..(y + 1) * w]);
    }
    let dilated = dilate_mask(&padded, pw, ph, r);
    let eroded = erode_mask(&dilated, pw, ph, r);
    let mut out = vec![false; w * h];
    for y in 0..h {
        out[y * w..(y + 1) * w].copy_from_slice(&eroded[(y + r) * pw + r..(y + r) * pw + r + w]);
    }
    Ok(RasterImage::from_ink_mask(img.width(), img.height(), &out))
}

/// Erosion followed by dilation; removes ink features narrower than 2r+1.
pub fn morphological_open(img: &RasterImage, kernel_radius: u32) -> Result<RasterImage, ExtractError> {
    img.require_binary()?;
    let (w, h, r) = (img.width() as usize, img.height() as usize, kernel_radius as usize);
    if r == 0 {
        return Ok(img.clone());
    }
    let eroded = erode_mask(&img.ink_mask(), w, h, r);
    let opened = dilate_mask(&eroded, w, h, r);
    Ok(RasterImage::from_ink_mask(img.width(), img.height(), &opened))
}
