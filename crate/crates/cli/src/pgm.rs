//! Binary PGM (P5, maxval 255) output and image-grid tiling.

use crate::errors::CliError;
use std::path::Path;
use wae_core::tensor::Tensor;

pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub bytes: Vec<u8>,
}

pub fn write_pgm(path: &Path, img: &Pgm) -> Result<(), CliError> {
    assert_eq!(img.bytes.len(), img.width * img.height);
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.bytes);
    std::fs::write(path, out).map_err(|e| CliError::io("writing pgm", e))
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Tiles row-major images (one per matrix row) into a rows×cols grid with
/// a 1-pixel black separator.
pub fn tile_grid(images: &Tensor, grid_rows: usize, grid_cols: usize, h: usize, w: usize) -> Pgm {
    assert_eq!(images.cols(), h * w, "image row length");
    let gap = 1usize;
    let width = grid_cols * w + (grid_cols.saturating_sub(1)) * gap;
    let height = grid_rows * h + (grid_rows.saturating_sub(1)) * gap;
    let mut bytes = vec![0u8; width * height];
    for tile in 0..grid_rows * grid_cols {
        if tile >= images.rows() {
            break;
        }
        let (gr, gc) = (tile / grid_cols, tile % grid_cols);
        let (oy, ox) = (gr * (h + gap), gc * (w + gap));
        let img = images.row(tile);
        for r in 0..h {
            for c in 0..w {
                bytes[(oy + r) * width + ox + c] = to_byte(img[r * w + c]);
            }
        }
    }
    Pgm {
        width,
        height,
        bytes,
    }
}

/// Side length when rows of length d are square images at least 3×3.
pub fn square_image_side(d: usize) -> Option<usize> {
    let s = (d as f64).sqrt().round() as usize;
    (s >= 3 && s * s == d).then_some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout_and_header() {
        let imgs = Tensor::matrix(2, 4, vec![0.0, 1.0, 0.5, 0.25, 1.0, 1.0, 0.0, 0.0]).unwrap();
        let g = tile_grid(&imgs, 1, 2, 2, 2);
        assert_eq!((g.width, g.height), (5, 2));
        assert_eq!(g.bytes[0], 0);
        assert_eq!(g.bytes[1], 255);
        // Separator column stays black.
        assert_eq!(g.bytes[2], 0);
        assert_eq!(g.bytes[3], 255);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.pgm");
        write_pgm(&p, &g).unwrap();
        let data = std::fs::read(&p).unwrap();
        assert!(data.starts_with(b"P5\n5 2\n255\n"));
        assert_eq!(data.len(), 11 + 10);
    }

    #[test]
    fn square_side_detection() {
        assert_eq!(square_image_side(784), Some(28));
        assert_eq!(square_image_side(2), None);
        assert_eq!(square_image_side(4), None); // 2×2 is below the 3×3 floor
    }
}
