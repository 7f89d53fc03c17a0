//! Raster plot emission: 2D scatters of particles against target atoms,
//! per-stage W1 curves, and grayscale tile montages for image atoms.
//! Rendering is deliberately primitive (filled squares on an RGB buffer);
//! outputs are deterministic byte-for-byte.

use std::path::Path;

use anyhow::Result;
use image::{Rgb, RgbImage};

const BG: Rgb<u8> = Rgb([255, 255, 255]);
const AXIS: Rgb<u8> = Rgb([180, 180, 180]);
const PARTICLE: Rgb<u8> = Rgb([46, 94, 170]);
const ATOM: Rgb<u8> = Rgb([200, 40, 40]);
const CURVE: Rgb<u8> = Rgb([46, 94, 170]);

fn blank(width: u32, height: u32) -> RgbImage {
    RgbImage::from_pixel(width, height, BG)
}

fn fill_square(img: &mut RgbImage, cx: i64, cy: i64, half: i64, color: Rgb<u8>) {
    for dy in -half..=half {
        for dx in -half..=half {
            let (x, y) = (cx + dx, cy + dy);
            if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
                img.put_pixel(x as u32, y as u32, color);
            }
        }
    }
}

/// Scatter of 2D particles (blue) and target atoms (red) over a common
/// data window with a thin frame.
pub fn scatter_2d(
    path: &Path,
    particles: &[Vec<f64>],
    atoms: &[Vec<f64>],
    size: u32,
) -> Result<()> {
    let mut img = blank(size, size);
    let pad = 20.0;
    let (mut lo_x, mut hi_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo_y, mut hi_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in particles.iter().chain(atoms) {
        lo_x = lo_x.min(p[0]);
        hi_x = hi_x.max(p[0]);
        lo_y = lo_y.min(p[1]);
        hi_y = hi_y.max(p[1]);
    }
    if !lo_x.is_finite() {
        (lo_x, hi_x, lo_y, hi_y) = (0.0, 1.0, 0.0, 1.0);
    }
    let span_x = (hi_x - lo_x).max(1e-9);
    let span_y = (hi_y - lo_y).max(1e-9);
    let scale = (size as f64 - 2.0 * pad) / span_x.max(span_y);
    let to_px = |p: &[f64]| {
        let x = pad + (p[0] - lo_x) * scale;
        let y = size as f64 - pad - (p[1] - lo_y) * scale;
        (x as i64, y as i64)
    };

    for k in 0..size {
        img.put_pixel(k, 0, AXIS);
        img.put_pixel(k, size - 1, AXIS);
        img.put_pixel(0, k, AXIS);
        img.put_pixel(size - 1, k, AXIS);
    }
    for p in particles {
        let (x, y) = to_px(p);
        fill_square(&mut img, x, y, 1, PARTICLE);
    }
    for a in atoms {
        let (x, y) = to_px(a);
        fill_square(&mut img, x, y, 3, ATOM);
    }
    save(img, path)
}

/// Line chart of a nonnegative series (one value per stage), y from 0.
pub fn line_chart(path: &Path, values: &[f64], width: u32, height: u32) -> Result<()> {
    let mut img = blank(width, height);
    let pad = 24.0;
    let vmax = values.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
    let n = values.len().max(2);
    let to_px = |i: usize, v: f64| {
        let x = pad + (width as f64 - 2.0 * pad) * i as f64 / (n - 1) as f64;
        let y = height as f64 - pad - (height as f64 - 2.0 * pad) * (v / vmax).clamp(0.0, 1.0);
        (x as i64, y as i64)
    };
    for k in 0..width {
        img.put_pixel(k, height - 24, AXIS);
    }
    for k in 0..height {
        img.put_pixel(24, k, AXIS);
    }
    let mut prev: Option<(i64, i64)> = None;
    for (i, &v) in values.iter().enumerate() {
        let (x, y) = to_px(i, v);
        fill_square(&mut img, x, y, 2, CURVE);
        if let Some((px, py)) = prev {
            draw_line(&mut img, px, py, x, y, CURVE);
        }
        prev = Some((x, y));
    }
    save(img, path)
}

fn draw_line(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgb<u8>) {
    let steps = (x1 - x0).abs().max((y1 - y0).abs()).max(1);
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let x = x0 + ((x1 - x0) as f64 * t) as i64;
        let y = y0 + ((y1 - y0) as f64 * t) as i64;
        fill_square(img, x, y, 0, color);
    }
}

/// Montage of grayscale images (values clamped to [0,1]), `cols` per row,
/// each pixel scaled up by `scale`.
pub fn tile_grid(
    path: &Path,
    images: &[&[f64]],
    side: usize,
    cols: usize,
    scale: usize,
) -> Result<()> {
    let cols = cols.max(1);
    let rows = images.len().div_ceil(cols);
    let gap = 2;
    let tile = side * scale + gap;
    let width = (cols * tile + gap) as u32;
    let height = (rows * tile + gap) as u32;
    let mut img = blank(width, height);
    for (k, data) in images.iter().enumerate() {
        let (r, c) = (k / cols, k % cols);
        let (ox, oy) = (gap + c * tile, gap + r * tile);
        for py in 0..side {
            for px in 0..side {
                let v = data[py * side + px].clamp(0.0, 1.0);
                let g = (v * 255.0).round() as u8;
                for sy in 0..scale {
                    for sx in 0..scale {
                        img.put_pixel(
                            (ox + px * scale + sx) as u32,
                            (oy + py * scale + sy) as u32,
                            Rgb([g, g, g]),
                        );
                    }
                }
            }
        }
    }
    save(img, path)
}

fn save(img: RgbImage, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_writes_deterministic_png() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.png");
        let b = dir.path().join("b.png");
        let particles = vec![vec![0.0, 0.0], vec![0.5, 0.5]];
        let atoms = vec![vec![1.0, 1.0]];
        scatter_2d(&a, &particles, &atoms, 200).unwrap();
        scatter_2d(&b, &particles, &atoms, 200).unwrap();
        let bytes_a = std::fs::read(&a).unwrap();
        assert!(!bytes_a.is_empty());
        assert_eq!(bytes_a, std::fs::read(&b).unwrap());
    }

    #[test]
    fn line_chart_handles_single_value() {
        let dir = tempfile::tempdir().unwrap();
        line_chart(&dir.path().join("c.png"), &[1.0], 300, 200).unwrap();
    }

    #[test]
    fn tile_grid_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let img1 = vec![0.0; 16];
        let img2 = vec![1.0; 16];
        tile_grid(&dir.path().join("t.png"), &[&img1, &img2], 4, 3, 4).unwrap();
    }
}
