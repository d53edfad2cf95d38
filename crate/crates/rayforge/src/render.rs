//! Deterministic escape-time rasterization with optional ray/periodic-point
//! overlays. Output is binary PGM (P5) for plain escape rasters and PPM
//! (P6) when overlays are present; both use a single whitespace-separated
//! header so files are byte-comparable across runs and thread counts.

use crate::geometry::Rect;
use crate::map::MapSpec;
use crate::periodic::PeriodicPointRecord;
use num_complex::Complex64;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const MAX_DIMENSION: usize = 16_384;

#[derive(Debug, Clone)]
pub enum Overlay {
    /// Polyline drawn in red, 1 px wide.
    Ray(Vec<Complex64>),
    /// 3×3 px squares drawn in green.
    Points(Vec<PeriodicPointRecord>),
}

#[derive(Debug, Clone)]
pub struct RenderConfig {
    pub viewport: Rect,
    pub width: usize,
    pub height: usize,
    pub max_iter: usize,
    pub escape_radius: f64,
    pub overlays: Vec<Overlay>,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RenderError {
    #[error("width/height must be within 1..=16384")]
    BadDimensions,
    #[error("viewport must be non-degenerate")]
    BadViewport,
    #[error("max_iter must be >= 1 and escape radius positive")]
    BadIteration,
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.width == 0 || self.height == 0 || self.width > MAX_DIMENSION || self.height > MAX_DIMENSION {
            return Err(RenderError::BadDimensions);
        }
        if self.viewport.is_degenerate() {
            return Err(RenderError::BadViewport);
        }
        if self.max_iter == 0 || self.escape_radius <= 0.0 || !self.escape_radius.is_finite() {
            return Err(RenderError::BadIteration);
        }
        Ok(())
    }
}

/// Iterations until |z| exceeds the radius (1-based), or 0 when the orbit
/// survives the budget. Overflow counts as escaped at that step.
fn escape_count(map: &MapSpec, z0: Complex64, max_iter: usize, radius: f64) -> usize {
    let mut z = z0;
    for i in 1..=max_iter {
        z = match map.evaluate(z) {
            Ok(z) => z,
            Err(_) => return i,
        };
        if z.norm() > radius {
            return i;
        }
    }
    0
}

fn pixel_center(cfg: &RenderConfig, x: usize, y: usize) -> Complex64 {
    Complex64::new(
        cfg.viewport.re_min + (x as f64 + 0.5) * cfg.viewport.width() / cfg.width as f64,
        cfg.viewport.im_max - (y as f64 + 0.5) * cfg.viewport.height() / cfg.height as f64,
    )
}

fn pixel_of(cfg: &RenderConfig, z: Complex64) -> Option<(usize, usize)> {
    let fx = (z.re - cfg.viewport.re_min) / cfg.viewport.width() * cfg.width as f64;
    let fy = (cfg.viewport.im_max - z.im) / cfg.viewport.height() * cfg.height as f64;
    if fx < 0.0 || fy < 0.0 {
        return None;
    }
    let (x, y) = (fx as usize, fy as usize);
    (x < cfg.width && y < cfg.height).then_some((x, y))
}

fn render_row(map: &MapSpec, cfg: &RenderConfig, y: usize) -> Vec<u8> {
    (0..cfg.width)
        .map(|x| {
            let n = escape_count(map, pixel_center(cfg, x, y), cfg.max_iter, cfg.escape_radius);
            ((n * 255) / cfg.max_iter) as u8
        })
        .collect()
}

/// The grayscale escape raster, rows assembled in order so the result is
/// identical for any worker count.
pub fn escape_raster(map: &MapSpec, cfg: &RenderConfig) -> Vec<u8> {
    #[cfg(feature = "parallel")]
    let rows: Vec<Vec<u8>> = (0..cfg.height)
        .into_par_iter()
        .map(|y| render_row(map, cfg, y))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<Vec<u8>> = (0..cfg.height).map(|y| render_row(map, cfg, y)).collect();
    rows.concat()
}

/// Always-sequential raster, kept callable for benchmarking against the
/// parallel path.
pub fn escape_raster_serial(map: &MapSpec, cfg: &RenderConfig) -> Vec<u8> {
    (0..cfg.height)
        .flat_map(|y| render_row(map, cfg, y))
        .collect()
}

fn draw_line(rgb: &mut [u8], cfg: &RenderConfig, a: (usize, usize), b: (usize, usize), color: [u8; 3]) {
    // Bresenham
    let (mut x0, mut y0) = (a.0 as i64, a.1 as i64);
    let (x1, y1) = (b.0 as i64, b.1 as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        let idx = 3 * (y0 as usize * cfg.width + x0 as usize);
        rgb[idx..idx + 3].copy_from_slice(&color);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

fn draw_overlays(rgb: &mut [u8], cfg: &RenderConfig) {
    for overlay in &cfg.overlays {
        match overlay {
            Overlay::Ray(points) => {
                let pixels: Vec<Option<(usize, usize)>> =
                    points.iter().map(|&z| pixel_of(cfg, z)).collect();
                for w in pixels.windows(2) {
                    if let (Some(a), Some(b)) = (w[0], w[1]) {
                        draw_line(rgb, cfg, a, b, [255, 0, 0]);
                    }
                }
                // isolated visible samples still get their pixel
                for p in pixels.into_iter().flatten() {
                    let idx = 3 * (p.1 * cfg.width + p.0);
                    rgb[idx..idx + 3].copy_from_slice(&[255, 0, 0]);
                }
            }
            Overlay::Points(records) => {
                for rec in records {
                    if let Some((cx, cy)) = pixel_of(cfg, rec.point) {
                        for dy in -1i64..=1 {
                            for dx in -1i64..=1 {
                                let x = cx as i64 + dx;
                                let y = cy as i64 + dy;
                                if x >= 0 && y >= 0 && (x as usize) < cfg.width && (y as usize) < cfg.height {
                                    let idx = 3 * (y as usize * cfg.width + x as usize);
                                    rgb[idx..idx + 3].copy_from_slice(&[0, 255, 0]);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Render to PGM (no overlays) or PPM (with overlays) bytes.
pub fn render(map: &MapSpec, cfg: &RenderConfig) -> Result<Vec<u8>, RenderError> {
    cfg.validate()?;
    let gray = escape_raster(map, cfg);
    if cfg.overlays.is_empty() {
        let mut out = format!("P5 {} {} 255\n", cfg.width, cfg.height).into_bytes();
        out.extend_from_slice(&gray);
        Ok(out)
    } else {
        let mut rgb = Vec::with_capacity(gray.len() * 3);
        for g in &gray {
            rgb.extend_from_slice(&[*g, *g, *g]);
        }
        draw_overlays(&mut rgb, cfg);
        let mut out = format!("P6 {} {} 255\n", cfg.width, cfg.height).into_bytes();
        out.extend_from_slice(&rgb);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn base_config() -> RenderConfig {
        RenderConfig {
            viewport: Rect::new(-4.0, 4.0, -4.0, 4.0),
            width: 256,
            height: 256,
            max_iter: 50,
            escape_radius: 50.0,
            overlays: vec![],
        }
    }

    #[test]
    fn pgm_header_and_payload_size() {
        let m = MapSpec::exp(c(-1.0, 0.0)).unwrap();
        let bytes = render(&m, &base_config()).unwrap();
        let header = b"P5 256 256 255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len() - header.len(), 256 * 256);
    }

    #[test]
    fn render_is_deterministic() {
        let m = MapSpec::exp(c(-1.0, 0.0)).unwrap();
        let a = render(&m, &base_config()).unwrap();
        let b = render(&m, &base_config()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parallel_and_serial_rasters_agree() {
        let m = MapSpec::exp(c(-1.0, 0.0)).unwrap();
        let cfg = base_config();
        let par = escape_raster(&m, &cfg);
        let ser = escape_raster_serial(&m, &cfg);
        assert_eq!(par, ser);
    }

    #[test]
    fn determinism_across_thread_counts() {
        let m = MapSpec::exp(c(-1.0, 0.0)).unwrap();
        let cfg = base_config();
        let one = crate::parallel::with_thread_cap(Some(1), || render(&m, &cfg).unwrap());
        let eight = crate::parallel::with_thread_cap(Some(8), || render(&m, &cfg).unwrap());
        assert_eq!(one, eight);
    }

    #[test]
    fn overlay_pixels_present_along_the_ray() {
        let m = MapSpec::exp(c(-1.0, 0.0)).unwrap();
        let mut cfg = base_config();
        // a synthetic polyline across the viewport
        let ray: Vec<Complex64> = (0..10).map(|i| c(-3.0 + 0.6 * i as f64, 1.0)).collect();
        cfg.overlays.push(Overlay::Ray(ray.clone()));
        let bytes = render(&m, &cfg).unwrap();
        let header = format!("P6 {} {} 255\n", cfg.width, cfg.height);
        let body = &bytes[header.len()..];
        for z in ray {
            let (x, y) = pixel_of(&cfg, z).unwrap();
            let idx = 3 * (y * cfg.width + x);
            assert_eq!(&body[idx..idx + 3], &[255, 0, 0], "no red pixel at {z}");
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = base_config();
        cfg.width = 0;
        assert_eq!(cfg.validate(), Err(RenderError::BadDimensions));
        let mut cfg = base_config();
        cfg.viewport = Rect::new(1.0, 1.0, 0.0, 1.0);
        assert_eq!(cfg.validate(), Err(RenderError::BadViewport));
        let mut cfg = base_config();
        cfg.max_iter = 0;
        assert_eq!(cfg.validate(), Err(RenderError::BadIteration));
    }
}
