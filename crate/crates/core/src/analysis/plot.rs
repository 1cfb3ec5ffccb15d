//! Minimal raster line plots written as PNG.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{PinError, Result};

const MARGIN: i64 = 40;
const PALETTE: [[u8; 3]; 6] = [[31, 119, 180], [214, 39, 40], [44, 160, 44], [148, 103, 189], [255, 127, 14], [23, 190, 207]];

pub fn palette(i: usize) -> [u8; 3] {
    PALETTE[i % PALETTE.len()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub points: Vec<(f64, f64)>,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub width: u32,
    pub height: u32,
    pub log_x: bool,
    pub series: Vec<Series>,
}

impl LinePlot {
    pub fn new(width: u32, height: u32) -> Self {
        LinePlot { width, height, log_x: false, series: Vec::new() }
    }

    pub fn add(&mut self, points: Vec<(f64, f64)>) -> &mut Self {
        let color = palette(self.series.len());
        self.series.push(Series { points, color });
        self
    }

    fn tx(&self, x: f64) -> f64 {
        if self.log_x { x.log10() } else { x }
    }

    pub fn render(&self) -> Result<RgbImage> {
        if self.width < 2 * MARGIN as u32 + 10 || self.height < 2 * MARGIN as u32 + 10 {
            return Err(PinError::param("plot is too small"));
        }
        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|&(x, y)| (self.tx(x), y)))
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        let mut img = RgbImage::from_pixel(self.width, self.height, Rgb([255, 255, 255]));
        let (w, h) = (self.width as i64, self.height as i64);
        let (x0, x1, y0, y1) = (MARGIN, w - MARGIN / 2, h - MARGIN, MARGIN / 2);
        let black = [0, 0, 0];
        line(&mut img, (x0, y0), (x1, y0), black);
        line(&mut img, (x0, y0), (x0, y1), black);
        if pts.is_empty() {
            return Ok(img);
        }
        let range = |v: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) }
        };
        let (xlo, xhi) = range(&mut pts.iter().map(|p| p.0));
        let (ylo, yhi) = range(&mut pts.iter().map(|p| p.1));
        let map = |x: f64, y: f64| {
            let px = x0 as f64 + (x - xlo) / (xhi - xlo) * (x1 - x0) as f64;
            let py = y0 as f64 - (y - ylo) / (yhi - ylo) * (y0 - y1) as f64;
            (px.round() as i64, py.round() as i64)
        };
        for s in &self.series {
            let mut prev: Option<(i64, i64)> = None;
            for &(x, y) in &s.points {
                let x = self.tx(x);
                if !(x.is_finite() && y.is_finite()) {
                    prev = None;
                    continue;
                }
                let p = map(x, y);
                if let Some(q) = prev {
                    line(&mut img, q, p, s.color);
                }
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        put(&mut img, p.0 + dx, p.1 + dy, s.color);
                    }
                }
                prev = Some(p);
            }
        }
        let fmt = |v: f64, log: bool| label(if log { 10f64.powf(v) } else { v });
        text(&mut img, x0, y0 + 6, &fmt(xlo, self.log_x));
        let right = fmt(xhi, self.log_x);
        text(&mut img, x1 - 4 * right.len() as i64, y0 + 6, &right);
        text(&mut img, 2, y0 - 5, &label(ylo));
        text(&mut img, 2, y1, &label(yhi));
        Ok(img)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.render()?.save(path)?;
        Ok(())
    }
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) { format!("{v:.1e}") } else { format!("{v:.2}") }
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, Rgb(c));
    }
}

fn line(img: &mut RgbImage, (mut x, mut y): (i64, i64), (x1, y1): (i64, i64), c: [u8; 3]) {
    let (dx, dy) = ((x1 - x).abs(), -(y1 - y).abs());
    let (sx, sy) = (if x < x1 { 1 } else { -1 }, if y < y1 { 1 } else { -1 });
    let mut err = dx + dy;
    loop {
        put(img, x, y, c);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// 3×5 glyphs, one row per `u8` (low three bits, left to right).
fn glyph(ch: char) -> [u8; 5] {
    match ch {
        '0' => [7, 5, 5, 5, 7],
        '1' => [2, 6, 2, 2, 7],
        '2' => [7, 1, 7, 4, 7],
        '3' => [7, 1, 7, 1, 7],
        '4' => [5, 5, 7, 1, 1],
        '5' => [7, 4, 7, 1, 7],
        '6' => [7, 4, 7, 5, 7],
        '7' => [7, 1, 1, 1, 1],
        '8' => [7, 5, 7, 5, 7],
        '9' => [7, 5, 7, 1, 7],
        '.' => [0, 0, 0, 0, 2],
        '-' => [0, 0, 7, 0, 0],
        'e' => [0, 7, 7, 4, 7],
        _ => [0; 5],
    }
}

fn text(img: &mut RgbImage, x: i64, y: i64, s: &str) {
    for (i, ch) in s.chars().enumerate() {
        for (row, bits) in glyph(ch).iter().enumerate() {
            for col in 0..3 {
                if bits & (4 >> col) != 0 {
                    put(img, x + 4 * i as i64 + col, y + row as i64, [0, 0, 0]);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series_pixels() {
        let mut p = LinePlot::new(200, 150);
        p.add(vec![(0.0, 0.0), (1.0, 1.0)]);
        let img = p.render().unwrap();
        let coloured = img.pixels().filter(|px| px.0 == palette(0)).count();
        assert!(coloured > 50);
    }

    #[test]
    fn non_finite_points_are_skipped() {
        let mut p = LinePlot::new(200, 150);
        p.log_x = true;
        p.add(vec![(0.0, 1.0), (1.0, f64::NAN), (10.0, 2.0), (100.0, 3.0)]);
        assert!(p.render().is_ok());
    }

    #[test]
    fn too_small() {
        assert!(LinePlot::new(20, 20).render().is_err());
    }
}
