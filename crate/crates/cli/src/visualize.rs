//! PNG overlays and CSV tables for inspecting mined triplets and results.

use std::fmt::Write as _;
use std::path::Path;

use image::{Rgb, RgbImage};
use triplet_core::classify::Metrics;
use triplet_core::detector::TripletDetection;
use triplet_core::imaging::{GrayImage, PatchLocation};

use crate::error::{CliError, Result};

const PALETTE: [[u8; 3]; 6] = [
    [230, 60, 50],
    [40, 160, 60],
    [50, 100, 230],
    [240, 180, 20],
    [170, 60, 200],
    [20, 190, 200],
];

pub fn color(i: usize) -> [u8; 3] {
    PALETTE[i % PALETTE.len()]
}

pub fn to_rgb(image: &GrayImage<f64>) -> RgbImage {
    let luma = image.to_luma8();
    RgbImage::from_fn(image.width() as u32, image.height() as u32, |x, y| {
        let v = luma[y as usize * image.width() + x as usize];
        Rgb([v, v, v])
    })
}

pub fn draw_box(img: &mut RgbImage, loc: PatchLocation, c: [u8; 3]) {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let x1 = (loc.x + loc.side).min(w) - 1;
    let y1 = (loc.y + loc.side).min(h) - 1;
    for x in loc.x..=x1 {
        img.put_pixel(x as u32, loc.y as u32, Rgb(c));
        img.put_pixel(x as u32, y1 as u32, Rgb(c));
    }
    for y in loc.y..=y1 {
        img.put_pixel(loc.x as u32, y as u32, Rgb(c));
        img.put_pixel(x1 as u32, y as u32, Rgb(c));
    }
}

pub fn draw_line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), c: [u8; 3]) {
    let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let (x, y) = (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
        if x >= 0.0 && y >= 0.0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, Rgb(c));
        }
    }
}

/// Draws each detection's three boxes and its triangle, in original image coordinates.
pub fn overlay(image: &GrayImage<f64>, detections: &[TripletDetection<f64>]) -> RgbImage {
    let mut img = to_rgb(image);
    for (i, d) in detections.iter().enumerate() {
        let c = color(i);
        let locs = d.locations_in_original(image.width());
        for &l in &locs {
            draw_box(&mut img, l, c);
        }
        let centers: Vec<(f64, f64)> = locs
            .iter()
            .map(|l| {
                let p = l.center::<f64>();
                (p.x, p.y)
            })
            .collect();
        for k in 0..3 {
            draw_line(&mut img, centers[k], centers[(k + 1) % 3], c);
        }
    }
    img
}

/// Rows as a heat map (black to yellow), each cell `cell` pixels square,
/// normalized over the whole table.
pub fn heat_map(rows: &[Vec<f64>], cell: u32) -> RgbImage {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let (lo, hi) = rows
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut img = RgbImage::new((cols as u32 * cell).max(1), (rows.len() as u32 * cell).max(1));
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let t = ((v - lo) / span).clamp(0.0, 1.0);
            let px = Rgb([(255.0 * (2.0 * t).min(1.0)) as u8, (255.0 * t) as u8, (80.0 * (1.0 - t)) as u8]);
            for dy in 0..cell {
                for dx in 0..cell {
                    img.put_pixel(c as u32 * cell + dx, r as u32 * cell + dy, px);
                }
            }
        }
    }
    img
}

/// Mean descriptor per true class; rows follow the label table.
pub fn class_means(num_classes: usize, labeled: &[(usize, &[f64])]) -> Vec<Vec<f64>> {
    let dim = labeled.first().map_or(0, |(_, b)| b.len());
    let mut sums = vec![vec![0.0; dim]; num_classes];
    let mut counts = vec![0usize; num_classes];
    for &(l, b) in labeled {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(b.iter()) {
            *s += v;
        }
    }
    for (row, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            row.iter_mut().for_each(|s| *s /= n as f64);
        }
    }
    sums
}

pub fn table_csv(labels: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = String::from("class");
    for t in 0..rows.first().map_or(0, Vec::len) {
        write!(out, ",t{t}").expect("string write");
    }
    out.push('\n');
    for (label, row) in labels.iter().zip(rows) {
        out.push_str(label);
        for v in row {
            write!(out, ",{v}").expect("string write");
        }
        out.push('\n');
    }
    out
}

/// `confusion[truth][predicted]` with a header row of predicted labels.
pub fn confusion_csv(labels: &[String], metrics: &Metrics) -> String {
    let mut out = String::from("truth\\predicted");
    for l in labels {
        write!(out, ",{l}").expect("string write");
    }
    out.push('\n');
    for (label, row) in labels.iter().zip(&metrics.confusion) {
        out.push_str(label);
        for v in row {
            write!(out, ",{v}").expect("string write");
        }
        out.push('\n');
    }
    out
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn save_text(text: &str, path: &Path) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
