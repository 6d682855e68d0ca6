//! False-color PNG and raw PGM export of rasters, costmap planes and
//! histograms. Image row 0 is the grid's top row (largest y).

use std::path::Path;

use cobev_core::scenario::Histogram;
use cobev_core::sim::{ObservationRaster, SemanticClass};
use cobev_core::GridSpec;
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};

use crate::error::{HarnessError, Result};

pub type Rgb = [u8; 3];

pub fn class_color(c: SemanticClass) -> Rgb {
    match c {
        SemanticClass::OutOfRange => [40, 40, 40],
        SemanticClass::Occupied => [220, 50, 47],
        SemanticClass::Shadow => [120, 120, 160],
        SemanticClass::Empty => [245, 245, 245],
    }
}

const NEGATIVE: Rgb = [178, 24, 43];
const ZERO: Rgb = [247, 247, 247];
const POSITIVE: Rgb = [33, 102, 172];

fn lerp(a: Rgb, b: Rgb, t: f64) -> Rgb {
    let mix = |x: u8, y: u8| (f64::from(x) + (f64::from(y) - f64::from(x)) * t).round() as u8;
    [mix(a[0], b[0]), mix(a[1], b[1]), mix(a[2], b[2])]
}

/// Diverging palette: red below zero, white at zero, blue above, saturating
/// at `±cap`.
pub fn diverging(value: f64, cap: f64) -> Rgb {
    let t = (value / cap).clamp(-1.0, 1.0);
    if t < 0.0 {
        lerp(ZERO, NEGATIVE, -t)
    } else {
        lerp(ZERO, POSITIVE, t)
    }
}

pub fn encode_png(width: usize, height: usize, rgb: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out).write_image(rgb, width as u32, height as u32, ExtendedColorType::Rgb8)?;
    Ok(out)
}

/// Pixels of a grid-shaped plane, top row first.
fn grid_pixels<T>(spec: &GridSpec, values: &[T], color: impl Fn(&T) -> Rgb) -> Vec<u8> {
    let w = spec.width;
    (0..spec.height).rev().flat_map(|row| values[row * w..(row + 1) * w].iter().flat_map(&color)).collect()
}

pub fn semantic_png(raster: &ObservationRaster) -> Result<Vec<u8>> {
    let px = grid_pixels(&raster.spec, &raster.cells, |&c| class_color(c));
    encode_png(raster.spec.width, raster.spec.height, &px)
}

pub fn sdf_png(spec: &GridSpec, plane: &[f64], cap: f64) -> Result<Vec<u8>> {
    check_len(spec, plane.len())?;
    encode_png(spec.width, spec.height, &grid_pixels(spec, plane, |&v| diverging(v, cap)))
}

/// 8-bit PGM with `-cap` at 0, zero at 128 and `+cap` at 255.
pub fn sdf_pgm(spec: &GridSpec, plane: &[f64], cap: f64) -> Result<Vec<u8>> {
    check_len(spec, plane.len())?;
    let mut out = format!("P5\n{} {}\n255\n", spec.width, spec.height).into_bytes();
    for row in (0..spec.height).rev() {
        out.extend(plane[row * spec.width..(row + 1) * spec.width].iter().map(|&v| {
            let t = (v / cap).clamp(-1.0, 1.0);
            (127.5 + 127.5 * t).round() as u8
        }));
    }
    Ok(out)
}

fn check_len(spec: &GridSpec, len: usize) -> Result<()> {
    if len != spec.len() {
        return Err(HarnessError::Config(format!("plane has {len} cells, grid has {}", spec.len())));
    }
    Ok(())
}

const BAR: usize = 6;
const PLOT_H: usize = 200;
const MARGIN: usize = 10;

/// Bar chart with one bar per colliding count and a log-scaled y axis:
/// a bar of height `h` spans `log10(1 + scenarios) / log10(1 + max)` of the
/// plot. Decade ticks are drawn on the left axis.
pub fn histogram_png(h: &Histogram) -> Result<Vec<u8>> {
    let bars = h.counts.len().max(1);
    let (w, ht) = (2 * MARGIN + bars * BAR, 2 * MARGIN + PLOT_H);
    let mut px = vec![255u8; w * ht * 3];
    let mut put = |x: usize, y: usize, c: Rgb| {
        let i = (y * w + x) * 3;
        px[i..i + 3].copy_from_slice(&c);
    };
    let max = h.counts.iter().copied().max().unwrap_or(0);
    let scale = ((1 + max) as f64).log10();
    let height_of = |v: usize| {
        if scale == 0.0 {
            0
        } else {
            ((((1 + v) as f64).log10() / scale) * PLOT_H as f64).round() as usize
        }
    };
    let base = MARGIN + PLOT_H;
    for (i, &v) in h.counts.iter().enumerate() {
        let x0 = MARGIN + i * BAR;
        for y in base - height_of(v)..base {
            for x in x0 + 1..x0 + BAR {
                put(x, y, POSITIVE);
            }
        }
    }
    for x in MARGIN - 1..w - MARGIN {
        put(x, base, [0, 0, 0]);
    }
    for y in MARGIN..=base {
        put(MARGIN - 1, y, [0, 0, 0]);
    }
    let mut decade = 1;
    while decade <= max {
        let y = base - height_of(decade).min(PLOT_H);
        for x in MARGIN - 4..MARGIN - 1 {
            put(x, y, [0, 0, 0]);
        }
        decade *= 10;
    }
    encode_png(w, ht, &px)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::File { path: dir.display().to_string(), source })?;
    }
    std::fs::write(path, bytes).map_err(|source| HarnessError::File { path: path.display().to_string(), source })
}

/// Writes `<stem>.png` and `<stem>.pgm` for a semantic raster.
pub fn render_raster(raster: &ObservationRaster, stem: &Path) -> Result<()> {
    write_file(&stem.with_extension("png"), &semantic_png(raster)?)?;
    write_file(&stem.with_extension("pgm"), &raster.to_pgm())
}

/// Writes `<stem>.png` and `<stem>.pgm` for an SDF plane.
pub fn render_sdf(spec: &GridSpec, plane: &[f64], cap: f64, stem: &Path) -> Result<()> {
    write_file(&stem.with_extension("png"), &sdf_png(spec, plane, cap)?)?;
    write_file(&stem.with_extension("pgm"), &sdf_pgm(spec, plane, cap)?)
}
