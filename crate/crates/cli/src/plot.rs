use std::fs;

use anyhow::{bail, Context, Result};
use image::{Rgb, RgbImage};
use serde_json::Value;
use tapkit_core::consistency::ConsistencyBins;
use tapkit_core::signifiers::{ColorPalette, HeatmapGrid};
use tapkit_core::RngStream;

use crate::cli::{PlotArgs, PlotKind};

const UNCOVERED: Rgb<u8> = Rgb([225, 225, 225]);
const INK: Rgb<u8> = Rgb([30, 30, 30]);

pub fn plot(args: &PlotArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", args.input.display()))?;
    let kind = match args.kind {
        PlotKind::Auto => match value.get("kind").and_then(Value::as_str) {
            Some("location_heatmap") => PlotKind::Heatmap,
            Some("color_palette") => PlotKind::Palette,
            Some("consistency_bins") => PlotKind::Scatter,
            Some(other) => bail!("don't know how to plot a `{other}` report"),
            None => bail!("{} has no `kind` field; pass --kind", args.input.display()),
        },
        k => k,
    };
    let img = match kind {
        PlotKind::Heatmap => heatmap(&serde_json::from_value(value)?),
        PlotKind::Palette => palette(&serde_json::from_value(value)?),
        PlotKind::Scatter => scatter(&serde_json::from_value(value)?, args.seed),
        PlotKind::Auto => unreachable!(),
    };
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    img.save(&args.out).with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {} ({}x{})", args.out.display(), img.width(), img.height());
    Ok(())
}

/// Red (all wrong) through yellow to green (all right).
fn accuracy_color(a: f64) -> Rgb<u8> {
    let a = a.clamp(0.0, 1.0);
    let r = if a < 0.5 { 1.0 } else { 2.0 * (1.0 - a) };
    let g = if a < 0.5 { 2.0 * a } else { 1.0 };
    Rgb([(r * 220.0) as u8, (g * 200.0) as u8, 40])
}

pub fn heatmap(grid: &HeatmapGrid) -> RgbImage {
    let scale = 2;
    let mut img = RgbImage::new((grid.width * scale) as u32, (grid.height * scale) as u32);
    for y in 0..grid.height {
        for x in 0..grid.width {
            let c = grid.accuracy(x, y).map_or(UNCOVERED, accuracy_color);
            for dy in 0..scale {
                for dx in 0..scale {
                    img.put_pixel((x * scale + dx) as u32, (y * scale + dy) as u32, c);
                }
            }
        }
    }
    img
}

pub fn palette(palette: &ColorPalette) -> RgbImage {
    let (w, h) = (600u32, 80u32);
    let mut img = RgbImage::from_pixel(w, h, UNCOVERED);
    let mut x0 = 0.0;
    for c in &palette.colors {
        let x1 = x0 + c.proportion * f64::from(w);
        let rgb = Rgb(c.rgb.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        for x in (x0.round() as u32)..(x1.round() as u32).min(w) {
            for y in 0..h {
                img.put_pixel(x, y, rgb);
            }
        }
        x0 = x1;
    }
    img
}

/// Model probability (vertical) per rater-agreement bin (horizontal), with
/// the bin mean drawn as a bar.
pub fn scatter(bins: &ConsistencyBins, seed: u64) -> RgbImage {
    let (col, h, pad) = (100u32, 400u32, 20u32);
    let n = bins.bins.len() as u32;
    let (w, total_h) = (col * n + 2 * pad, h + 2 * pad);
    let mut img = RgbImage::from_pixel(w, total_h, Rgb([255, 255, 255]));
    let y_of = |p: f64| pad + ((1.0 - p.clamp(0.0, 1.0)) * f64::from(h - 1)).round() as u32;
    for x in pad..w - pad {
        img.put_pixel(x, pad + h - 1, INK);
    }
    for y in pad..pad + h {
        img.put_pixel(pad, y, INK);
    }
    let rng = RngStream::new(seed);
    for (i, bin) in bins.bins.iter().enumerate() {
        let mut jitter = rng.fork(i as u64);
        let center = pad + col * i as u32 + col / 2;
        for &p in &bin.probabilities {
            let x = (f64::from(center) + jitter.uniform_range(-0.3, 0.3) * f64::from(col)) as u32;
            let y = y_of(p);
            for (dx, dy) in [(0i32, 0i32), (1, 0), (0, 1), (1, 1)] {
                let (px, py) = ((x as i32 + dx) as u32, (y as i32 + dy).min((total_h - 1) as i32) as u32);
                img.put_pixel(px, py, Rgb([60, 90, 200]));
            }
        }
        if let Some(m) = bin.mean {
            let y = y_of(m);
            for x in center - col / 3..center + col / 3 {
                img.put_pixel(x, y, Rgb([220, 40, 40]));
                img.put_pixel(x, (y + 1).min(total_h - 1), Rgb([220, 40, 40]));
            }
        }
    }
    img
}
