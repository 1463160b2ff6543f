use serde::{Deserialize, Serialize};

use crate::dataset::Corpus;
use crate::rng::RngStream;

pub const KMEANS_MAX_ITERATIONS: usize = 100;
pub const KMEANS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub centroids: Vec<[f64; 3]>,
    pub counts: Vec<usize>,
    pub iterations: usize,
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

fn nearest(p: &[f64; 3], centroids: &[[f64; 3]]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding. Stops after
/// [`KMEANS_MAX_ITERATIONS`] or when no centroid moves by
/// [`KMEANS_TOLERANCE`] or more. Empty clusters keep their centroid.
pub fn kmeans(points: &[[f64; 3]], k: usize, rng: &mut RngStream) -> KMeansResult {
    assert!(k >= 1 && k <= points.len(), "need 1 <= k <= number of points");
    let mut centroids = vec![points[rng.below(points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(0);
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.below(points.len())
        };
        let c = points[next];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &c));
        }
        centroids.push(c);
    }

    let mut assign = vec![0usize; points.len()];
    let mut iterations = 0;
    for _ in 0..KMEANS_MAX_ITERATIONS {
        iterations += 1;
        for (a, p) in assign.iter_mut().zip(points) {
            *a = nearest(p, &centroids);
        }
        let mut sums = vec![[0.0f64; 3]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assign.iter().zip(points) {
            counts[a] += 1;
            for i in 0..3 {
                sums[a][i] += p[i];
            }
        }
        let mut moved = 0.0f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let new = sums[c].map(|s| s / counts[c] as f64);
            moved = moved.max(dist2(&new, &centroids[c]).sqrt());
            centroids[c] = new;
        }
        if moved < KMEANS_TOLERANCE {
            break;
        }
    }
    for (a, p) in assign.iter_mut().zip(points) {
        *a = nearest(p, &centroids);
    }
    let mut counts = vec![0usize; k];
    for &a in &assign {
        counts[a] += 1;
    }
    KMeansResult {
        centroids,
        counts,
        iterations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteColor {
    /// RGB in `[0, 1]`.
    pub rgb: [f64; 3],
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorPalette {
    pub kind: String,
    pub k_requested: usize,
    pub samples: usize,
    /// Sorted by decreasing proportion.
    pub colors: Vec<PaletteColor>,
    pub warnings: Vec<String>,
}

/// Clusters pixel samples into a palette. Samples are sorted first so the
/// result does not depend on sampling order.
pub fn palette_from_samples(mut samples: Vec<[f64; 3]>, k: usize, seed: u64) -> ColorPalette {
    let mut warnings = Vec::new();
    samples.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    let distinct = samples.windows(2).filter(|w| w[0] != w[1]).count() + usize::from(!samples.is_empty());
    let mut k_eff = k;
    if distinct < k {
        let msg = format!("only {distinct} distinct colors sampled; reducing k from {k} to {distinct}");
        log::warn!("{msg}");
        warnings.push(msg);
        k_eff = distinct;
    }
    let mut colors = Vec::new();
    if k_eff > 0 {
        let result = kmeans(&samples, k_eff, &mut RngStream::new(seed).fork_named("kmeans"));
        let n = samples.len() as f64;
        colors = result
            .centroids
            .iter()
            .zip(&result.counts)
            .filter(|(_, &c)| c > 0)
            .map(|(rgb, &c)| PaletteColor {
                rgb: *rgb,
                proportion: c as f64 / n,
            })
            .collect();
        colors.sort_by(|a, b| {
            b.proportion
                .total_cmp(&a.proportion)
                .then_with(|| a.rgb.iter().zip(&b.rgb).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal))
        });
    }
    ColorPalette {
        kind: "color_palette".into(),
        k_requested: k,
        samples: samples.len(),
        colors,
        warnings,
    }
}

/// Dominant colors of elements with the given human label, from up to
/// `samples_per_element` seeded pixel draws per element.
pub fn dominant_colors(corpus: &Corpus, human_label: u8, k: usize, seed: u64, samples_per_element: usize) -> ColorPalette {
    let rng = RngStream::new(seed).fork_named("pixels");
    let mut samples = Vec::new();
    for (i, ex) in corpus.examples.iter().enumerate() {
        if ex.human_label != human_label {
            continue;
        }
        let (screen, element) = corpus.resolve(ex);
        let Some((x0, y0, x1, y1)) = screen.image_rect(&element.bounds) else {
            continue;
        };
        let mut r = rng.fork(i as u64);
        let (w, h) = ((x1 - x0) as usize, (y1 - y0) as usize);
        for _ in 0..samples_per_element {
            let x = x0 + r.below(w) as u32;
            let y = y0 + r.below(h) as u32;
            let p = screen.screenshot.get_pixel(x, y).0;
            samples.push(p.map(|v| f64::from(v) / 255.0));
        }
    }
    palette_from_samples(samples, k, seed)
}
