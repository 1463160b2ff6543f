use serde::{Deserialize, Serialize};

use super::{examples_with_elements, ElementClass};
use crate::dataset::{Corpus, PixelRect};

pub const HEATMAP_WIDTH: usize = 168;
pub const HEATMAP_HEIGHT: usize = 300;

/// Per-cell label accuracy over a normalized screen grid (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid {
    pub kind: String,
    pub class: ElementClass,
    pub width: usize,
    pub height: usize,
    pub correct: Vec<u32>,
    pub total: Vec<u32>,
}

impl HeatmapGrid {
    pub fn new(class: ElementClass, width: usize, height: usize) -> Self {
        Self {
            kind: "location_heatmap".into(),
            class,
            width,
            height,
            correct: vec![0; width * height],
            total: vec![0; width * height],
        }
    }

    /// `None` marks a cell no element covered.
    pub fn accuracy(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        (self.total[i] > 0).then(|| f64::from(self.correct[i]) / f64::from(self.total[i]))
    }

    pub fn accuracy_grid(&self) -> Vec<Option<f64>> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .map(|(x, y)| self.accuracy(x, y))
            .collect()
    }

    /// Cells whose area overlaps `bounds` (in `frame` coordinates) with
    /// positive area. Exact integer arithmetic.
    pub fn covered_range(&self, bounds: &PixelRect, frame: &PixelRect) -> Option<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let r = bounds.intersection(frame);
        if r.is_empty() || frame.is_empty() {
            return None;
        }
        let axis = |lo: i32, hi: i32, origin: i32, extent: i32, cells: usize| {
            let (lo, hi, extent, n) = (
                i64::from(lo - origin),
                i64::from(hi - origin),
                i64::from(extent),
                cells as i64,
            );
            // Cell c spans [c/n, (c+1)/n); it overlaps [lo, hi)/extent when
            // c*extent < hi*n and (c+1)*extent > lo*n.
            let first = (lo * n) / extent;
            let last = (hi * n + extent - 1) / extent;
            (first.max(0) as usize)..(last.min(n) as usize)
        };
        Some((
            axis(r.left, r.right, frame.left, frame.width(), self.width),
            axis(r.top, r.bottom, frame.top, frame.height(), self.height),
        ))
    }

    pub fn add(&mut self, bounds: &PixelRect, frame: &PixelRect, correct: bool) {
        if let Some((xs, ys)) = self.covered_range(bounds, frame) {
            for y in ys {
                for x in xs.clone() {
                    let i = y * self.width + x;
                    self.total[i] += 1;
                    self.correct[i] += u32::from(correct);
                }
            }
        }
    }
}

/// Accuracy of human labels against the clickable attribute, per cell, for
/// elements of one clickable class.
pub fn location_heatmap(corpus: &Corpus, class: ElementClass) -> HeatmapGrid {
    let mut grid = HeatmapGrid::new(class, HEATMAP_WIDTH, HEATMAP_HEIGHT);
    for (ex, element, frame) in examples_with_elements(corpus) {
        if ex.clickable == class.flag() {
            grid.add(&element.bounds, &frame, ex.human_label == ex.clickable);
        }
    }
    grid
}
