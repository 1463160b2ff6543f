use std::sync::Arc;

use image::RgbImage;

use super::hierarchy::{PixelRect, ViewElement};
use super::DatasetError;

/// Default share of the screen height covered by the status bar (top) and the
/// navigation bar (bottom).
pub const DEFAULT_STATUS_BAR_FRACTION: f64 = 0.05;
pub const DEFAULT_NAV_BAR_FRACTION: f64 = 0.05;

/// A screenshot with its view hierarchy.
///
/// Bounds live in hierarchy coordinates (the root's bounds define the frame);
/// the screenshot may have a different resolution and is addressed through
/// [`ScreenRecord::image_rect`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenRecord {
    pub screen_id: String,
    pub screenshot: Arc<RgbImage>,
    pub root: ViewElement,
    pub excluded_zones: Vec<PixelRect>,
}

impl ScreenRecord {
    pub fn new(screen_id: impl Into<String>, screenshot: RgbImage, root: ViewElement) -> Result<Self, DatasetError> {
        Self::with_zone_fractions(screen_id, screenshot, root, DEFAULT_STATUS_BAR_FRACTION, DEFAULT_NAV_BAR_FRACTION)
    }

    pub fn with_zone_fractions(
        screen_id: impl Into<String>,
        screenshot: RgbImage,
        root: ViewElement,
        top: f64,
        bottom: f64,
    ) -> Result<Self, DatasetError> {
        let screen_id = screen_id.into();
        if screenshot.width() == 0 || screenshot.height() == 0 {
            return Err(DatasetError::InvalidScreen {
                screen_id,
                reason: "empty screenshot".into(),
            });
        }
        let excluded_zones = excluded_zones(&root.bounds, top, bottom);
        Ok(Self {
            screen_id,
            screenshot: Arc::new(screenshot),
            root,
            excluded_zones,
        })
    }

    pub fn frame(&self) -> PixelRect {
        self.root.bounds
    }

    pub fn element(&self, id: &str) -> Option<&ViewElement> {
        self.root.find(id)
    }

    /// Maps hierarchy bounds onto screenshot pixels, clipped to the image.
    /// Returns `(x0, y0, x1, y1)` with exclusive upper corners, or `None` when
    /// nothing of the rectangle is visible.
    pub fn image_rect(&self, bounds: &PixelRect) -> Option<(u32, u32, u32, u32)> {
        let frame = self.frame();
        let sx = f64::from(self.screenshot.width()) / f64::from(frame.width());
        let sy = f64::from(self.screenshot.height()) / f64::from(frame.height());
        let map = |v: i32, origin: i32, s: f64, limit: u32, up: bool| {
            let p = f64::from(v - origin) * s;
            let p = if up { p.ceil() } else { p.floor() };
            p.clamp(0.0, f64::from(limit)) as u32
        };
        let (w, h) = (self.screenshot.width(), self.screenshot.height());
        let x0 = map(bounds.left, frame.left, sx, w, false);
        let x1 = map(bounds.right, frame.left, sx, w, true);
        let y0 = map(bounds.top, frame.top, sy, h, false);
        let y1 = map(bounds.bottom, frame.top, sy, h, true);
        (x1 > x0 && y1 > y0).then_some((x0, y0, x1, y1))
    }

    pub fn in_excluded_zone(&self, bounds: &PixelRect) -> bool {
        self.excluded_zones.iter().any(|z| z.intersects(bounds))
    }
}

/// Status-bar and navigation-bar strips spanning the full frame width.
pub fn excluded_zones(frame: &PixelRect, top: f64, bottom: f64) -> Vec<PixelRect> {
    let h = f64::from(frame.height());
    let top_px = (h * top).round() as i32;
    let bottom_px = (h * bottom).round() as i32;
    let mut zones = Vec::new();
    if top_px > 0 {
        zones.push(PixelRect::new(frame.left, frame.top, frame.right, frame.top + top_px));
    }
    if bottom_px > 0 {
        zones.push(PixelRect::new(frame.left, frame.bottom - bottom_px, frame.right, frame.bottom));
    }
    zones
}
