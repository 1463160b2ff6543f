use image::RgbImage;

use super::FeatureError;
use crate::nn::Tensor;

/// Bilinear resampling of the `[x0, x1) x [y0, y1)` region of `img` to
/// `out_h x out_w`, using pixel-center alignment. Channels are scaled to
/// `[0, 1]`. Aspect ratio is not preserved.
pub fn bilinear_resize(img: &RgbImage, region: (u32, u32, u32, u32), out_h: usize, out_w: usize) -> Tensor<f32> {
    let (x0, y0, x1, y1) = region;
    let (cw, ch) = ((x1 - x0) as usize, (y1 - y0) as usize);
    let mut out = Tensor::zeros(&[out_h, out_w, 3]);
    let sy = ch as f64 / out_h as f64;
    let sx = cw as f64 / out_w as f64;
    let cols: Vec<(usize, usize, f64)> = (0..out_w).map(|j| source_taps(j, sx, cw)).collect();
    let data = out.data_mut();
    for i in 0..out_h {
        let (ya, yb, fy) = source_taps(i, sy, ch);
        for (j, &(xa, xb, fx)) in cols.iter().enumerate() {
            let p = |x: usize, y: usize| img.get_pixel(x0 + x as u32, y0 + y as u32).0;
            let (a, b, c, d) = (p(xa, ya), p(xb, ya), p(xa, yb), p(xb, yb));
            for k in 0..3 {
                let top = f64::from(a[k]) * (1.0 - fx) + f64::from(b[k]) * fx;
                let bottom = f64::from(c[k]) * (1.0 - fx) + f64::from(d[k]) * fx;
                data[(i * out_w + j) * 3 + k] = ((top * (1.0 - fy) + bottom * fy) / 255.0) as f32;
            }
        }
    }
    out
}

/// Neighbouring source indices and interpolation weight for output index `i`
/// under scale `s = source_len / output_len`.
fn source_taps(i: usize, s: f64, len: usize) -> (usize, usize, f64) {
    let src = ((i as f64 + 0.5) * s - 0.5).clamp(0.0, (len - 1) as f64);
    let a = src.floor() as usize;
    let b = (a + 1).min(len - 1);
    (a, b, src - a as f64)
}

/// Crops an element and stretches it to `out_h x out_w`.
pub fn crop_resize_element(
    img: &RgbImage,
    region: Option<(u32, u32, u32, u32)>,
    element_id: &str,
    out_h: usize,
    out_w: usize,
) -> Result<Tensor<f32>, FeatureError> {
    match region {
        Some(r) if r.2 > r.0 && r.3 > r.1 && r.2 <= img.width() && r.3 <= img.height() => {
            Ok(bilinear_resize(img, r, out_h, out_w))
        }
        _ => Err(FeatureError::EmptyCrop {
            element_id: element_id.to_string(),
        }),
    }
}

/// Scale and content size used to letterbox a `height x width` screen into
/// `out_h x out_w`.
///
/// The scale is the largest that fits the screen into a frame one pixel
/// larger than the target in each direction; the content is then truncated
/// to the target. A screen whose aspect ratio is within a pixel of the target
/// therefore fills it completely instead of gaining a one-pixel border.
pub fn screen_fit(height: u32, width: u32, out_h: usize, out_w: usize) -> (f64, usize, usize) {
    let s = ((out_h + 1) as f64 / f64::from(height)).min((out_w + 1) as f64 / f64::from(width));
    let ch = ((f64::from(height) * s + 1e-9).floor() as usize).clamp(1, out_h);
    let cw = ((f64::from(width) * s + 1e-9).floor() as usize).clamp(1, out_w);
    (s, ch, cw)
}

/// Aspect-preserving resize of a portrait screenshot into a zero-padded
/// `out_h x out_w x 3` tensor with the content centered.
pub fn resize_screen(img: &RgbImage, out_h: usize, out_w: usize) -> Result<Tensor<f32>, FeatureError> {
    let (w, h) = img.dimensions();
    if w > h {
        return Err(FeatureError::Landscape { width: w, height: h });
    }
    let (s, ch, cw) = screen_fit(h, w, out_h, out_w);
    let (oy, ox) = ((out_h - ch) / 2, (out_w - cw) / 2);
    let inv = 1.0 / s;
    let cols: Vec<(usize, usize, f64)> = (0..cw).map(|j| source_taps(j, inv, w as usize)).collect();
    let mut out = Tensor::zeros(&[out_h, out_w, 3]);
    let data = out.data_mut();
    for i in 0..ch {
        let (ya, yb, fy) = source_taps(i, inv, h as usize);
        for (j, &(xa, xb, fx)) in cols.iter().enumerate() {
            let p = |x: usize, y: usize| img.get_pixel(x as u32, y as u32).0;
            let (a, b, c, d) = (p(xa, ya), p(xb, ya), p(xa, yb), p(xb, yb));
            let o = ((oy + i) * out_w + ox + j) * 3;
            for k in 0..3 {
                let top = f64::from(a[k]) * (1.0 - fx) + f64::from(b[k]) * fx;
                let bottom = f64::from(c[k]) * (1.0 - fx) + f64::from(d[k]) * fx;
                data[o + k] = ((top * (1.0 - fy) + bottom * fy) / 255.0) as f32;
            }
        }
    }
    Ok(out)
}
