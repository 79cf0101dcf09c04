use crate::data::ImageRgb;
use crate::scalar::Scalar;

/// Per-pixel `(cos h, sin h, s, v, x, y)` rows in raster order.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorPosFeatures<T> {
    pub coords: Vec<[T; 6]>,
}

impl<T: Scalar> ColorPosFeatures<T> {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// RGB -> HSV with hue in radians (grey pixels get hue 0), plus pixel
/// position scaled to `[0, 1]`.
pub fn color_pos_features<T: Scalar>(img: &ImageRgb) -> ColorPosFeatures<T> {
    let (h, w) = (img.height(), img.width());
    let xscale = if w > 1 { 1.0 / (w - 1) as f64 } else { 0.0 };
    let yscale = if h > 1 { 1.0 / (h - 1) as f64 } else { 0.0 };
    let mut coords = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let (hue, s, v) = rgb_to_hsv(img.pixel(r, c));
            coords.push([
                T::of(hue.cos()),
                T::of(hue.sin()),
                T::of(s),
                T::of(v),
                T::of(c as f64 * xscale),
                T::of(r as f64 * yscale),
            ]);
        }
    }
    ColorPosFeatures { coords }
}

/// Hue in radians `[0, 2π)`, saturation and value in `[0, 1]`.
pub(crate) fn rgb_to_hsv([r, g, b]: [u8; 3]) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return (0.0, s, v);
    }
    let sector = if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    (sector * std::f64::consts::PI / 3.0, s, v)
}
