use super::BoundaryMap;
use crate::data::SemanticMask;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sobel gradient magnitude of a scalar field with replicated borders,
/// scaled so the strongest response is 1.
pub fn sobel<T: Scalar>(height: usize, width: usize, field: &[T]) -> Result<BoundaryMap<T>> {
    if height < 3 || width < 3 {
        return Err(Error::TooSmall(format!(
            "sobel needs at least 3x3, got {height}x{width}"
        )));
    }
    if field.len() != height * width {
        return Err(Error::ShapeMismatch(format!(
            "field {height}x{width} with {} values",
            field.len()
        )));
    }
    if field.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sobel input"));
    }
    let at = |r: isize, c: isize| -> T {
        let r = r.clamp(0, height as isize - 1) as usize;
        let c = c.clamp(0, width as isize - 1) as usize;
        field[r * width + c]
    };
    let two = T::of(2.0);
    let mut mag = Vec::with_capacity(height * width);
    for r in 0..height as isize {
        for c in 0..width as isize {
            let gx = (at(r - 1, c + 1) + two * at(r, c + 1) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + two * at(r, c - 1) + at(r + 1, c - 1));
            let gy = (at(r + 1, c - 1) + two * at(r + 1, c) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + two * at(r - 1, c) + at(r - 1, c + 1));
            mag.push((gx * gx + gy * gy).sqrt());
        }
    }
    let max = mag.iter().copied().fold(T::zero(), T::max);
    if max > T::zero() {
        for m in &mut mag {
            *m = (*m / max).min(T::one());
        }
    }
    Ok(BoundaryMap::from_raw(height, width, mag))
}

/// Binary edge map of a label mask: a non-ignored pixel is an edge when any
/// of its 8 neighbours carries a different non-ignored label.
pub fn mask_to_edges<T: Scalar>(gt: &SemanticMask) -> BoundaryMap<T> {
    let (h, w) = (gt.height(), gt.width());
    let mut values = vec![T::zero(); h * w];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if gt.is_ignored(i) {
                continue;
            }
            let label = gt.labels()[i];
            let edge = (r.saturating_sub(1)..=(r + 1).min(h - 1)).any(|rr| {
                (c.saturating_sub(1)..=(c + 1).min(w - 1)).any(|cc| {
                    let j = rr * w + cc;
                    !gt.is_ignored(j) && gt.labels()[j] != label
                })
            });
            if edge {
                values[i] = T::one();
            }
        }
    }
    BoundaryMap::from_raw(h, w, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_is_flat() {
        let e = sobel(4, 5, &[3.0f64; 20]).unwrap();
        assert!(e.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_small() {
        assert!(matches!(sobel(2, 5, &[0.0f64; 10]), Err(Error::TooSmall(_))));
    }

    #[test]
    fn vertical_step_responds_on_both_sides() {
        // columns 0..3 zero, 3..6 one: step at c = 3
        let (h, w, c) = (5, 6, 3);
        let f: Vec<f64> = (0..h * w)
            .map(|i| if i % w >= c { 1.0 } else { 0.0 })
            .collect();
        let e = sobel(h, w, &f).unwrap();
        for r in 0..h {
            for col in 0..w {
                let expected = if col == c - 1 || col == c { 1.0 } else { 0.0 };
                assert_eq!(e.get(r, col), expected, "({r},{col})");
            }
        }
    }

    #[test]
    fn single_pixel_object_rings() {
        let mut labels = vec![0; 25];
        labels[12] = 4;
        let m = SemanticMask::new(5, 5, labels).unwrap();
        let e = mask_to_edges::<f64>(&m);
        for r in 0..5 {
            for c in 0..5 {
                let ring = (1..=3).contains(&r) && (1..=3).contains(&c);
                assert_eq!(e.get(r, c) == 1.0, ring);
            }
        }
    }

    #[test]
    fn ignored_pixels_never_edge() {
        let m = SemanticMask::new(1, 3, vec![1, 255, 2]).unwrap();
        let e = mask_to_edges::<f32>(&m);
        assert_eq!(e.values(), &[0.0, 0.0, 0.0]);
    }
}
