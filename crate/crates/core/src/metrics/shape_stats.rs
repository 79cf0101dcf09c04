use std::collections::BTreeMap;

use serde::Serialize;

use super::stats::{pearson, Correlation};
use crate::data::BinaryMask;
use crate::error::{Error, Result};

/// Unit edges between a mask pixel and a non-mask pixel or the frame border.
pub fn crack_perimeter(mask: &BinaryMask) -> u64 {
    let (h, w) = (mask.height(), mask.width());
    let mut p = 0u64;
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            p += (r == 0 || !mask.get(r - 1, c)) as u64;
            p += (r + 1 == h || !mask.get(r + 1, c)) as u64;
            p += (c == 0 || !mask.get(r, c - 1)) as u64;
            p += (c + 1 == w || !mask.get(r, c + 1)) as u64;
        }
    }
    p
}

/// `4π A / P²` with `P` the crack perimeter.
pub fn compactness(mask: &BinaryMask) -> Result<f64> {
    let a = mask.count();
    if a == 0 {
        return Err(Error::EmptyMask);
    }
    let p = crack_perimeter(mask) as f64;
    Ok(4.0 * std::f64::consts::PI * a as f64 / (p * p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeClassRecord {
    pub class: u32,
    pub co_values: Vec<f64>,
    pub co_mean: f64,
    /// Population variance.
    pub co_variance: f64,
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeStats {
    pub classes: Vec<ShapeClassRecord>,
    /// CO variance against IoU over classes that have both.
    pub correlation: Option<Correlation>,
}

impl ShapeStats {
    /// Two-column `co_variance,iou` scatter data.
    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("class,co_variance,iou\n");
        for c in &self.classes {
            if let Some(iou) = c.iou {
                out.push_str(&format!("{},{:.9},{:.9}\n", c.class, c.co_variance, iou));
            }
        }
        out
    }
}

/// Groups per-instance CO by class and pairs each class's CO variance
/// with its IoU. Empty instances are skipped.
pub fn shape_stats<'a>(
    instances: impl IntoIterator<Item = (u32, &'a BinaryMask)>,
    class_iou: &BTreeMap<u32, f64>,
) -> Result<ShapeStats> {
    let mut groups: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (class, mask) in instances {
        if mask.count() == 0 {
            continue;
        }
        groups.entry(class).or_default().push(compactness(mask)?);
    }
    let classes: Vec<ShapeClassRecord> = groups
        .into_iter()
        .map(|(class, co_values)| {
            let n = co_values.len() as f64;
            let mean = co_values.iter().sum::<f64>() / n;
            let var = co_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            ShapeClassRecord {
                class,
                co_mean: mean,
                co_variance: var,
                iou: class_iou.get(&class).copied(),
                co_values,
            }
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = classes
        .iter()
        .filter_map(|c| c.iou.map(|i| (c.co_variance, i)))
        .unzip();
    let correlation = if xs.len() >= 3 { pearson(&xs, &ys).ok() } else { None };
    Ok(ShapeStats {
        classes,
        correlation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn square_is_quarter_pi() {
        for a in [1, 2, 5, 13] {
            let m = BinaryMask::from_fn(20, 20, |r, c| (3..3 + a).contains(&r) && (4..4 + a).contains(&c));
            assert!((compactness(&m).unwrap() - PI / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn border_counts_as_boundary() {
        let m = BinaryMask::from_fn(3, 3, |_, _| true);
        assert_eq!(crack_perimeter(&m), 12);
    }

    #[test]
    fn line_closed_form() {
        let m = BinaryMask::from_fn(1, 7, |_, _| true);
        let n = 7.0;
        assert!((compactness(&m).unwrap() - 4.0 * PI * n / (2.0 * n + 2.0).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn empty_mask_rejected() {
        assert!(matches!(compactness(&BinaryMask::empty(3, 3)), Err(Error::EmptyMask)));
    }

    #[test]
    fn variance_per_class() {
        let sq = BinaryMask::from_fn(6, 6, |r, c| r < 2 && c < 2);
        let line = BinaryMask::from_fn(6, 6, |r, c| r == 0 && c < 4);
        let stats = shape_stats(
            [(1, &sq), (1, &line), (2, &sq)],
            &BTreeMap::from([(1, 0.5), (2, 0.9)]),
        )
        .unwrap();
        assert_eq!(stats.classes.len(), 2);
        let co_sq = PI / 4.0;
        let co_line = 4.0 * PI * 4.0 / 100.0;
        let mean = (co_sq + co_line) / 2.0;
        assert!((stats.classes[0].co_variance - (co_sq - mean).powi(2)).abs() < 1e-15);
        assert_eq!(stats.classes[1].co_variance, 0.0);
        assert!(stats.correlation.is_none());
    }
}
