use std::collections::BTreeMap;

use serde::Serialize;

use super::stats::{pearson, Correlation};
use crate::data::AnchorSet;
use crate::error::{Error, Result};

/// Mean and population standard deviation of the Euclidean distances from
/// anchor `class_index` to every other anchor.
pub fn embedding_locality(anchors: &AnchorSet, class_index: usize) -> Result<(f64, f64)> {
    let k = anchors.len();
    if k < 2 {
        return Err(Error::TooFewAnchors(k));
    }
    if class_index >= k {
        return Err(Error::ClassOutOfRange {
            class: class_index as u32,
            classes: k,
        });
    }
    let a = anchors.row(class_index);
    let dists: Vec<f64> = (0..k)
        .filter(|&j| j != class_index)
        .map(|j| {
            a.iter()
                .zip(anchors.row(j))
                .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let n = dists.len() as f64;
    let mean = dists.iter().sum::<f64>() / n;
    let var = dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalityRecord {
    pub class: u32,
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalityStats {
    pub classes: Vec<LocalityRecord>,
    /// Locality mean against IoU over classes that have an IoU.
    pub correlation: Option<Correlation>,
}

impl LocalityStats {
    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("class,locality_mean,iou\n");
        for c in &self.classes {
            if let Some(iou) = c.iou {
                out.push_str(&format!("{},{:.9},{:.9}\n", c.class, c.mean, iou));
            }
        }
        out
    }
}

/// Locality of the anchors listed in `classes` (anchor row = class id),
/// paired with their IoU where known.
pub fn locality_stats(
    anchors: &AnchorSet,
    classes: &[u32],
    class_iou: &BTreeMap<u32, f64>,
) -> Result<LocalityStats> {
    let mut records = Vec::with_capacity(classes.len());
    for &class in classes {
        let (mean, std) = embedding_locality(anchors, class as usize)?;
        records.push(LocalityRecord {
            class,
            name: anchors.names()[class as usize].clone(),
            mean,
            std,
            iou: class_iou.get(&class).copied(),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter_map(|r| r.iou.map(|i| (r.mean, i)))
        .unzip();
    let correlation = if xs.len() >= 3 { pearson(&xs, &ys).ok() } else { None };
    Ok(LocalityStats {
        classes: records,
        correlation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anchors(rows: &[&[f32]]) -> AnchorSet {
        let dim = rows[0].len();
        let names = (0..rows.len()).map(|i| format!("c{i}")).collect();
        AnchorSet::new(names, dim, rows.concat()).unwrap()
    }

    #[test]
    fn simplex_has_zero_spread() {
        let a = anchors(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        for k in 0..3 {
            let (m, s) = embedding_locality(&a, k).unwrap();
            assert!((m - 2f64.sqrt()).abs() < 1e-12);
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn pair_distance() {
        let a = anchors(&[&[1.0, 0.0], &[4.0, 4.0]]);
        assert_eq!(embedding_locality(&a, 1).unwrap(), (5.0, 0.0));
    }

    #[test]
    fn single_anchor_rejected() {
        let a = anchors(&[&[1.0, 0.0]]);
        assert!(matches!(embedding_locality(&a, 0), Err(Error::TooFewAnchors(1))));
    }
}
