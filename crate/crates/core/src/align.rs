//! Pixel-wise classification against text anchors.
//!
//! Logit channel `k` belongs to anchor row `k`, and anchor rows are indexed by
//! class id, so "class id" and "channel" are interchangeable throughout.

use rayon::prelude::*;

use crate::data::{AnchorSet, FeatureMap, SemanticMask};
use crate::error::{Error, Result};

/// Per-pixel class scores, `H x W x K`, class-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    height: usize,
    width: usize,
    classes: usize,
    scores: Vec<f32>,
}

impl Logits {
    pub fn new(height: usize, width: usize, classes: usize, scores: Vec<f32>) -> Result<Self> {
        if classes == 0 || scores.len() != height * width * classes {
            return Err(Error::ShapeMismatch(format!(
                "logits {height}x{width}x{classes} with {} scores",
                scores.len()
            )));
        }
        if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(Self {
            height,
            width,
            classes,
            scores,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn pixel(&self, index: usize) -> &[f32] {
        &self.scores[index * self.classes..(index + 1) * self.classes]
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }
}

/// Cosine similarity of every pixel feature with every anchor.
pub fn compute_logits(features: &FeatureMap, anchors: &AnchorSet) -> Result<Logits> {
    if features.dim() != anchors.dim() {
        return Err(Error::DimMismatch {
            features: features.dim(),
            anchors: anchors.dim(),
        });
    }
    let anchor_norms: Vec<f64> = anchors.rows().map(norm64).collect();
    if let Some(k) = anchor_norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroAnchor(k));
    }
    let k = anchors.len();
    let mut scores = vec![0f32; features.pixel_count() * k];
    scores
        .par_chunks_mut(k)
        .enumerate()
        .for_each(|(p, out)| {
            let v = features.node(p);
            let vn = norm64(v);
            if vn == 0.0 {
                return;
            }
            for (c, o) in out.iter_mut().enumerate() {
                let a = anchors.row(c);
                let d: f64 = v.iter().zip(a).map(|(&x, &y)| x as f64 * y as f64).sum();
                *o = (d / (vn * anchor_norms[c])).clamp(-1.0, 1.0) as f32;
            }
        });
    Logits::new(features.height(), features.width(), k, scores)
}

fn norm64(v: &[f32]) -> f64 {
    v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt()
}

/// Cross-entropy over the seen classes summed over non-ignored pixels.
pub fn align_loss(logits: &Logits, gt: &SemanticMask, seen: &[u32]) -> Result<f64> {
    align_loss_scaled(logits, gt, seen, 1.0)
}

/// [`align_loss`] with logits divided by `temperature` before the softmax.
pub fn align_loss_scaled(
    logits: &Logits,
    gt: &SemanticMask,
    seen: &[u32],
    temperature: f64,
) -> Result<f64> {
    let channels = check_inputs(logits, gt, seen, temperature)?;
    let mut total = 0.0;
    let mut buf = vec![0.0; channels.len()];
    for p in 0..logits.pixel_count() {
        if gt.is_ignored(p) {
            continue;
        }
        let target = target_slot(gt, p, &channels)?;
        let row = logits.pixel(p);
        for (b, &c) in buf.iter_mut().zip(&channels) {
            *b = row[c] as f64 / temperature;
        }
        total += log_sum_exp(&buf) - buf[target];
    }
    Ok(total)
}

/// Gradient of [`align_loss`] with respect to the raw logits, `H x W x K`.
pub fn align_loss_grad(logits: &Logits, gt: &SemanticMask, seen: &[u32]) -> Result<Vec<f64>> {
    align_loss_grad_scaled(logits, gt, seen, 1.0)
}

pub fn align_loss_grad_scaled(
    logits: &Logits,
    gt: &SemanticMask,
    seen: &[u32],
    temperature: f64,
) -> Result<Vec<f64>> {
    let channels = check_inputs(logits, gt, seen, temperature)?;
    let k = logits.classes();
    let mut grad = vec![0.0; logits.pixel_count() * k];
    let mut buf = vec![0.0; channels.len()];
    for p in 0..logits.pixel_count() {
        if gt.is_ignored(p) {
            continue;
        }
        let target = target_slot(gt, p, &channels)?;
        let row = logits.pixel(p);
        for (b, &c) in buf.iter_mut().zip(&channels) {
            *b = row[c] as f64 / temperature;
        }
        let lse = log_sum_exp(&buf);
        let out = &mut grad[p * k..(p + 1) * k];
        for (slot, (&c, &s)) in channels.iter().zip(&buf).enumerate() {
            let onehot = if slot == target { 1.0 } else { 0.0 };
            out[c] = ((s - lse).exp() - onehot) / temperature;
        }
    }
    Ok(grad)
}

/// Argmax over classes, first index on ties, mapped through `class_ids`.
pub fn predict_labels(logits: &Logits, class_ids: &[u32]) -> Result<SemanticMask> {
    if class_ids.len() != logits.classes() {
        return Err(Error::ShapeMismatch(format!(
            "{} class ids for {} logit channels",
            class_ids.len(),
            logits.classes()
        )));
    }
    let labels = logits
        .scores
        .chunks(logits.classes)
        .map(|row| {
            let mut best = 0;
            for (k, &s) in row.iter().enumerate().skip(1) {
                if s > row[best] {
                    best = k;
                }
            }
            class_ids[best]
        })
        .collect();
    SemanticMask::new(logits.height, logits.width, labels)
}

fn check_inputs(
    logits: &Logits,
    gt: &SemanticMask,
    seen: &[u32],
    temperature: f64,
) -> Result<Vec<usize>> {
    if gt.height() != logits.height || gt.width() != logits.width {
        return Err(Error::ShapeMismatch(format!(
            "logits {}x{} vs mask {}x{}",
            logits.height,
            logits.width,
            gt.height(),
            gt.width()
        )));
    }
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::InvalidValue("temperature must be > 0".into()));
    }
    if seen.is_empty() {
        return Err(Error::InvalidValue("seen class list is empty".into()));
    }
    let mut channels = Vec::with_capacity(seen.len());
    for &c in seen {
        if c as usize >= logits.classes {
            return Err(Error::ClassOutOfRange {
                class: c,
                classes: logits.classes,
            });
        }
        if !channels.contains(&(c as usize)) {
            channels.push(c as usize);
        }
    }
    Ok(channels)
}

fn target_slot(gt: &SemanticMask, p: usize, channels: &[usize]) -> Result<usize> {
    let label = gt.labels()[p];
    channels
        .iter()
        .position(|&c| c == label as usize)
        .ok_or(Error::LabelOutOfFold { label, pixel: p })
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_pixel(scores: &[f32]) -> Logits {
        Logits::new(1, 1, scores.len(), scores.to_vec()).unwrap()
    }

    fn label(l: u32) -> SemanticMask {
        SemanticMask::new(1, 1, vec![l]).unwrap()
    }

    #[test]
    fn self_and_antipodal_similarity() {
        let anchors =
            AnchorSet::new(vec!["a".into(), "b".into()], 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let f = FeatureMap::new(1, 2, 2, vec![3.0, 0.0, -2.0, 0.0]).unwrap();
        let l = compute_logits(&f, &anchors).unwrap();
        assert_eq!(l.pixel(0), &[1.0, 0.0]);
        assert_eq!(l.pixel(1), &[-1.0, 0.0]);
    }

    #[test]
    fn zero_feature_scores_zero() {
        let anchors = AnchorSet::new(vec!["a".into()], 2, vec![1.0, 1.0]).unwrap();
        let f = FeatureMap::new(1, 1, 2, vec![0.0, 0.0]).unwrap();
        assert_eq!(compute_logits(&f, &anchors).unwrap().pixel(0), &[0.0]);
    }

    #[test]
    fn dim_mismatch() {
        let anchors = AnchorSet::new(vec!["a".into()], 3, vec![1.0, 1.0, 1.0]).unwrap();
        let f = FeatureMap::new(1, 1, 2, vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            compute_logits(&f, &anchors),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn uniform_softmax_loss() {
        let loss = align_loss(&one_pixel(&[0.3, 0.3]), &label(0), &[0, 1]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn closed_form_loss() {
        let loss = align_loss(&one_pixel(&[1.0, 0.0]), &label(0), &[0, 1]).unwrap();
        let expected = (1.0 + (-1.0f64).exp()).ln();
        assert!((loss - expected).abs() < 1e-12);
        assert!((loss - 0.313262).abs() < 1e-6);
    }

    #[test]
    fn ignored_pixels_contribute_nothing() {
        let l = Logits::new(1, 2, 2, vec![0.1, 0.9, -0.4, 0.2]).unwrap();
        let gt = SemanticMask::new(1, 2, vec![255, 255]).unwrap();
        assert_eq!(align_loss(&l, &gt, &[0, 1]).unwrap(), 0.0);
        assert!(align_loss_grad(&l, &gt, &[0, 1])
            .unwrap()
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn label_outside_seen() {
        let err = align_loss(&one_pixel(&[0.1, 0.2, 0.3]), &label(2), &[0, 1]);
        assert!(matches!(
            err,
            Err(Error::LabelOutOfFold { label: 2, pixel: 0 })
        ));
    }

    #[test]
    fn symmetric_gradient() {
        let g = align_loss_grad(&one_pixel(&[0.5, 0.5]), &label(0), &[0, 1]).unwrap();
        assert!((g[0] + 0.5).abs() < 1e-12);
        assert!((g[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gradient_zero_outside_seen() {
        let g = align_loss_grad(&one_pixel(&[0.5, 0.1, 0.7]), &label(2), &[0, 2]).unwrap();
        assert_eq!(g[1], 0.0);
        assert!((g[0] + g[2]).abs() < 1e-12);
    }

    #[test]
    fn temperature_sharpens() {
        let l = one_pixel(&[1.0, 0.0]);
        let base = align_loss(&l, &label(0), &[0, 1]).unwrap();
        let sharp = align_loss_scaled(&l, &label(0), &[0, 1], 0.1).unwrap();
        assert!(sharp < base);
    }

    #[test]
    fn predict_maps_ids_and_breaks_ties_low() {
        let m = predict_labels(&one_pixel(&[0.2, 0.9]), &[7, 3]).unwrap();
        assert_eq!(m.labels(), &[3]);
        let m = predict_labels(&one_pixel(&[0.5, 0.5]), &[7, 3]).unwrap();
        assert_eq!(m.labels(), &[7]);
    }
}
