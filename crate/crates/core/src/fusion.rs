//! Per-class replacement of predicted regions by their best-matching
//! eigensegment.

use serde::Serialize;

use crate::data::{BinaryMask, SemanticMask};
use crate::error::{Error, Result};
use crate::metrics::iou_counts;
use crate::spectral::EigenSegment;

/// Identifies the fusion rule in report headers.
pub const FUSION_RULE_VERSION: &str = "per-class-max-iou/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionAction {
    Replaced,
    Kept,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionRecord {
    pub class: u32,
    pub pixels: usize,
    /// Position of the best match in the segment list.
    pub segment: Option<usize>,
    pub source_eigenindex: Option<usize>,
    /// IoU of the best match; 0 when there are no segments.
    pub iou: f64,
    pub action: FusionAction,
}

/// One record per foreground class of the prediction, in processing order.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FusionTrace {
    pub records: Vec<FusionRecord>,
}

impl FusionTrace {
    /// One JSON object per line.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serialises"));
            out.push('\n');
        }
        out
    }
}

/// For each foreground class `c` in `pred` (largest region first, ties by
/// class id) the best-IoU segment replaces `pred == c` when the IoU is at
/// least `tau`; otherwise the region is written back unchanged. Later
/// classes overwrite earlier ones. Unclaimed pixels become `background`;
/// pixels ignored in `pred` stay ignored.
pub fn fuse_predictions(
    pred: &SemanticMask,
    segments: &[EigenSegment],
    tau: f64,
    background: u32,
) -> Result<(SemanticMask, FusionTrace)> {
    let (h, w) = (pred.height(), pred.width());
    if let Some(s) = segments.iter().find(|s| s.mask.height() != h || s.mask.width() != w) {
        return Err(Error::ShapeMismatch(format!(
            "segment {} is {}x{}, prediction is {h}x{w}",
            s.source_eigenindex,
            s.mask.height(),
            s.mask.width()
        )));
    }
    let mut classes: Vec<(u32, BinaryMask)> = pred
        .present_labels()
        .into_iter()
        .filter(|&c| c != background)
        .map(|c| (c, pred.class_mask(c)))
        .collect();
    classes.sort_by(|a, b| b.1.count().cmp(&a.1.count()).then(a.0.cmp(&b.0)));

    let ignore = pred.ignore_value();
    let mut out: Vec<u32> = (0..pred.len())
        .map(|i| if pred.is_ignored(i) { ignore } else { background })
        .collect();
    let mut trace = FusionTrace::default();
    for (class, region) in &classes {
        let mut best: Option<(usize, f64)> = None;
        for (k, seg) in segments.iter().enumerate() {
            let (i, u) = iou_counts(&seg.mask, region)?;
            let v = if u == 0 { 1.0 } else { i as f64 / u as f64 };
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        let best_iou = best.map_or(0.0, |(_, v)| v);
        let replace = best.filter(|_| best_iou >= tau);
        let source = match replace {
            Some((k, _)) => &segments[k].mask,
            None => region,
        };
        for (i, &on) in source.data().iter().enumerate() {
            if on && !pred.is_ignored(i) {
                out[i] = *class;
            }
        }
        trace.records.push(FusionRecord {
            class: *class,
            pixels: region.count(),
            segment: best.map(|(k, _)| k),
            source_eigenindex: best.map(|(k, _)| segments[k].source_eigenindex),
            iou: best_iou,
            action: if replace.is_some() {
                FusionAction::Replaced
            } else {
                FusionAction::Kept
            },
        });
    }
    Ok((SemanticMask::with_ignore(h, w, out, ignore)?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(mask: BinaryMask, k: usize) -> EigenSegment {
        EigenSegment {
            mask,
            source_eigenindex: k,
        }
    }

    #[test]
    fn exact_segments_are_a_fixed_point() {
        let pred = SemanticMask::new(2, 3, vec![0, 1, 1, 2, 2, 0]).unwrap();
        let segs = vec![seg(pred.class_mask(1), 1), seg(pred.class_mask(2), 2)];
        let (out, trace) = fuse_predictions(&pred, &segs, 0.5, 0).unwrap();
        assert_eq!(out, pred);
        assert!(trace
            .records
            .iter()
            .all(|r| r.action == FusionAction::Replaced && r.iou == 1.0));
    }

    #[test]
    fn low_iou_keeps_region() {
        let pred = SemanticMask::new(1, 5, vec![1, 0, 0, 0, 0]).unwrap();
        let s = BinaryMask::new(1, 5, vec![true, true, true, true, true]).unwrap();
        let (out, trace) = fuse_predictions(&pred, &[seg(s, 1)], 0.5, 0).unwrap();
        assert_eq!(out, pred);
        assert_eq!(trace.records[0].action, FusionAction::Kept);
        assert!((trace.records[0].iou - 0.2).abs() < 1e-15);
    }

    #[test]
    fn square_grows_to_object() {
        let pred = SemanticMask::new(
            5,
            6,
            (0..30)
                .map(|i| ((1..4).contains(&(i / 6)) && (1..4).contains(&(i % 6))) as u32 * 3)
                .collect(),
        )
        .unwrap();
        let object = BinaryMask::from_fn(5, 6, |r, c| (1..4).contains(&r) && (1..5).contains(&c));
        let (out, trace) = fuse_predictions(&pred, &[seg(object.clone(), 1)], 0.5, 0).unwrap();
        assert_eq!(out.class_mask(3), object);
        assert!((trace.records[0].iou - 0.75).abs() < 1e-15);
    }

    #[test]
    fn larger_class_written_first() {
        let pred = SemanticMask::new(1, 6, vec![1, 1, 1, 1, 2, 2]).unwrap();
        let s = BinaryMask::new(1, 6, vec![false, false, false, true, true, true]).unwrap();
        let (out, trace) = fuse_predictions(&pred, &[seg(s, 1)], 0.6, 0).unwrap();
        assert_eq!(trace.records[0].class, 1);
        assert_eq!(out.labels(), &[1, 1, 1, 2, 2, 2]);
    }

    #[test]
    fn shape_mismatch() {
        let pred = SemanticMask::new(2, 2, vec![1; 4]).unwrap();
        assert!(fuse_predictions(&pred, &[seg(BinaryMask::empty(2, 3), 1)], 0.5, 0).is_err());
    }

    #[test]
    fn trace_lines() {
        let pred = SemanticMask::new(1, 2, vec![1, 2]).unwrap();
        let (_, trace) = fuse_predictions(&pred, &[], 0.5, 0).unwrap();
        let text = trace.to_json_lines();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("\"action\":\"kept\""));
    }
}
