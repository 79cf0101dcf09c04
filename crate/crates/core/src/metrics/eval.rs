use serde::Serialize;

use crate::data::{FoldSpec, SemanticMask};
use crate::error::{Error, Result};

/// Recorded in reports: counts are summed over the split before dividing.
pub const ACCUMULATION: &str = "dataset-accumulated";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassEval {
    pub class: u32,
    pub name: Option<String>,
    pub intersection: u64,
    pub union: u64,
    /// `None` when the class never occurs in either stream.
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub classes: Vec<ClassEval>,
    /// Mean over target classes with nonzero union.
    pub miou: Option<f64>,
    pub fb_iou: Option<f64>,
    pub fg_iou: Option<f64>,
    pub bg_iou: Option<f64>,
    pub images: usize,
    /// Target classes with zero union over the whole split.
    pub absent_classes: Vec<u32>,
    /// (image, target class) pairs empty in both masks.
    pub both_empty_pairs: u64,
    pub accumulation: &'static str,
}

/// Additive per-class counts; merging is associative and commutative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAccumulator {
    targets: Vec<u32>,
    inter: Vec<u64>,
    union: Vec<u64>,
    fg: [u64; 2],
    bg: [u64; 2],
    images: usize,
    both_empty: u64,
}

impl FoldAccumulator {
    pub fn new(fold: &FoldSpec) -> Self {
        let targets = fold.unseen.clone();
        let k = targets.len();
        Self {
            targets,
            inter: vec![0; k],
            union: vec![0; k],
            fg: [0; 2],
            bg: [0; 2],
            images: 0,
            both_empty: 0,
        }
    }

    /// Adds one aligned (prediction, ground truth) pair. Pixels ignored in
    /// the ground truth are skipped.
    pub fn add(&mut self, pred: &SemanticMask, gt: &SemanticMask) -> Result<()> {
        if !pred.same_shape(gt) {
            return Err(Error::StreamMismatch(format!(
                "image {}: prediction {}x{} vs ground truth {}x{}",
                self.images,
                pred.height(),
                pred.width(),
                gt.height(),
                gt.width()
            )));
        }
        let k = self.targets.len();
        let slot = |label: u32| self.targets.iter().position(|&t| t == label);
        let mut inter = vec![0u64; k];
        let mut union = vec![0u64; k];
        let (mut fg, mut bg) = ([0u64; 2], [0u64; 2]);
        for (i, (&p, &g)) in pred.labels().iter().zip(gt.labels()).enumerate() {
            if gt.is_ignored(i) {
                continue;
            }
            let (sp, sg) = (slot(p), slot(g));
            match (sp, sg) {
                (Some(a), Some(b)) if a == b => {
                    inter[a] += 1;
                    union[a] += 1;
                }
                _ => {
                    if let Some(a) = sp {
                        union[a] += 1;
                    }
                    if let Some(b) = sg {
                        union[b] += 1;
                    }
                }
            }
            let (pf, gf) = (sp.is_some(), sg.is_some());
            fg[0] += (pf && gf) as u64;
            fg[1] += (pf || gf) as u64;
            bg[0] += (!pf && !gf) as u64;
            bg[1] += (!pf || !gf) as u64;
        }
        for c in 0..k {
            self.inter[c] += inter[c];
            self.union[c] += union[c];
            self.both_empty += (union[c] == 0) as u64;
        }
        for j in 0..2 {
            self.fg[j] += fg[j];
            self.bg[j] += bg[j];
        }
        self.images += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &FoldAccumulator) {
        assert_eq!(self.targets, other.targets, "merging different folds");
        for c in 0..self.targets.len() {
            self.inter[c] += other.inter[c];
            self.union[c] += other.union[c];
        }
        for j in 0..2 {
            self.fg[j] += other.fg[j];
            self.bg[j] += other.bg[j];
        }
        self.images += other.images;
        self.both_empty += other.both_empty;
    }

    pub fn report(&self, fold: &FoldSpec) -> EvalReport {
        let ratio = |i: u64, u: u64| (u > 0).then(|| i as f64 / u as f64);
        let classes: Vec<ClassEval> = self
            .targets
            .iter()
            .enumerate()
            .map(|(c, &class)| ClassEval {
                class,
                name: fold.dataset.class_name(class).map(str::to_owned),
                intersection: self.inter[c],
                union: self.union[c],
                iou: ratio(self.inter[c], self.union[c]),
            })
            .collect();
        let present: Vec<f64> = classes.iter().filter_map(|c| c.iou).collect();
        let miou = (!present.is_empty()).then(|| super::macro_mean(&present));
        let fg_iou = ratio(self.fg[0], self.fg[1]);
        let bg_iou = ratio(self.bg[0], self.bg[1]);
        let parts: Vec<f64> = [fg_iou, bg_iou].into_iter().flatten().collect();
        EvalReport {
            absent_classes: classes.iter().filter(|c| c.iou.is_none()).map(|c| c.class).collect(),
            classes,
            miou,
            fb_iou: (!parts.is_empty()).then(|| super::macro_mean(&parts)),
            fg_iou,
            bg_iou,
            images: self.images,
            both_empty_pairs: self.both_empty,
            accumulation: ACCUMULATION,
        }
    }
}

/// Dataset-accumulated IoU over the fold's target (unseen) classes.
pub fn evaluate_fold(preds: &[SemanticMask], gts: &[SemanticMask], fold: &FoldSpec) -> Result<EvalReport> {
    if preds.len() != gts.len() {
        return Err(Error::StreamMismatch(format!(
            "{} predictions vs {} ground truths",
            preds.len(),
            gts.len()
        )));
    }
    let mut acc = FoldAccumulator::new(fold);
    for (p, g) in preds.iter().zip(gts) {
        acc.add(p, g)?;
    }
    Ok(acc.report(fold))
}

impl EvalReport {
    /// `class,name,intersection,union,iou` rows; absent classes leave `iou` empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,name,intersection,union,iou\n");
        for c in &self.classes {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.class,
                c.name.as_deref().unwrap_or(""),
                c.intersection,
                c.union,
                c.iou.map(|v| format!("{v:.6}")).unwrap_or_default()
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fold() -> FoldSpec {
        FoldSpec::custom(4, vec![1, 2]).unwrap()
    }

    #[test]
    fn identical_streams_score_one() {
        let gt = SemanticMask::new(2, 3, vec![0, 1, 1, 2, 2, 3]).unwrap();
        let r = evaluate_fold(&[gt.clone()], &[gt], &fold()).unwrap();
        assert_eq!(r.miou, Some(1.0));
        assert_eq!(r.fb_iou, Some(1.0));
        assert!(r.classes.iter().all(|c| c.iou == Some(1.0)));
    }

    #[test]
    fn counts_accumulate_before_division() {
        let g1 = SemanticMask::new(1, 4, vec![1, 1, 1, 0]).unwrap();
        let p1 = SemanticMask::new(1, 4, vec![1, 1, 1, 1]).unwrap();
        let g2 = SemanticMask::new(1, 4, vec![1, 0, 0, 0]).unwrap();
        let p2 = SemanticMask::new(1, 4, vec![0, 0, 0, 0]).unwrap();
        let r = evaluate_fold(&[p1, p2], &[g1, g2], &fold()).unwrap();
        let c1 = &r.classes[0];
        assert_eq!((c1.intersection, c1.union), (3, 5));
        assert_eq!(r.miou, Some(0.6));
        assert_eq!(r.absent_classes, vec![2]);
        assert_eq!(r.both_empty_pairs, 2);
    }

    #[test]
    fn ignore_pixels_skipped() {
        let gt = SemanticMask::new(1, 3, vec![1, 255, 0]).unwrap();
        let pred = SemanticMask::new(1, 3, vec![1, 1, 1]).unwrap();
        let r = evaluate_fold(&[pred], &[gt], &fold()).unwrap();
        assert_eq!(r.classes[0].union, 2);
    }

    #[test]
    fn stream_mismatch() {
        let a = SemanticMask::new(1, 3, vec![1, 1, 1]).unwrap();
        let b = SemanticMask::new(3, 1, vec![1, 1, 1]).unwrap();
        assert!(evaluate_fold(&[a.clone()], &[b], &fold()).is_err());
        assert!(evaluate_fold(&[a.clone(), a.clone()], &[a], &fold()).is_err());
    }
}
