//! Evaluation and correlation analyses.

mod eval;
mod locality;
mod shape_stats;
mod stats;

pub use eval::{evaluate_fold, ClassEval, EvalReport, FoldAccumulator, ACCUMULATION};
pub use locality::{embedding_locality, locality_stats, LocalityRecord, LocalityStats};
pub use shape_stats::{compactness, crack_perimeter, shape_stats, ShapeClassRecord, ShapeStats};
pub use stats::{ln_gamma, pearson, regularized_incomplete_beta, student_t_two_sided, Correlation};

use crate::data::BinaryMask;
use crate::error::{Error, Result};

/// `(|a ∩ b|, |a ∪ b|)`.
pub fn iou_counts(a: &BinaryMask, b: &BinaryMask) -> Result<(u64, u64)> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(format!(
            "masks {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let (mut inter, mut union) = (0u64, 0u64);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        inter += (x && y) as u64;
        union += (x || y) as u64;
    }
    Ok((inter, union))
}

/// Intersection over union; two empty masks score 1.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (i, u) = iou_counts(a, b)?;
    Ok(if u == 0 { 1.0 } else { i as f64 / u as f64 })
}

/// Unweighted mean. Empty input gives `NaN`.
pub fn macro_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Rounds halves away from zero at `decimals` places, treating `x` as the
/// decimal it was printed from (binary noise below 1e-6 ulp of the
/// scaled value is discarded first).
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    let y = ((x * scale) * 1e6).round() / 1e6;
    let r = if y >= 0.0 {
        (y + 0.5).floor()
    } else {
        -((-y + 0.5).floor())
    };
    r / scale
}
