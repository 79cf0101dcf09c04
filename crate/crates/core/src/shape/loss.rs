use super::affine::{estimate_affine_with, AffineOptions};
use super::patches::split_patches_grid;
use super::BoundaryMap;
use crate::data::HyperParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probability clamp for the edge BCE.
pub const BCE_EPS: f64 = 1e-7;

/// Mean Frobenius deviation from identity of the per-patch affine estimates
/// over the standard 3 x 6 grid.
pub fn shape_loss<T: Scalar>(pred: &BoundaryMap<T>, gt: &BoundaryMap<T>) -> Result<T> {
    shape_loss_with(pred, gt, 3, 6, &AffineOptions::default())
}

pub fn shape_loss_with<T: Scalar>(
    pred: &BoundaryMap<T>,
    gt: &BoundaryMap<T>,
    rows: usize,
    cols: usize,
    opts: &AffineOptions,
) -> Result<T> {
    if !pred.same_shape(gt) {
        return Err(Error::ShapeMismatch(format!(
            "boundary maps {}x{} vs {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    let p = split_patches_grid(pred, rows, cols)?;
    let g = split_patches_grid(gt, rows, cols)?;
    let mut total = T::zero();
    for (pp, gp) in p.patches.iter().zip(&g.patches) {
        total += estimate_affine_with(&pp.map, &gp.map, opts)?.deviation();
    }
    Ok(total / T::from_count(p.patches.len()))
}

/// Mean binary cross-entropy with predictions clamped to
/// `[BCE_EPS, 1 - BCE_EPS]`.
pub fn bce_loss<T: Scalar>(pred: &BoundaryMap<T>, gt: &BoundaryMap<T>) -> Result<T> {
    if !pred.same_shape(gt) {
        return Err(Error::ShapeMismatch(format!(
            "boundary maps {}x{} vs {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    let lo = T::of(BCE_EPS);
    let hi = T::one() - lo;
    let mut total = T::zero();
    for (&p, &g) in pred.values().iter().zip(gt.values()) {
        let p = p.max(lo).min(hi);
        total -= g * p.ln() + (T::one() - g) * (T::one() - p).ln();
    }
    Ok(total / T::from_count(pred.values().len().max(1)))
}

/// `align + lambda1 * shape + lambda2 * bce`.
pub fn total_loss(align: f64, shape: f64, bce: f64, hp: &HyperParams) -> Result<f64> {
    if !(align.is_finite() && shape.is_finite() && bce.is_finite()) {
        return Err(Error::NonFinite("loss component"));
    }
    let total = align + hp.lambda1 * shape + hp.lambda2 * bce;
    if !total.is_finite() {
        return Err(Error::NonFinite("total loss"));
    }
    Ok(total)
}
