//! Boundary objective: Sobel edges, patch tiling, affine deviation and the
//! loss terms built on them.

mod affine;
mod loss;
mod patches;
mod sobel;

pub use affine::{estimate_affine, estimate_affine_with, AffineEstimate, AffineOptions};
pub use loss::{bce_loss, shape_loss, shape_loss_with, total_loss, BCE_EPS};
pub use patches::{split_patches, split_patches_grid, Patch, PatchGrid};
pub use sobel::{mask_to_edges, sobel};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Edge-strength map with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMap<T> {
    height: usize,
    width: usize,
    values: Vec<T>,
}

impl<T: Scalar> BoundaryMap<T> {
    pub fn new(height: usize, width: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "boundary map {height}x{width} with {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("boundary map"));
        }
        if values.iter().any(|&v| v < T::zero() || v > T::one()) {
            return Err(Error::InvalidValue("boundary values must lie in [0, 1]".into()));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![T::zero(); height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.width + col]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn mass(&self) -> T {
        self.values.iter().copied().sum()
    }

    /// Sub-map of `rows x cols` starting at `(row0, col0)`.
    pub fn crop(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for r in row0..row0 + rows {
            values.extend_from_slice(&self.values[r * self.width + col0..r * self.width + col0 + cols]);
        }
        Self {
            height: rows,
            width: cols,
            values,
        }
    }

    /// Horizontal mirror image.
    pub fn flip_horizontal(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.height {
            for c in (0..self.width).rev() {
                values.push(self.get(r, c));
            }
        }
        Self {
            height: self.height,
            width: self.width,
            values,
        }
    }

    pub(crate) fn from_raw(height: usize, width: usize, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        Self {
            height,
            width,
            values,
        }
    }
}
