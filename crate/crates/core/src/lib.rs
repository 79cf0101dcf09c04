//! Zero-shot semantic segmentation toolkit: pixel/anchor alignment,
//! affine shape constraints, spectral eigensegments, fusion and
//! evaluation, generic over `f32`/`f64`.

pub mod align;
pub mod data;
pub mod error;
pub mod fusion;
pub mod metrics;
pub mod pipeline;
mod scalar;
pub mod shape;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Concrete `f64` instantiations used by the batch front end.
pub type Boundary = shape::BoundaryMap<f64>;
pub type Affinity = spectral::AffinityMatrix<f64>;
pub type Spectrum = spectral::LaplacianSpectrum<f64>;
pub type Affine = shape::AffineEstimate<f64>;
