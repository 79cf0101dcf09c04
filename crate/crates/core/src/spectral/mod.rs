//! Graph construction, normalised Laplacian spectrum and eigensegments.

mod affinity;
mod eigen;
mod features;
mod laplacian;
mod segments;

pub use affinity::{
    combine_affinity, semantic_affinity, shape_affinity, AffinityMatrix, DenseAffinity,
    SparseAffinity,
};
pub use eigen::{eigensolve, LaplacianSpectrum, LanczosOptions, SolverKind};
pub use features::{color_pos_features, ColorPosFeatures};
pub use laplacian::{normalized_laplacian, DenseSymmetric, NormalizedLaplacian, SymmetricOperator};
pub use segments::{
    eigensegments, DropReason, DroppedSegment, EigenSegment, SegmentSet, MAX_SEGMENT_COVER,
};

use crate::data::{EigenMode, FeatureMap, HyperParams, ImageRgb};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Picks the solver for an `n`-node graph.
pub fn resolve_solver(mode: EigenMode, n: usize, dense_max: usize) -> SolverKind {
    match mode {
        EigenMode::Dense => SolverKind::Dense,
        EigenMode::Lanczos => SolverKind::Lanczos,
        EigenMode::Auto if n <= dense_max => SolverKind::Dense,
        EigenMode::Auto => SolverKind::Lanczos,
    }
}

#[derive(Debug, Clone)]
pub struct SpectralOutput<T> {
    pub spectrum: LaplacianSpectrum<T>,
    pub segments: SegmentSet,
    pub solver: SolverKind,
}

/// Full spectral stage on one feature grid: affinity, Laplacian,
/// `k_eig + 1` eigenpairs and the resulting segments.
///
/// `image` feeds the colour/position term and is only read when
/// `lambda_affinity > 0`; it is resampled to the feature grid.
pub fn spectral_stage<T: Scalar>(
    features: &FeatureMap,
    image: Option<&ImageRgb>,
    hp: &HyperParams,
    seed: u64,
) -> Result<SpectralOutput<T>> {
    let (h, w) = (features.height(), features.width());
    let n = h * w;
    let m = hp.k_eig + 1;
    if n < m {
        return Err(Error::TooFewPixels { n, needed: m });
    }
    let sem = semantic_affinity::<T>(features, hp.n_dense_max)?;
    let z = if hp.lambda_affinity > 0.0 {
        let img = image.ok_or_else(|| {
            Error::InvalidValue("lambda_affinity > 0 needs the RGB image".into())
        })?;
        let img = if img.height() == h && img.width() == w {
            img.clone()
        } else {
            img.resize_nearest(h, w)
        };
        let shape = shape_affinity(&color_pos_features::<T>(&img), hp.k_nn)?;
        combine_affinity(&sem, &shape, T::of(hp.lambda_affinity))?
    } else {
        sem
    };
    let lap = normalized_laplacian(&z);
    let solver = resolve_solver(hp.eigen_mode, n, hp.dense_eigen_max);
    let opts = LanczosOptions {
        seed,
        ..LanczosOptions::default()
    };
    let spectrum = eigensolve(&lap, m, solver, &opts)?;
    let segments = eigensegments(&spectrum, h, w, hp.k_eig)?;
    Ok(SpectralOutput {
        spectrum,
        segments,
        solver,
    })
}
