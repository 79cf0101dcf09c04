use serde::Serialize;

use super::eigen::LaplacianSpectrum;
use crate::data::BinaryMask;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Segments covering more than this fraction of the frame are dropped.
pub const MAX_SEGMENT_COVER: f64 = 0.98;

/// Binarised eigenvector: the above-mean side of eigenvector `source_eigenindex`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EigenSegment {
    pub mask: BinaryMask,
    pub source_eigenindex: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Empty,
    FullFrame,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedSegment {
    pub source_eigenindex: usize,
    pub reason: DropReason,
    pub pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SegmentSet {
    pub segments: Vec<EigenSegment>,
    pub dropped: Vec<DroppedSegment>,
}

/// Thresholds eigenvectors `1..=k_eig` at their mean.
///
/// Index 0 is never used. If the spectrum holds fewer than `k_eig + 1`
/// vectors, the available ones are used.
pub fn eigensegments<T: Scalar>(
    spectrum: &LaplacianSpectrum<T>,
    height: usize,
    width: usize,
    k_eig: usize,
) -> Result<SegmentSet> {
    let n = height * width;
    if spectrum.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "spectrum over {} nodes vs {height}x{width} grid",
            spectrum.n()
        )));
    }
    let mut out = SegmentSet::default();
    let last = k_eig.min(spectrum.len().saturating_sub(1));
    for k in 1..=last {
        let v = spectrum.vector(k);
        let mean = v.iter().copied().sum::<T>() / T::from_count(n);
        let data: Vec<bool> = v.iter().map(|&x| x > mean).collect();
        let mask = BinaryMask::new(height, width, data)?;
        let pixels = mask.count();
        let reason = if pixels == 0 {
            Some(DropReason::Empty)
        } else if pixels as f64 > MAX_SEGMENT_COVER * n as f64 {
            Some(DropReason::FullFrame)
        } else {
            None
        };
        match reason {
            Some(reason) => {
                log::debug!("eigenvector {k} dropped: {reason:?}");
                out.dropped.push(DroppedSegment {
                    source_eigenindex: k,
                    reason,
                    pixels,
                });
            }
            None => out.segments.push(EigenSegment {
                mask,
                source_eigenindex: k,
            }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(vectors: Vec<Vec<f64>>) -> LaplacianSpectrum<f64> {
        let n = vectors[0].len();
        let vals = (0..vectors.len()).map(|k| k as f64 * 0.1).collect();
        LaplacianSpectrum::new(n, vals, vectors).unwrap()
    }

    #[test]
    fn skips_index_zero_and_constant_vectors() {
        let s = spectrum(vec![vec![0.5; 4], vec![0.5; 4], vec![1.0, 1.0, -1.0, -1.0]]);
        let set = eigensegments(&s, 2, 2, 5).unwrap();
        assert_eq!(set.dropped.len(), 1);
        assert_eq!(set.dropped[0].reason, DropReason::Empty);
        assert_eq!(set.segments.len(), 1);
        assert_eq!(set.segments[0].source_eigenindex, 2);
        assert_eq!(set.segments[0].mask.data(), &[true, true, false, false]);
    }

    #[test]
    fn sign_flip_is_invisible() {
        let v = vec![0.1, -0.9, 0.3, 0.2];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let a = eigensegments(&spectrum(vec![vec![0.5; 4], v]), 2, 2, 1).unwrap();
        let b = eigensegments(&spectrum(vec![vec![0.5; 4], neg]), 2, 2, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_frame_dropped() {
        let mut v = vec![1.0; 100];
        v[0] = -0.5;
        let set = eigensegments(&spectrum(vec![vec![0.1; 100], v]), 10, 10, 1).unwrap();
        assert_eq!(set.dropped[0].reason, DropReason::FullFrame);
        assert_eq!(set.dropped[0].pixels, 99);
    }
}
