mod dense;
mod lanczos;

pub use lanczos::LanczosOptions;

use super::laplacian::SymmetricOperator;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solver used by [`eigensolve`]; `Auto` is resolved by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Dense,
    Lanczos,
}

/// The `m` smallest eigenpairs, ascending.
///
/// Each vector has unit norm and its largest-magnitude entry is positive
/// (ties go to the lowest index).
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianSpectrum<T> {
    n: usize,
    values: Vec<T>,
    vectors: Vec<Vec<T>>,
}

impl<T: Scalar> LaplacianSpectrum<T> {
    /// Sorts ascending, normalises length and sign.
    pub fn new(n: usize, values: Vec<T>, vectors: Vec<Vec<T>>) -> Result<Self> {
        if values.len() != vectors.len() || vectors.iter().any(|v| v.len() != n) {
            return Err(Error::ShapeMismatch(format!(
                "{} eigenvalues, {} vectors of length {n}",
                values.len(),
                vectors.len()
            )));
        }
        if values.iter().chain(vectors.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("eigenpair"));
        }
        let mut pairs: Vec<(T, Vec<T>)> = values.into_iter().zip(vectors).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut values = Vec::with_capacity(pairs.len());
        let mut vectors = Vec::with_capacity(pairs.len());
        for (val, mut vec) in pairs {
            normalize_sign(&mut vec)?;
            values.push(val);
            vectors.push(vec);
        }
        Ok(Self {
            n,
            values,
            vectors,
        })
    }

    /// Node count.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn vector(&self, k: usize) -> &[T] {
        &self.vectors[k]
    }

    pub fn vectors(&self) -> &[Vec<T>] {
        &self.vectors
    }
}

/// Rescales to unit norm and flips so the largest-magnitude entry is positive.
pub(crate) fn normalize_sign<T: Scalar>(v: &mut [T]) -> Result<()> {
    let nv = crate::scalar::norm(v);
    if !(nv > T::zero()) {
        return Err(Error::DegenerateInput("zero eigenvector"));
    }
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    let s = if v[best] < T::zero() { -nv } else { nv };
    v.iter_mut().for_each(|x| *x /= s);
    Ok(())
}

/// The `m` smallest eigenpairs of `op`.
pub fn eigensolve<T: Scalar, A: SymmetricOperator<T> + ?Sized>(
    op: &A,
    m: usize,
    kind: SolverKind,
    opts: &LanczosOptions,
) -> Result<LaplacianSpectrum<T>> {
    let n = op.dim();
    if m > n {
        return Err(Error::TooFewPixels { n, needed: m });
    }
    let (values, vectors) = match kind {
        SolverKind::Dense => {
            let dec = dense::symmetric_eigen(n, op.to_dense())?;
            (
                dec.values[..m].to_vec(),
                dec.vectors.into_iter().take(m).collect(),
            )
        }
        SolverKind::Lanczos => lanczos::lanczos_smallest(op, m, opts)?,
    };
    LaplacianSpectrum::new(n, values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::laplacian::DenseSymmetric;

    #[test]
    fn sign_rule() {
        let mut v = vec![0.6f64, -0.8];
        normalize_sign(&mut v).unwrap();
        assert_eq!(v, vec![-0.6, 0.8]);
        // tie on magnitude: lowest index decides
        let mut v = vec![-1.0f64, 1.0];
        normalize_sign(&mut v).unwrap();
        assert!(v[0] > 0.0 && v[1] < 0.0);
    }

    #[test]
    fn complete_graph_two_smallest() {
        let n = 4;
        let l: Vec<f64> = (0..n * n)
            .map(|k| if k / n == k % n { 0.75 } else { -0.25 })
            .collect();
        let op = DenseSymmetric::new(n, l);
        for kind in [SolverKind::Dense, SolverKind::Lanczos] {
            let s = eigensolve(&op, 2, kind, &LanczosOptions::default()).unwrap();
            assert!(s.values()[0].abs() < 1e-10);
            assert!((s.values()[1] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn lanczos_is_repeatable() {
        let n = 60;
        let l: Vec<f64> = (0..n * n)
            .map(|k| {
                let (i, j): (usize, usize) = (k / n, k % n);
                if i == j {
                    2.0 + (i as f64).sin()
                } else if i.abs_diff(j) == 1 {
                    -0.5
                } else {
                    0.0
                }
            })
            .collect();
        let op = DenseSymmetric::new(n, l);
        let opts = LanczosOptions {
            max_basis: 25,
            ..LanczosOptions::default()
        };
        let a = eigensolve(&op, 4, SolverKind::Lanczos, &opts).unwrap();
        let b = eigensolve(&op, 4, SolverKind::Lanczos, &opts).unwrap();
        assert_eq!(a, b);
        let d = eigensolve(&op, 4, SolverKind::Dense, &opts).unwrap();
        for k in 0..4 {
            assert!((a.values()[k] - d.values()[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn too_many_pairs() {
        let op = DenseSymmetric::new(1, vec![1.0f64]);
        assert!(eigensolve(&op, 2, SolverKind::Dense, &LanczosOptions::default()).is_err());
    }
}
