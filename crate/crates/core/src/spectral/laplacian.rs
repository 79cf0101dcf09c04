use super::affinity::AffinityMatrix;
use crate::scalar::Scalar;

/// A symmetric linear operator the eigensolvers can work with.
pub trait SymmetricOperator<T>: Sync {
    fn dim(&self) -> usize;

    /// `y = A x`.
    fn apply(&self, x: &[T], y: &mut [T]);

    /// Row-major dense copy of the operator.
    fn to_dense(&self) -> Vec<T>;
}

/// `L = I - D^{-1/2} Z D^{-1/2}` applied without materialising `L`.
///
/// Isolated nodes (zero degree) get `L[i,i] = 1` and no off-diagonal terms.
#[derive(Debug, Clone)]
pub struct NormalizedLaplacian<'a, T> {
    affinity: &'a AffinityMatrix<T>,
    inv_sqrt_degree: Vec<T>,
}

pub fn normalized_laplacian<T: Scalar>(z: &AffinityMatrix<T>) -> NormalizedLaplacian<'_, T> {
    let inv_sqrt_degree = z
        .degrees()
        .into_iter()
        .map(|d| if d > T::zero() { T::one() / d.sqrt() } else { T::zero() })
        .collect();
    NormalizedLaplacian {
        affinity: z,
        inv_sqrt_degree,
    }
}

impl<T: Scalar> NormalizedLaplacian<'_, T> {
    pub fn inv_sqrt_degree(&self) -> &[T] {
        &self.inv_sqrt_degree
    }
}

impl<T: Scalar> SymmetricOperator<T> for NormalizedLaplacian<'_, T> {
    fn dim(&self) -> usize {
        self.affinity.n()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let scaled: Vec<T> = x
            .iter()
            .zip(&self.inv_sqrt_degree)
            .map(|(&a, &s)| a * s)
            .collect();
        self.affinity.matvec(&scaled, y);
        for ((yi, &xi), &s) in y.iter_mut().zip(x).zip(&self.inv_sqrt_degree) {
            *yi = xi - s * *yi;
        }
    }

    fn to_dense(&self) -> Vec<T> {
        let n = self.dim();
        let mut out = self.affinity.to_dense();
        for i in 0..n {
            for j in 0..n {
                let v = &mut out[i * n + j];
                let off = self.inv_sqrt_degree[i] * *v * self.inv_sqrt_degree[j];
                *v = if i == j { T::one() - off } else { -off };
            }
        }
        out
    }
}

/// Plain row-major symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetric<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseSymmetric<T> {
    pub fn new(n: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * n, "dense symmetric matrix shape");
        Self { n, data }
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }
}

impl<T: Scalar> SymmetricOperator<T> for DenseSymmetric<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (&a, &b) in self.data[i * self.n..(i + 1) * self.n].iter().zip(x) {
                acc += a * b;
            }
            *yi = acc;
        }
    }

    fn to_dense(&self) -> Vec<T> {
        self.data.clone()
    }
}
