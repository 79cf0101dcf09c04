use std::cmp::Ordering;

use rayon::prelude::*;

use super::features::ColorPosFeatures;
use crate::data::FeatureMap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Symmetric nonnegative pixel graph, dense or as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq)]
pub enum AffinityMatrix<T> {
    Dense(DenseAffinity<T>),
    Sparse(SparseAffinity<T>),
}

/// Row-major `n x n` storage.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseAffinity<T> {
    n: usize,
    data: Vec<T>,
}

/// Per-row `(column, weight)` lists sorted by column; both `(i, j)` and
/// `(j, i)` are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAffinity<T> {
    n: usize,
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> DenseAffinity<T> {
    /// Wraps a row-major matrix, checking shape, symmetry and sign.
    pub fn from_rows(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {n}x{n} affinity",
                data.len()
            )));
        }
        let m = Self { n, data };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        let tol = T::of(1e-6);
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.data[i * self.n + j];
                if !v.is_finite() || v < T::zero() {
                    return Err(Error::InvalidValue(format!("affinity ({i},{j}) = {v}")));
                }
                if (v - self.data[j * self.n + i]).abs() > tol {
                    return Err(Error::InvalidValue(format!("affinity asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(())
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

impl<T: Scalar> SparseAffinity<T> {
    /// Builds from `(i, j, w)` triples; duplicates keep the larger weight
    /// and the result is symmetrised by entrywise max.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, T)>) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (i, j, w) in triplets {
            if i >= n || j >= n {
                return Err(Error::ShapeMismatch(format!("entry ({i},{j}) outside {n} nodes")));
            }
            if !w.is_finite() || w < T::zero() {
                return Err(Error::InvalidValue(format!("affinity ({i},{j}) = {w}")));
            }
            rows[i].push((j, w));
            if i != j {
                rows[j].push((i, w));
            }
        }
        for row in &mut rows {
            row.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal)));
            row.dedup_by(|later, first| later.0 == first.0);
        }
        Ok(Self { n, rows })
    }

    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

impl<T: Scalar> AffinityMatrix<T> {
    pub fn n(&self) -> usize {
        match self {
            AffinityMatrix::Dense(d) => d.n,
            AffinityMatrix::Sparse(s) => s.n,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        match self {
            AffinityMatrix::Dense(d) => d.data[i * d.n + j],
            AffinityMatrix::Sparse(s) => s.rows[i]
                .binary_search_by_key(&j, |e| e.0)
                .map(|k| s.rows[i][k].1)
                .unwrap_or_else(|_| T::zero()),
        }
    }

    /// Row sums, each accumulated in column order.
    pub fn degrees(&self) -> Vec<T> {
        match self {
            AffinityMatrix::Dense(d) => (0..d.n).map(|i| d.row(i).iter().copied().sum()).collect(),
            AffinityMatrix::Sparse(s) => s
                .rows
                .iter()
                .map(|r| r.iter().map(|e| e.1).sum())
                .collect(),
        }
    }

    /// `y = Z x`; rows are independent so the result does not depend on
    /// the number of worker threads.
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        match self {
            AffinityMatrix::Dense(d) => {
                y.par_iter_mut().enumerate().for_each(|(i, yi)| {
                    let mut acc = T::zero();
                    for (&a, &b) in d.row(i).iter().zip(x) {
                        acc += a * b;
                    }
                    *yi = acc;
                });
            }
            AffinityMatrix::Sparse(s) => {
                y.par_iter_mut().enumerate().for_each(|(i, yi)| {
                    let mut acc = T::zero();
                    for &(j, w) in &s.rows[i] {
                        acc += w * x[j];
                    }
                    *yi = acc;
                });
            }
        }
    }

    pub fn to_dense(&self) -> Vec<T> {
        match self {
            AffinityMatrix::Dense(d) => d.data.clone(),
            AffinityMatrix::Sparse(s) => {
                let mut out = vec![T::zero(); s.n * s.n];
                for (i, row) in s.rows.iter().enumerate() {
                    for &(j, w) in row {
                        out[i * s.n + j] = w;
                    }
                }
                out
            }
        }
    }

    /// Largest `|Z[i,j] - Z[j,i]|`.
    pub fn asymmetry(&self) -> T {
        let n = self.n();
        let mut worst = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn min_entry(&self) -> T {
        match self {
            AffinityMatrix::Dense(d) => d.data.iter().copied().fold(T::infinity(), T::min),
            AffinityMatrix::Sparse(s) => s
                .rows
                .iter()
                .flatten()
                .map(|e| e.1)
                .fold(T::zero(), T::min),
        }
    }
}

/// KNN colour/position affinity `max(0, 1 - |X(i) - X(j)|)` over each
/// pixel's `k_nn` nearest neighbours (self excluded, ties to the lower
/// index), symmetrised by entrywise max.
pub fn shape_affinity<T: Scalar>(feats: &ColorPosFeatures<T>, k_nn: usize) -> Result<AffinityMatrix<T>> {
    let n = feats.len();
    if k_nn == 0 || n < k_nn + 1 {
        return Err(Error::TooFewPixels {
            n,
            needed: k_nn + 1,
        });
    }
    let neighbours: Vec<Vec<(usize, T)>> = (0..n)
        .into_par_iter()
        .map(|i| nearest(feats, i, k_nn))
        .collect();
    let triplets = neighbours.into_iter().enumerate().flat_map(|(i, nb)| {
        nb.into_iter()
            .map(move |(j, d)| (i, j, (T::one() - d).max(T::zero())))
    });
    Ok(AffinityMatrix::Sparse(SparseAffinity::from_triplets(n, triplets)?))
}

/// The `k` nearest rows to row `i` as `(index, distance)`.
pub(crate) fn nearest<T: Scalar>(feats: &ColorPosFeatures<T>, i: usize, k: usize) -> Vec<(usize, T)> {
    let xi = &feats.coords[i];
    let mut cand: Vec<(T, usize)> = feats
        .coords
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, xj)| {
            let d2: T = xi.iter().zip(xj).map(|(&a, &b)| (a - b) * (a - b)).sum();
            (d2, j)
        })
        .collect();
    let cmp = |a: &(T, usize), b: &(T, usize)| {
        a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1))
    };
    if cand.len() > k {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_by(cmp);
    cand.into_iter().map(|(d2, j)| (j, d2.sqrt())).collect()
}

/// Dense `max(0, f_i · f_j)` over raster-ordered feature vectors.
pub fn semantic_affinity<T: Scalar>(feats: &FeatureMap, n_dense_max: usize) -> Result<AffinityMatrix<T>> {
    let n = feats.pixel_count();
    if n > n_dense_max {
        return Err(Error::GraphTooLarge {
            n,
            limit: n_dense_max,
        });
    }
    let d = feats.dim();
    let rows: Vec<T> = feats.data().iter().map(|&v| T::of(v as f64)).collect();
    let mut data = vec![T::zero(); n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        let fi = &rows[i * d..(i + 1) * d];
        for (j, o) in out.iter_mut().enumerate() {
            let fj = &rows[j * d..(j + 1) * d];
            let mut acc = T::zero();
            for (&a, &b) in fi.iter().zip(fj) {
                acc += a * b;
            }
            *o = acc.max(T::zero());
        }
    });
    Ok(AffinityMatrix::Dense(DenseAffinity { n, data }))
}

/// `Z_sem + lambda * Z_shape`; `lambda == 0` returns `sem` unchanged.
pub fn combine_affinity<T: Scalar>(
    sem: &AffinityMatrix<T>,
    shape: &AffinityMatrix<T>,
    lambda: T,
) -> Result<AffinityMatrix<T>> {
    if sem.n() != shape.n() {
        return Err(Error::SizeMismatch(sem.n(), shape.n()));
    }
    if !(lambda.is_finite() && lambda >= T::zero()) {
        return Err(Error::InvalidValue(format!("affinity weight {lambda}")));
    }
    if lambda == T::zero() {
        return Ok(sem.clone());
    }
    let n = sem.n();
    match (sem, shape) {
        (AffinityMatrix::Sparse(a), AffinityMatrix::Sparse(b)) => {
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                let mut merged: Vec<(usize, T)> = Vec::with_capacity(a.rows[i].len() + b.rows[i].len());
                let (mut p, mut q) = (0, 0);
                let (ra, rb) = (&a.rows[i], &b.rows[i]);
                while p < ra.len() || q < rb.len() {
                    match (ra.get(p), rb.get(q)) {
                        (Some(&(ja, wa)), Some(&(jb, wb))) if ja == jb => {
                            merged.push((ja, wa + lambda * wb));
                            p += 1;
                            q += 1;
                        }
                        (Some(&(ja, wa)), Some(&(jb, _))) if ja < jb => {
                            merged.push((ja, wa));
                            p += 1;
                        }
                        (Some(&(ja, wa)), None) => {
                            merged.push((ja, wa));
                            p += 1;
                        }
                        (_, Some(&(jb, wb))) => {
                            merged.push((jb, lambda * wb));
                            q += 1;
                        }
                        (None, None) => unreachable!(),
                    }
                }
                rows.push(merged);
            }
            Ok(AffinityMatrix::Sparse(SparseAffinity { n, rows }))
        }
        _ => {
            let mut data = sem.to_dense();
            match shape {
                AffinityMatrix::Sparse(s) => {
                    for (i, row) in s.rows.iter().enumerate() {
                        for &(j, w) in row {
                            data[i * n + j] += lambda * w;
                        }
                    }
                }
                AffinityMatrix::Dense(d) => {
                    for (z, &w) in data.iter_mut().zip(&d.data) {
                        *z += lambda * w;
                    }
                }
            }
            Ok(AffinityMatrix::Dense(DenseAffinity { n, data }))
        }
    }
}
