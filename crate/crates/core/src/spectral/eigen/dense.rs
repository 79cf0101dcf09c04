//! Full symmetric eigendecomposition: Householder tridiagonalisation
//! followed by implicit QL with Wilkinson-style shifts.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigenvalues ascending; `vectors[k]` is the unit eigenvector of `values[k]`.
pub(crate) struct Decomposition<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

/// Decomposes the row-major symmetric `n x n` matrix `a`.
pub(crate) fn symmetric_eigen<T: Scalar>(n: usize, a: Vec<T>) -> Result<Decomposition<T>> {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return Ok(Decomposition {
            values: Vec::new(),
            vectors: Vec::new(),
        });
    }
    let mut v = a;
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    // rows of `w` are the columns of `v`, so QL rotations touch contiguous memory
    let mut w = transpose(n, &v);
    drop(v);
    ql_implicit(n, &mut d, &mut e, &mut w)?;
    Ok(sorted(n, d, w))
}

fn transpose<T: Scalar>(n: usize, v: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = v[i * n + j];
        }
    }
    out
}

fn sorted<T: Scalar>(n: usize, d: Vec<T>, w: Vec<T>) -> Decomposition<T> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap().then(a.cmp(&b)));
    Decomposition {
        values: order.iter().map(|&k| d[k]).collect(),
        vectors: order.iter().map(|&k| w[k * n..(k + 1) * n].to_vec()).collect(),
    }
}

/// Householder reduction of the symmetric matrix held in `v` (row-major)
/// to tridiagonal form. On return `v` holds the accumulated orthogonal
/// transform, `d` the diagonal and `e[1..]` the sub-diagonal.
fn tridiagonalize<T: Scalar>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T]) {
    let zero = T::zero();
    let idx = |r: usize, c: usize| r * n + c;
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = zero;
                v[idx(j, i)] = zero;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                f = d[j];
                v[idx(j, i)] = f;
                g = e[j] + v[idx(j, j)] * f;
                for k in j + 1..i {
                    g += v[idx(k, j)] * d[k];
                    e[k] += v[idx(k, j)] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[idx(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[idx(i - 1, j)];
                v[idx(i, j)] = zero;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[idx(n - 1, i)] = v[idx(i, i)];
        v[idx(i, i)] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[idx(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[idx(k, i + 1)] * v[idx(k, j)];
                }
                for k in 0..=i {
                    v[idx(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[idx(k, i + 1)] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[idx(n - 1, j)];
        v[idx(n - 1, j)] = zero;
    }
    v[idx(n - 1, n - 1)] = T::one();
    e[0] = zero;
}

/// Implicit QL on the tridiagonal (`d`, `e[1..]`), rotating the rows of
/// `w` (row k = current estimate of eigenvector k).
fn ql_implicit<T: Scalar>(n: usize, d: &mut [T], e: &mut [T], w: &mut [T]) -> Result<()> {
    let zero = T::zero();
    let one = T::one();
    let two = T::of(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;

    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    let max_sweeps = 60 * n.max(1);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        // e[n-1] == 0, so m < n always holds here
        let m = m.min(n - 1);
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_sweeps {
                    return Err(Error::NoConvergence {
                        converged: l,
                        wanted: n,
                        restarts: 0,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = w.split_at_mut((i + 1) * n);
                    let row_i = &mut lo[i * n..];
                    let row_i1 = &mut hi[..n];
                    for k in 0..n {
                        let hk = row_i1[k];
                        row_i1[k] = s * row_i[k] + c * hk;
                        row_i[k] = c * row_i[k] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if !(e[l].abs() > eps * tst1) {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigenvalues"));
    }
    Ok(())
}
