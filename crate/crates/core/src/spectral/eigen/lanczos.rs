//! Thick-restart Lanczos with full reorthogonalisation and locking, for
//! the few smallest eigenpairs of a symmetric operator.
//!
//! The projected matrix `H = Qᵀ A Q` is assembled from the Gram-Schmidt
//! coefficients, so after a restart (where `H` stops being tridiagonal)
//! Rayleigh-Ritz stays exact. `A Q = Q H + r e_kᵀ` holds throughout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::symmetric_eigen;
use crate::error::{Error, Result};
use crate::scalar::{dot, norm, Scalar};
use crate::spectral::laplacian::SymmetricOperator;

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosOptions {
    pub seed: u64,
    /// Required residual `‖A v − λ v‖` per pair; floored at `100 ε`.
    pub tol: f64,
    pub max_restarts: usize,
    /// Krylov basis cap per cycle; 0 picks `max(20 m, 300)`.
    pub max_basis: usize,
    /// Minimum number of steps between Ritz checks.
    pub check_every: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            tol: 1e-8,
            max_restarts: 5,
            max_basis: 0,
            check_every: 10,
        }
    }
}

struct Ritz<T> {
    value: T,
    vector: Vec<T>,
}

/// Eigenpairs ascending by value, vectors unit norm.
pub(crate) fn lanczos_smallest<T: Scalar, A: SymmetricOperator<T> + ?Sized>(
    op: &A,
    m: usize,
    opts: &LanczosOptions,
) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let n = op.dim();
    assert!(m <= n, "requested more eigenpairs than the dimension");
    let tol = T::of(opts.tol).max(T::of(100.0) * T::epsilon());
    let cap = if opts.max_basis == 0 {
        (20 * m).max(300)
    } else {
        opts.max_basis.max(2)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<Ritz<T>> = Vec::with_capacity(m);
    let locked_vecs = |l: &[Ritz<T>]| l.iter().map(|r| r.vector.clone()).collect::<Vec<_>>();

    let mut thick: Vec<Ritz<T>> = Vec::new();
    let mut residual_dir = random_unit(&mut rng, n, &[]);
    let mut residual_coupling: Vec<T> = Vec::new();
    let mut restarts = 0;
    loop {
        let want = m - locked.len();
        let lv = locked_vecs(&locked);
        let kmax = cap.min(n - locked.len()).max(thick.len() + 1);
        let mut cycle = Cycle::new(n, &lv, thick, residual_dir, residual_coupling);
        cycle.run(op, &mut rng, kmax, want, tol, opts.check_every.max(1))?;
        let keep = (want + want.max(8)).min(kmax / 2).max(want).min(cycle.len());
        let (ritz, beta, next_dir, coupling) = cycle.finish(keep)?;

        // lock the converged leading prefix
        let mut rest = Vec::new();
        for r in ritz {
            if rest.is_empty() && locked.len() < m && residual(op, r.value, &r.vector) <= tol {
                locked.push(r);
            } else {
                rest.push(r);
            }
        }
        if locked.len() == m {
            break;
        }
        if restarts == opts.max_restarts {
            return Err(Error::NoConvergence {
                converged: locked.len(),
                wanted: m,
                restarts,
            });
        }
        restarts += 1;
        log::debug!("lanczos restart {restarts}: {} of {m} locked", locked.len());

        // retained Ritz vectors couple to the residual direction only
        let dropped = coupling.len() - rest.len();
        residual_coupling = coupling[dropped..].to_vec();
        thick = rest;
        residual_dir = match next_dir {
            Some(q) if beta > T::zero() => q,
            _ => {
                residual_coupling.iter_mut().for_each(|c| *c = T::zero());
                let mut against = locked_vecs(&locked);
                against.extend(thick.iter().map(|r| r.vector.clone()));
                random_unit(&mut rng, n, &against)
            }
        };
    }

    locked.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    Ok(locked.into_iter().map(|r| (r.value, r.vector)).unzip())
}

/// One Krylov cycle: orthonormal `basis`, projected matrix `h` (row-major,
/// `cap x cap`), and the unnormalised residual `w` of the last column.
struct Cycle<'a, T> {
    n: usize,
    locked: &'a [Vec<T>],
    basis: Vec<Vec<T>>,
    h: Vec<Vec<T>>,
    w: Vec<T>,
    beta: T,
    scale: T,
}

impl<'a, T: Scalar> Cycle<'a, T> {
    fn new(n: usize, locked: &'a [Vec<T>], thick: Vec<Ritz<T>>, start: Vec<T>, coupling: Vec<T>) -> Self {
        let p = thick.len();
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(p + 1);
        let mut h = vec![vec![T::zero(); p + 1]; p + 1];
        let mut scale = T::zero();
        for (i, r) in thick.into_iter().enumerate() {
            h[i][i] = r.value;
            h[i][p] = coupling[i];
            h[p][i] = coupling[i];
            scale = scale.max(r.value.abs());
            basis.push(r.vector);
        }
        let mut start = start;
        orthogonalize(&mut start, locked, &basis, None);
        let ns = norm(&start);
        start.iter_mut().for_each(|x| *x /= ns);
        basis.push(start);
        Self {
            n,
            locked,
            basis,
            h,
            w: vec![T::zero(); n],
            beta: T::zero(),
            scale,
        }
    }

    fn len(&self) -> usize {
        self.basis.len()
    }

    fn run<A: SymmetricOperator<T> + ?Sized>(
        &mut self,
        op: &A,
        rng: &mut ChaCha8Rng,
        kmax: usize,
        want: usize,
        tol: T,
        check_every: usize,
    ) -> Result<()> {
        let mut last_check = self.len();
        loop {
            let j = self.len() - 1;
            op.apply(&self.basis[j], &mut self.w);
            if self.w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("operator output"));
            }
            let mut coeffs = vec![T::zero(); j + 1];
            orthogonalize(&mut self.w, self.locked, &self.basis, Some(&mut coeffs));
            // column j of H, measured rather than assumed
            for (i, &c) in coeffs.iter().enumerate() {
                self.h[i][j] = c;
                self.h[j][i] = c;
            }
            self.scale = self.scale.max(coeffs[j].abs());
            self.beta = norm(&self.w);
            let k = self.len();

            let full = k >= kmax;
            let interval = check_every.max(k / 5);
            if full || (k >= want && k - last_check >= interval) {
                last_check = k;
                if full || self.converged(want, tol)? {
                    return Ok(());
                }
            }

            let breakdown =
                self.beta <= T::of(1e-12).max(T::epsilon()) * self.scale.max(T::one());
            let next = if breakdown {
                // invariant subspace; continue in a fresh direction with zero coupling
                self.beta = T::zero();
                let mut all: Vec<Vec<T>> = self.locked.to_vec();
                all.extend(self.basis.iter().cloned());
                random_unit(rng, self.n, &all)
            } else {
                let b = self.beta;
                self.w.iter().map(|&v| v / b).collect()
            };
            for row in self.h.iter_mut() {
                row.push(T::zero());
            }
            self.h.push(vec![T::zero(); k + 1]);
            self.h[k][j] = self.beta;
            self.h[j][k] = self.beta;
            self.basis.push(next);
        }
    }

    fn projected(&self) -> Vec<T> {
        let k = self.len();
        let mut flat = Vec::with_capacity(k * k);
        for row in &self.h[..k] {
            flat.extend_from_slice(&row[..k]);
        }
        flat
    }

    fn converged(&self, want: usize, tol: T) -> Result<bool> {
        let k = self.len();
        let dec = symmetric_eigen(k, self.projected())?;
        Ok((0..want.min(k)).all(|i| (self.beta * dec.vectors[i][k - 1]).abs() <= tol * T::of(0.1)))
    }

    /// The `keep` smallest Ritz pairs, the residual norm, the normalised
    /// residual direction and each kept pair's coupling to it.
    #[allow(clippy::type_complexity)]
    fn finish(self, keep: usize) -> Result<(Vec<Ritz<T>>, T, Option<Vec<T>>, Vec<T>)> {
        let k = self.len();
        let dec = symmetric_eigen(k, self.projected())?;
        let mut ritz = Vec::with_capacity(keep);
        let mut coupling = Vec::with_capacity(keep);
        for i in 0..keep {
            let s = &dec.vectors[i];
            let mut v = vec![T::zero(); self.n];
            for (q, &c) in self.basis.iter().zip(s) {
                for (vi, &qi) in v.iter_mut().zip(q) {
                    *vi += c * qi;
                }
            }
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            ritz.push(Ritz {
                value: dec.values[i],
                vector: v,
            });
            coupling.push(self.beta * s[k - 1]);
        }
        let dir = if self.beta > T::zero() {
            let b = self.beta;
            Some(self.w.iter().map(|&x| x / b).collect())
        } else {
            None
        };
        Ok((ritz, self.beta, dir, coupling))
    }
}

/// Two passes of classical Gram-Schmidt against `locked` then `basis`;
/// the accumulated `basis` coefficients go to `coeffs`.
fn orthogonalize<T: Scalar>(w: &mut [T], locked: &[Vec<T>], basis: &[Vec<T>], mut coeffs: Option<&mut [T]>) {
    for _ in 0..2 {
        for q in locked {
            let c = dot(q, w);
            axpy(w, -c, q);
        }
        for (i, q) in basis.iter().enumerate() {
            let c = dot(q, w);
            axpy(w, -c, q);
            if let Some(cs) = coeffs.as_deref_mut() {
                cs[i] += c;
            }
        }
    }
}

fn axpy<T: Scalar>(w: &mut [T], a: T, q: &[T]) {
    for (wi, &qi) in w.iter_mut().zip(q) {
        *wi += a * qi;
    }
}

fn residual<T: Scalar, A: SymmetricOperator<T> + ?Sized>(op: &A, val: T, v: &[T]) -> T {
    let mut av = vec![T::zero(); v.len()];
    op.apply(v, &mut av);
    let mut acc = T::zero();
    for (&a, &x) in av.iter().zip(v) {
        let d = a - val * x;
        acc += d * d;
    }
    acc.sqrt()
}

fn random_unit<T: Scalar>(rng: &mut ChaCha8Rng, n: usize, against: &[Vec<T>]) -> Vec<T> {
    loop {
        let mut v: Vec<T> = (0..n).map(|_| T::of(rng.gen_range(-1.0..1.0))).collect();
        orthogonalize(&mut v, against, &[], None);
        let nv = norm(&v);
        if nv > T::of(1e-3) {
            v.iter_mut().for_each(|x| *x /= nv);
            return v;
        }
    }
}
