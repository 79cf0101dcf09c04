//! Affine alignment of a predicted boundary patch onto a ground-truth patch
//! by inverse-compositional Gauss-Newton.
//!
//! Coordinates are normalised to `[-1, 1]` on both axes, so the recovered
//! 2 x 3 matrix is independent of patch resolution. The warp parameters are
//! `W(x; p) = [[1 + p0, p2, p4], [p1, 1 + p3, p5]] · (x, y, 1)`.

use super::BoundaryMap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// 2 x 3 affine matrix, linear part then translation column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineEstimate<T> {
    pub theta: [[T; 3]; 2],
}

impl<T: Scalar> AffineEstimate<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            theta: [[o, z, z], [z, o, z]],
        }
    }

    /// Frobenius distance to the identity over the six entries.
    pub fn deviation(&self) -> T {
        let id = Self::identity().theta;
        let mut acc = T::zero();
        for r in 0..2 {
            for c in 0..3 {
                let d = self.theta[r][c] - id[r][c];
                acc += d * d;
            }
        }
        acc.sqrt()
    }

    /// Translation column in normalised units.
    pub fn translation(&self) -> (T, T) {
        (self.theta[0][2], self.theta[1][2])
    }

    fn to_h(self) -> [[T; 3]; 3] {
        let t = self.theta;
        [t[0], t[1], [T::zero(), T::zero(), T::one()]]
    }

    fn from_h(m: [[T; 3]; 3]) -> Self {
        Self {
            theta: [m[0], m[1]],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineOptions {
    pub max_iters: usize,
    pub step_tol: f64,
    /// Below this total edge mass a patch counts as empty and yields the
    /// identity.
    pub min_mass: f64,
    /// Gaussian blur widths (pixels) of the translation-only coarse passes
    /// that initialise the final full-affine pass on the raw maps, coarsest
    /// first.
    pub coarse_sigmas: Vec<f64>,
}

impl Default for AffineOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            step_tol: 1e-8,
            min_mass: 1e-6,
            coarse_sigmas: vec![4.0, 2.0, 1.0],
        }
    }
}

pub fn estimate_affine<T: Scalar>(
    pred: &BoundaryMap<T>,
    gt: &BoundaryMap<T>,
) -> Result<AffineEstimate<T>> {
    estimate_affine_with(pred, gt, &AffineOptions::default())
}

pub fn estimate_affine_with<T: Scalar>(
    pred: &BoundaryMap<T>,
    gt: &BoundaryMap<T>,
    opts: &AffineOptions,
) -> Result<AffineEstimate<T>> {
    if !pred.same_shape(gt) {
        return Err(Error::ShapeMismatch(format!(
            "patches {}x{} vs {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    if pred.values().iter().chain(gt.values()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("affine estimation input"));
    }
    let min_mass = T::of(opts.min_mass);
    if pred.height() < 2 || pred.width() < 2 || pred.mass() < min_mass || gt.mass() < min_mass {
        return Ok(AffineEstimate::identity());
    }

    let mut theta = AffineEstimate::identity();
    for &sigma in &opts.coarse_sigmas {
        if sigma > 0.0 {
            let p = gaussian_blur(pred, sigma);
            let g = gaussian_blur(gt, sigma);
            theta = gauss_newton(&p, &g, theta, opts, TRANSLATION);
        }
    }
    if let Some(&sigma) = opts.coarse_sigmas.last().filter(|&&s| s > 0.0) {
        let p = gaussian_blur(pred, sigma);
        let g = gaussian_blur(gt, sigma);
        theta = gauss_newton(&p, &g, theta, opts, FULL);
    }
    Ok(gauss_newton(pred, gt, theta, opts, FULL))
}

/// Step-halving attempts before an iteration gives up.
const MAX_HALVINGS: usize = 20;

/// Admissible area change of a warp.
const DET_RANGE: (f64, f64) = (0.25, 4.0);

/// Collapsing, mirroring or off-patch warps can lower the SSD on sparse
/// edge maps by sampling empty space, which says nothing about shape; steps
/// into them are rejected. The centre must stay inside the patch.
fn admissible<T: Scalar>(m: &[[T; 3]; 3]) -> bool {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    det >= T::of(DET_RANGE.0)
        && det <= T::of(DET_RANGE.1)
        && m[0][2].abs() <= T::one()
        && m[1][2].abs() <= T::one()
}

/// Warp parameters a pass may move, in `p0..p5` order.
type Free = [bool; 6];
const FULL: Free = [true; 6];
const TRANSLATION: Free = [false, false, false, false, true, true];

fn gauss_newton<T: Scalar>(
    pred: &BoundaryMap<T>,
    gt: &BoundaryMap<T>,
    init: AffineEstimate<T>,
    opts: &AffineOptions,
    free: Free,
) -> AffineEstimate<T> {
    let (h, w) = (gt.height(), gt.width());
    let one = T::one();
    let sx = T::from_count(w - 1) / T::of(2.0);
    let sy = T::from_count(h - 1) / T::of(2.0);
    let xs: Vec<T> = (0..w).map(|c| T::from_count(c) / sx - one).collect();
    let ys: Vec<T> = (0..h).map(|r| T::from_count(r) / sy - one).collect();

    // steepest-descent images of the template (ground truth) at the identity
    let (gx, gy) = gradients(gt);
    let mut sd = Vec::with_capacity(h * w);
    let mut hess = [[T::zero(); 6]; 6];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let (dx, dy) = (gx[i] * sx, gy[i] * sy);
            let (x, y) = (xs[c], ys[r]);
            let row = [dx * x, dy * x, dx * y, dy * y, dx, dy];
            for a in 0..6 {
                for b in 0..6 {
                    hess[a][b] += row[a] * row[b];
                }
            }
            sd.push(row);
        }
    }

    // near-singular directions (an edge sliding along itself) carry no
    // signal; a relative floor keeps their steps at zero instead of noise
    let trace: T = (0..6).map(|a| hess[a][a]).sum();
    let floor = trace * T::of(1e-9);
    for (a, row) in hess.iter_mut().enumerate() {
        row[a] += floor;
    }
    // frozen parameters: decoupled unit rows with a zero right-hand side
    for a in (0..6).filter(|&a| !free[a]) {
        for b in 0..6 {
            hess[a][b] = T::zero();
            hess[b][a] = T::zero();
        }
        hess[a][a] = T::one();
    }
    let freeze = |rhs: &mut [T; 6]| {
        for a in (0..6).filter(|&a| !free[a]) {
            rhs[a] = T::zero();
        }
    };

    let residual = |m: &[[T; 3]; 3], rhs: Option<&mut [T; 6]>| -> T {
        let mut ssd = T::zero();
        let mut acc = [T::zero(); 6];
        for r in 0..h {
            for c in 0..w {
                let (x, y) = (xs[c], ys[r]);
                let wx = m[0][0] * x + m[0][1] * y + m[0][2];
                let wy = m[1][0] * x + m[1][1] * y + m[1][2];
                let i = r * w + c;
                let err = bilinear(pred, (wx + one) * sx, (wy + one) * sy) - gt.values()[i];
                if err != T::zero() {
                    ssd += err * err;
                    for (a, &s) in acc.iter_mut().zip(&sd[i]) {
                        *a += s * err;
                    }
                }
            }
        }
        if let Some(out) = rhs {
            *out = acc;
        }
        ssd
    };

    let mut m = init.to_h();
    let mut rhs = [T::zero(); 6];
    let mut ssd = residual(&m, Some(&mut rhs));
    freeze(&mut rhs);
    let tol = T::of(opts.step_tol);
    let half = T::of(0.5);
    'outer: for _ in 0..opts.max_iters {
        if ssd == T::zero() {
            break;
        }
        let Some(mut dp) = solve6(hess, rhs) else {
            break;
        };
        // halve the Gauss-Newton step until the SSD does not increase
        for _ in 0..MAX_HALVINGS {
            let step = [
                [one + dp[0], dp[2], dp[4]],
                [dp[1], one + dp[3], dp[5]],
                [T::zero(), T::zero(), one],
            ];
            let step_norm = dp.iter().map(|&d| d * d).sum::<T>().sqrt();
            if step_norm < tol {
                break 'outer;
            }
            if let Some(cand) = invert_affine(step).map(|inv| matmul(m, inv)).filter(admissible) {
                let mut cand_rhs = [T::zero(); 6];
                let cand_ssd = residual(&cand, Some(&mut cand_rhs));
                if cand_ssd <= ssd {
                    m = cand;
                    ssd = cand_ssd;
                    rhs = cand_rhs;
                    freeze(&mut rhs);
                    continue 'outer;
                }
            }
            dp.iter_mut().for_each(|d| *d *= half);
        }
        break;
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return init;
    }
    AffineEstimate::from_h(m)
}

/// Central differences in pixel units, one-sided at the borders.
fn gradients<T: Scalar>(map: &BoundaryMap<T>) -> (Vec<T>, Vec<T>) {
    let (h, w) = (map.height(), map.width());
    let half = T::of(0.5);
    let mut gx = vec![T::zero(); h * w];
    let mut gy = vec![T::zero(); h * w];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            gx[i] = if c == 0 {
                map.get(r, 1) - map.get(r, 0)
            } else if c == w - 1 {
                map.get(r, c) - map.get(r, c - 1)
            } else {
                (map.get(r, c + 1) - map.get(r, c - 1)) * half
            };
            gy[i] = if r == 0 {
                map.get(1, c) - map.get(0, c)
            } else if r == h - 1 {
                map.get(r, c) - map.get(r - 1, c)
            } else {
                (map.get(r + 1, c) - map.get(r - 1, c)) * half
            };
        }
    }
    (gx, gy)
}

/// Bilinear sample at pixel coordinates; lattice points outside the patch
/// contribute zero.
fn bilinear<T: Scalar>(map: &BoundaryMap<T>, cx: T, cy: T) -> T {
    let (h, w) = (map.height() as isize, map.width() as isize);
    let x0 = cx.floor();
    let y0 = cy.floor();
    let (fx, fy) = (cx - x0, cy - y0);
    let (Some(xi), Some(yi)) = (x0.to_isize(), y0.to_isize()) else {
        return T::zero();
    };
    if xi < -1 || yi < -1 || xi >= w || yi >= h {
        return T::zero();
    }
    let at = |r: isize, c: isize| -> T {
        if r < 0 || c < 0 || r >= h || c >= w {
            T::zero()
        } else {
            map.get(r as usize, c as usize)
        }
    };
    let one = T::one();
    at(yi, xi) * (one - fx) * (one - fy)
        + at(yi, xi + 1) * fx * (one - fy)
        + at(yi + 1, xi) * (one - fx) * fy
        + at(yi + 1, xi + 1) * fx * fy
}

/// Separable Gaussian blur with replicated borders.
fn gaussian_blur<T: Scalar>(map: &BoundaryMap<T>, sigma: f64) -> BoundaryMap<T> {
    let radius = (3.0 * sigma).ceil() as isize;
    let weights: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let kernel: Vec<T> = weights.iter().map(|&k| T::of(k / total)).collect();
    let (h, w) = (map.height() as isize, map.width() as isize);

    let mut tmp = vec![T::zero(); map.values().len()];
    for r in 0..h {
        for c in 0..w {
            let mut acc = T::zero();
            for (k, d) in kernel.iter().zip(-radius..=radius) {
                let cc = (c + d).clamp(0, w - 1);
                acc += *k * map.get(r as usize, cc as usize);
            }
            tmp[(r * w + c) as usize] = acc;
        }
    }
    let mut out = vec![T::zero(); tmp.len()];
    for r in 0..h {
        for c in 0..w {
            let mut acc = T::zero();
            for (k, d) in kernel.iter().zip(-radius..=radius) {
                let rr = (r + d).clamp(0, h - 1);
                acc += *k * tmp[(rr * w + c) as usize];
            }
            out[(r * w + c) as usize] = acc.min(T::one()).max(T::zero());
        }
    }
    BoundaryMap::from_raw(map.height(), map.width(), out)
}

/// Gaussian elimination with partial pivoting; `None` when near-singular.
fn solve6<T: Scalar>(mut a: [[T; 6]; 6], mut b: [T; 6]) -> Option<[T; 6]> {
    let trace: T = (0..6).map(|i| a[i][i].abs()).sum();
    if trace == T::zero() {
        return None;
    }
    let floor = trace * T::epsilon() * T::of(1e3);
    for col in 0..6 {
        let piv = (col..6).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() <= floor {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..6 {
            let f = a[row][col] / a[col][col];
            if f != T::zero() {
                for k in col..6 {
                    let v = a[col][k];
                    a[row][k] -= f * v;
                }
                let v = b[col];
                b[row] -= f * v;
            }
        }
    }
    let mut x = [T::zero(); 6];
    for row in (0..6).rev() {
        let mut s = b[row];
        for k in row + 1..6 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

fn invert_affine<T: Scalar>(m: [[T; 3]; 3]) -> Option<[[T; 3]; 3]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() <= T::epsilon() {
        return None;
    }
    let (a, b, c, d) = (m[1][1] / det, -m[0][1] / det, -m[1][0] / det, m[0][0] / det);
    let (tx, ty) = (m[0][2], m[1][2]);
    Some([
        [a, b, -(a * tx + b * ty)],
        [c, d, -(c * tx + d * ty)],
        [T::zero(), T::zero(), T::one()],
    ])
}

fn matmul<T: Scalar>(a: [[T; 3]; 3], b: [[T; 3]; 3]) -> [[T; 3]; 3] {
    let mut out = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(size: usize, cx: f64, cy: f64, sigma: f64) -> BoundaryMap<f64> {
        let mut v = Vec::with_capacity(size * size);
        for r in 0..size {
            for c in 0..size {
                let d2 = (c as f64 - cx).powi(2) + (r as f64 - cy).powi(2);
                v.push((-d2 / (2.0 * sigma * sigma)).exp());
            }
        }
        BoundaryMap::new(size, size, v).unwrap()
    }

    fn ssd_after_warp(pred: &BoundaryMap<f64>, gt: &BoundaryMap<f64>, t: &AffineEstimate<f64>) -> f64 {
        let (h, w) = (gt.height(), gt.width());
        let sx = (w - 1) as f64 / 2.0;
        let sy = (h - 1) as f64 / 2.0;
        let mut acc = 0.0;
        for r in 0..h {
            for c in 0..w {
                let x = c as f64 / sx - 1.0;
                let y = r as f64 / sy - 1.0;
                let m = t.theta;
                let wx = m[0][0] * x + m[0][1] * y + m[0][2];
                let wy = m[1][0] * x + m[1][1] * y + m[1][2];
                let d = bilinear(pred, (wx + 1.0) * sx, (wy + 1.0) * sy) - gt.get(r, c);
                acc += d * d;
            }
        }
        acc
    }

    #[test]
    fn identical_patches_give_identity() {
        let b = blob(20, 9.0, 11.0, 3.0);
        let t = estimate_affine(&b, &b).unwrap();
        assert!(t.deviation() <= 1e-12);
    }

    #[test]
    fn empty_patches_give_exact_identity() {
        let z = BoundaryMap::<f64>::zeros(16, 16);
        let b = blob(16, 8.0, 8.0, 2.0);
        assert_eq!(estimate_affine(&z, &b).unwrap(), AffineEstimate::identity());
        assert_eq!(estimate_affine(&b, &z).unwrap(), AffineEstimate::identity());
        assert_eq!(estimate_affine(&z, &z).unwrap(), AffineEstimate::identity());
    }

    #[test]
    fn recovers_two_pixel_translation() {
        let size = 32;
        let gt = blob(size, 15.0, 16.0, 4.0);
        let pred = blob(size, 17.0, 16.0, 4.0);
        let t = estimate_affine(&pred, &gt).unwrap();
        let px_per_unit = (size - 1) as f64 / 2.0;
        let (tx, ty) = t.translation();
        assert!((tx * px_per_unit - 2.0).abs() < 0.2, "tx = {}", tx * px_per_unit);
        assert!((ty * px_per_unit).abs() < 0.2, "ty = {}", ty * px_per_unit);
        let before = ssd_after_warp(&pred, &gt, &AffineEstimate::identity());
        let after = ssd_after_warp(&pred, &gt, &t);
        assert!(after < 0.01 * before, "{after} vs {before}");
    }

    #[test]
    fn rejects_mismatched_or_nan() {
        let a = BoundaryMap::<f64>::zeros(4, 4);
        let b = BoundaryMap::<f64>::zeros(4, 5);
        assert!(estimate_affine(&a, &b).is_err());
        let nan = BoundaryMap::from_raw(4, 4, vec![f64::NAN; 16]);
        assert!(matches!(estimate_affine(&nan, &a), Err(Error::NonFinite(_))));
    }

    #[test]
    fn solve6_matches_known_system() {
        let mut a = [[0.0; 6]; 6];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if i == j { 4.0 } else { 1.0 / (1.0 + (i + j) as f64) };
            }
        }
        let x = [1.0, -2.0, 0.5, 3.0, 0.0, -1.0];
        let mut b = [0.0; 6];
        for i in 0..6 {
            b[i] = (0..6).map(|j| a[i][j] * x[j]).sum();
        }
        let got = solve6(a, b).unwrap();
        for i in 0..6 {
            assert!((got[i] - x[i]).abs() < 1e-12);
        }
    }
}
