use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided p-value of `r` under Student's t with `n − 2` dof.
    pub p: f64,
    pub n: usize,
}

/// Pearson correlation with a two-sided t-test p-value.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    if xs.len() != ys.len() {
        return Err(Error::DegenerateInput("sequences differ in length"));
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::DegenerateInput("need at least three points"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input"));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("constant sequence"));
    }
    let mut r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    if 1.0 - r.abs() <= 4.0 * f64::EPSILON {
        r = r.signum();
        return Ok(Correlation { r, p: 0.0, n });
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    Ok(Correlation {
        r,
        p: student_t_two_sided(t, df),
        n,
    })
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `I_x(a, b)` by continued fraction, using the symmetry
/// `I_x(a, b) = 1 − I_{1−x}(b, a)` where it converges faster.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_at_integers() {
        let mut fact = 1.0f64;
        for n in 1..15 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12, "n = {n}");
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn beta_closed_forms() {
        // I_x(1, 1) = x and I_x(a, 1) = x^a
        assert!((regularized_incomplete_beta(1.0, 1.0, 0.3) - 0.3).abs() < 1e-14);
        assert!((regularized_incomplete_beta(3.0, 1.0, 0.6) - 0.216).abs() < 1e-14);
    }

    #[test]
    fn t_one_dof_is_cauchy() {
        // two-sided Cauchy tail: 1 − 2 atan(t)/π
        let t: f64 = 2.5;
        let p = 1.0 - 2.0 * t.atan() / std::f64::consts::PI;
        assert!((student_t_two_sided(t, 1.0) - p).abs() < 1e-13);
    }

    #[test]
    fn perfect_lines() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.37 - 1.0).collect();
        let up: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let down: Vec<f64> = xs.iter().map(|x| -3.0 * x + 4.0).collect();
        let c = pearson(&xs, &up).unwrap();
        assert_eq!((c.r, c.p), (1.0, 0.0));
        assert_eq!(pearson(&xs, &down).unwrap().r, -1.0);
    }

    #[test]
    fn constant_rejected() {
        assert!(pearson(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }
}
