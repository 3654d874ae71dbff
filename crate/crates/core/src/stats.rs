//! Pearson correlation and its Student-t significance.
//!
//! The t tail comes from the regularized incomplete beta function,
//! `P(|T| > t) = I_{ν/(ν+t²)}(ν/2, 1/2)`, evaluated with a continued fraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
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

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - front * beta_cf(1.0 - x, b, a) / b
    }
}

/// Two-sided tail probability `P(|T| ≥ |t|)` of Student's t with `df` degrees
/// of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    reg_inc_beta(df / (df + t * t), df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Pearson correlation; errors on fewer than 2 points or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("predictions"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("ratings"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p value of a sample correlation `r` over `n` points.
pub fn p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    student_t_two_sided(r * (df / denom).sqrt(), df)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrStats {
    pub r: f64,
    pub n: usize,
    pub p: f64,
}

/// Pearson r of `pred` against `truth` with its t-test p value.
pub fn correlation_stats(pred: &[f64], truth: &[f64]) -> Result<CorrStats> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    let n = pred.len();
    if n < 3 {
        return Err(Error::TooFewPoints(n));
    }
    let r = pearson(pred, truth)?;
    Ok(CorrStats { r, n, p: p_value(r, n) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn ln_gamma_values() {
        assert_relative_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_relative_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-14);
        assert_relative_eq!(ln_gamma(10.0), 362_880f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(ln_gamma(0.1), 2.252_712_651_734_206, epsilon = 1e-12);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x and I_x(a, 1) = x^a
        for &x in &[0.1, 0.37, 0.5, 0.9] {
            assert_relative_eq!(reg_inc_beta(x, 1.0, 1.0), x, epsilon = 1e-13);
            assert_relative_eq!(reg_inc_beta(x, 3.0, 1.0), x.powi(3), epsilon = 1e-13);
        }
        assert_eq!(reg_inc_beta(0.0, 2.0, 3.0), 0.0);
        assert_eq!(reg_inc_beta(1.0, 2.0, 3.0), 1.0);
    }

    #[test]
    fn hand_example_df2() {
        let s = correlation_stats(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 4.0, 3.0]).unwrap();
        assert_eq!(s.r, 0.8);
        assert_eq!(s.n, 4);
        // df = 2: p = 1 - t / sqrt(t² + 2) = 0.2
        assert!((s.p - 0.2).abs() < 1e-12, "{}", s.p);
    }

    #[test]
    fn perfect_correlation() {
        let s = correlation_stats(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.r, 1.0);
        assert_eq!(s.p, 0.0);
    }

    #[test]
    fn df100_example() {
        let p = p_value(0.2, 102);
        assert!((p - 0.044).abs() <= 0.002, "{p}");
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            correlation_stats(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::ZeroVariance(_))
        ));
        assert!(matches!(
            correlation_stats(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::TooFewPoints(2))
        ));
        assert!(correlation_stats(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn r_affine_invariance(
            xs in proptest::collection::vec(-100.0f64..100.0, 5..40),
            seed in any::<u64>(),
            scale in 0.1f64..50.0,
            shift in -100.0f64..100.0,
        ) {
            let mut rng = crate::rng::SplitMix64::new(seed);
            let ys: Vec<f64> = xs.iter().map(|x| x * 0.3 + rng.normal() * 20.0).collect();
            let Ok(r) = pearson(&xs, &ys) else { return Ok(()) };
            let xs2: Vec<f64> = xs.iter().map(|x| x * scale + shift).collect();
            let r2 = pearson(&xs2, &ys).unwrap();
            prop_assert!((r - r2).abs() < 1e-9);
            let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
            prop_assert!((pearson(&neg, &ys).unwrap() + r).abs() < 1e-12);
        }

        #[test]
        fn p_monotone_in_r_and_n(r1 in 0.01f64..0.9, dr in 0.005f64..0.5, n in 3usize..200) {
            // kept away from the range where p underflows to 0
            let r2 = (r1 + dr).min(0.95);
            prop_assume!(r2 > r1);
            prop_assert!(p_value(r2, n) < p_value(r1, n));
            prop_assert!(p_value(-r2, n) < p_value(-r1, n));
            prop_assert!(p_value(r1, n + 1) < p_value(r1, n));
            let p = p_value(r1, n);
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
