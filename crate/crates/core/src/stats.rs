//! Paired t-test with hand-rolled special functions.
//!
//! Two-sided p-values come from the Student-t CDF expressed through the
//! regularized incomplete beta function, evaluated by Lentz's continued
//! fraction to 1e-10.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum StatsError {
    #[error("paired test needs equal lengths, got {a} and {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("need at least 2 paired samples, got {n}")]
    SampleSize { n: usize },
    #[error("degenerate test: zero variance with nonzero mean difference")]
    DegenerateTest,
}

/// ln Γ(z) for z > 0, Lanczos approximation (Numerical Recipes g = 5).
pub fn ln_gamma(z: f64) -> f64 {
    let coeffs = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_9e-2,
        -0.539_523_938_495_3e-5,
    ];
    let mut sum = 1.000_000_000_190_015;
    for (i, &c) in coeffs.iter().enumerate() {
        sum += c / (z + i as f64 + 1.0);
    }
    let tmp = z + 5.5;
    (z + 0.5) * tmp.ln() - tmp + (2.506_628_274_631_000_5 * sum / z).ln()
}

/// Regularized incomplete beta I_x(a, b) via the symmetric continued
/// fraction (modified Lentz), converged to 1e-10.
pub fn regularized_inc_beta(x: f64, a: f64, b: f64) -> f64 {
    assert!((0.0..=1.0).contains(&x), "x must be in [0,1]");
    assert!(a > 0.0 && b > 0.0, "shape parameters must be positive");
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    // Use the symmetry relation where the continued fraction converges fast.
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - regularized_inc_beta(1.0 - x, b, a);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b));
    let front = ln_front.exp();

    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-10;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut f = d;
    for m in 1..400 {
        let m_f = m as f64;
        // even numerator
        let num = m_f * (b - m_f) * x / ((a + 2.0 * m_f - 1.0) * (a + 2.0 * m_f));
        d = 1.0 + num * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = 1.0 + num / c;
        if c.abs() < TINY {
            c = TINY;
        }
        f *= c * d;
        // odd numerator
        let num = -(a + m_f) * (a + b + m_f) * x / ((a + 2.0 * m_f) * (a + 2.0 * m_f + 1.0));
        d = 1.0 + num * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = 1.0 + num / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    front * f / a
}

/// Two-sided p-value for a t statistic with `df` degrees of freedom:
/// `p = I_{df/(df + t^2)}(df/2, 1/2)`.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    regularized_inc_beta(x, 0.5 * df, 0.5).clamp(0.0, 1.0)
}

/// Result of a paired t-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
    pub mean_diff: f64,
}

/// Paired two-sided t-test on aligned samples. An exactly-zero mean
/// difference short-circuits to `(t, p) = (0, 1)`; zero variance with a
/// nonzero mean is a degenerate-test error.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::SampleSize { n });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let df = n - 1;
    if mean == 0.0 {
        return Ok(TTest {
            t: 0.0,
            p: 1.0,
            df,
            mean_diff: 0.0,
        });
    }
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / df as f64;
    if var == 0.0 {
        return Err(StatsError::DegenerateTest);
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    Ok(TTest {
        t,
        p: t_two_sided_p(t, df as f64),
        df,
        mean_diff: mean,
    })
}
