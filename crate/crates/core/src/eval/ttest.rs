//! Two-sided paired Student t-test for accuracy series.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Result of a paired t-test. `degenerate` flags the all-differences-equal,
/// nonzero case where the statistic blows up and p = 0 by convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub degenerate: bool,
}

/// Two-sided paired t-test over per-unit accuracies: t = mean(d) /
/// (sd(d)/sqrt(N)) with d = a - b and df = N - 1. All-zero differences give
/// p = 1; zero spread with nonzero mean gives p = 0 with the degenerate flag.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 paired observations, got {n}"
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::Validation("non-finite difference".into()));
    }
    let df = n - 1;
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let ss: f64 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum();
    let sd = (ss / df as f64).sqrt();

    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(TTest {
            t: 0.0,
            df,
            p: 1.0,
            degenerate: false,
        });
    }
    if sd == 0.0 {
        return Ok(TTest {
            t: if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
            df,
            p: 0.0,
            degenerate: true,
        });
    }
    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, df as f64)
        .map_err(|e| Error::Validation(format!("t-distribution: {e}")))?;
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(TTest {
        t,
        df,
        p,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identical_series_give_p_one() {
        let a = [95.0, 96.0, 97.0];
        let t = paired_ttest(&a, &a).unwrap();
        assert_eq!(t.p, 1.0);
        assert!(!t.degenerate);
    }

    #[test]
    fn constant_nonzero_difference_is_degenerate() {
        let a = [2.0, 3.0, 4.0, 5.0];
        let b = [1.0, 2.0, 3.0, 4.0];
        let t = paired_ttest(&a, &b).unwrap();
        assert_eq!(t.p, 0.0);
        assert!(t.degenerate);
    }

    #[test]
    fn hand_computed_case() {
        // d = [2,-1,3,0,1]: mean 1, sd 1.5811, t = 1.4142, df = 4.
        let a = [2.0, -1.0, 3.0, 0.0, 1.0];
        let b = [0.0; 5];
        let t = paired_ttest(&a, &b).unwrap();
        assert_relative_eq!(t.t, 1.41421356, max_relative = 1e-6);
        assert_eq!(t.df, 4);
        assert!((t.p - 0.2302).abs() < 1e-3, "p = {}", t.p);
    }

    #[test]
    fn p_symmetric_under_swap() {
        let a = [1.0, 4.0, 2.0, 5.0];
        let b = [2.0, 2.0, 3.0, 3.0];
        let ab = paired_ttest(&a, &b).unwrap();
        let ba = paired_ttest(&b, &a).unwrap();
        assert_relative_eq!(ab.p, ba.p, max_relative = 1e-12);
        assert_relative_eq!(ab.t, -ba.t, max_relative = 1e-12);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(paired_ttest(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn p_value_matches_incomplete_beta_oracle() {
        // Continued-fraction incomplete beta: an independent route to the
        // Student-t tail, checked at several statistics.
        fn betacf(a: f64, b: f64, x: f64) -> f64 {
            let mut c = 1.0;
            let mut d = 1.0 - (a + b) * x / (a + 1.0);
            if d.abs() < 1e-300 {
                d = 1e-300;
            }
            d = 1.0 / d;
            let mut h = d;
            for m in 1..200 {
                let m = m as f64;
                let m2 = 2.0 * m;
                let aa = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
                d = 1.0 + aa * d;
                if d.abs() < 1e-300 {
                    d = 1e-300;
                }
                c = 1.0 + aa / c;
                if c.abs() < 1e-300 {
                    c = 1e-300;
                }
                d = 1.0 / d;
                h *= d * c;
                let aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
                d = 1.0 + aa * d;
                if d.abs() < 1e-300 {
                    d = 1e-300;
                }
                c = 1.0 + aa / c;
                if c.abs() < 1e-300 {
                    c = 1e-300;
                }
                d = 1.0 / d;
                let del = d * c;
                h *= del;
                if (del - 1.0).abs() < 1e-12 {
                    break;
                }
            }
            h
        }
        fn ln_gamma(x: f64) -> f64 {
            // Lanczos approximation
            let g = [
                76.180_091_729_471_46,
                -86.505_320_329_416_77,
                24.014_098_240_830_91,
                -1.231_739_572_450_155,
                0.120_865_097_386_617_7e-2,
                -0.539_523_938_495_3e-5,
            ];
            let mut y = x;
            let tmp = x + 5.5;
            let tmp = tmp - (x + 0.5) * tmp.ln();
            let mut ser = 1.000_000_000_190_015;
            for gj in g {
                y += 1.0;
                ser += gj / y;
            }
            -tmp + (2.506_628_274_631_000_5 * ser / x).ln()
        }
        fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
            if x <= 0.0 {
                return 0.0;
            }
            if x >= 1.0 {
                return 1.0;
            }
            let ln_front =
                ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
            let front = ln_front.exp();
            if x < (a + 1.0) / (a + b + 2.0) {
                front * betacf(a, b, x) / a
            } else {
                1.0 - front * betacf(b, a, 1.0 - x) / b
            }
        }
        fn two_sided_p(t: f64, df: f64) -> f64 {
            inc_beta(df / 2.0, 0.5, df / (df + t * t))
        }
        for (t, df) in [(1.41421356f64, 4usize), (2.5, 9), (0.3, 7), (3.2, 19)] {
            let a: Vec<f64> = vec![0.0; df + 1];
            let _ = a;
            let dist = StudentsT::new(0.0, 1.0, df as f64).unwrap();
            let p_impl = 2.0 * (1.0 - dist.cdf(t));
            let p_oracle = two_sided_p(t, df as f64);
            assert!(
                (p_impl - p_oracle).abs() < 1e-8,
                "t={t} df={df}: {p_impl} vs {p_oracle}"
            );
        }
    }
}
