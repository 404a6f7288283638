use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{check_finite, mean, variance, StatsError, TestResult};

/// Student-t cumulative distribution function.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom").cdf(t)
}

fn upper_tail(t: f64, df: f64) -> f64 {
    // Use the lower tail of -t so large t keeps full precision.
    student_t_cdf(-t, df)
}

fn from_parts(diff: f64, se2: f64, df: f64) -> Result<TestResult, StatsError> {
    if se2 == 0.0 {
        if diff == 0.0 {
            return Ok(TestResult::new(0.0, 0.5, df));
        }
        return Err(StatsError::DegenerateGroups);
    }
    let t = diff / se2.sqrt();
    Ok(TestResult::new(t, upper_tail(t, df), df))
}

/// Pooled-variance two-sample t-test of `mean(a) > mean(b)`, one-sided.
pub fn t_independent(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooFew { need: 2, got: s.len() });
        }
        check_finite(s)?;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / df;
    from_parts(mean(a) - mean(b), pooled * (1.0 / na + 1.0 / nb), df)
}

/// Paired t-test on `a - b`, one-sided (`a > b`).
pub fn t_paired(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::TooFew { need: 2, got: a.len() });
    }
    check_finite(a)?;
    check_finite(b)?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    from_parts(mean(&d), variance(&d) / n, n - 1.0)
}
