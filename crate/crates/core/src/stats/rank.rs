use super::ttest::student_t_cdf;
use super::{check_finite, StatsError, TestResult};

/// 1-based ranks with ties given their average rank.
pub fn mid_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

fn validate(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew { need: 3, got: x.len() });
    }
    check_finite(x)?;
    check_finite(y)?;
    if x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]) {
        return Err(StatsError::Constant);
    }
    Ok(())
}

/// Spearman's rho with a two-sided p-value from the t approximation
/// `t = rho * sqrt((n - 2) / (1 - rho^2))`, `n - 2` degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    validate(x, y)?;
    let rho = pearson(&mid_ranks(x), &mid_ranks(y));
    let df = (x.len() - 2) as f64;
    if (1.0 - rho.abs()) < 1e-15 {
        return Ok(TestResult::new(rho, 0.0, df));
    }
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    Ok(TestResult::new(rho, 2.0 * student_t_cdf(-t.abs(), df), df))
}

/// Exact two-sided permutation p-value for Spearman's rho, `n <= 10`.
pub fn spearman_exact_p(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    validate(x, y)?;
    if x.len() > 10 {
        return Err(StatsError::TooMany { max: 10, got: x.len() });
    }
    let rx = mid_ranks(x);
    let ry = mid_ranks(y);
    let observed = pearson(&rx, &ry).abs();
    let mut perm = ry.clone();
    let (mut hits, mut total) = (0u64, 0u64);
    // Heap's algorithm over all orderings of the y ranks.
    let n = perm.len();
    let mut c = vec![0usize; n];
    let mut visit = |p: &[f64]| {
        total += 1;
        if pearson(&rx, p).abs() >= observed - 1e-12 {
            hits += 1;
        }
    };
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}
