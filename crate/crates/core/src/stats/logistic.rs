use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_finite, mean, variance, StatsError};

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-8;
const RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    /// Intercept first, then one weight per covariate.
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub separated: bool,
    pub ridge: bool,
    pub log_likelihood: f64,
}

impl LogisticFit {
    pub fn predict(&self, covariates: &[f64]) -> f64 {
        let z = self.weights[0] + self.weights[1..].iter().zip(covariates).map(|(w, x)| w * x).sum::<f64>();
        sigmoid(z)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn dot(w: &[f64], row: &[f64]) -> f64 {
    w.iter().zip(row).map(|(a, b)| a * b).sum()
}

/// Prepends a constant 1 column.
pub fn with_intercept(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter().map(|row| std::iter::once(1.0).chain(row.iter().copied()).collect()).collect()
}

/// Bernoulli log-likelihood of weights `w` over a design matrix.
pub fn log_likelihood(w: &[f64], design: &[Vec<f64>], y: &[f64]) -> f64 {
    design
        .iter()
        .zip(y)
        .map(|(row, yi)| {
            let z = dot(w, row);
            yi * z - softplus(z)
        })
        .sum()
}

/// Gradient of [`log_likelihood`] with respect to `w`.
pub fn gradient(w: &[f64], design: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; w.len()];
    for (row, yi) in design.iter().zip(y) {
        let r = yi - sigmoid(dot(w, row));
        for (gj, xj) in g.iter_mut().zip(row) {
            *gj += r * xj;
        }
    }
    g
}

/// Z-scores each column (sample standard deviation).
pub fn standardize(x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, StatsError> {
    if x.len() < 2 {
        return Err(StatsError::TooFew { need: 2, got: x.len() });
    }
    let p = x[0].len();
    let mut out = x.to_vec();
    for j in 0..p {
        let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
        check_finite(&col)?;
        let (m, sd) = (mean(&col), variance(&col).sqrt());
        if sd == 0.0 {
            return Err(StatsError::ConstantCovariate(j));
        }
        for row in out.iter_mut() {
            row[j] = (row[j] - m) / sd;
        }
    }
    Ok(out)
}

/// Maximum-likelihood logistic regression by iteratively reweighted least
/// squares. `x` holds covariates only; the intercept is added here.
pub fn fit_logistic(x: &[Vec<f64>], y: &[f64]) -> Result<LogisticFit, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(StatsError::TooFew { need: 1, got: 0 });
    }
    let p = x[0].len() + 1;
    if x.iter().any(|r| r.len() + 1 != p) {
        return Err(StatsError::LengthMismatch(p - 1, x.iter().map(Vec::len).find(|l| l + 1 != p).unwrap_or(0)));
    }
    for row in x {
        check_finite(row)?;
    }
    check_finite(y)?;
    let design = with_intercept(x);
    let n = design.len();
    let xm = DMatrix::from_fn(n, p, |i, j| design[i][j]);
    let yv = DVector::from_column_slice(y);

    let mut w = DVector::zeros(p);
    let mut ridge = false;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        let z = &xm * &w;
        let mu = z.map(sigmoid);
        let wt = mu.map(|m| m * (1.0 - m));
        let grad = xm.transpose() * (&yv - &mu);
        let mut h = DMatrix::from_fn(p, p, |a, b| (0..n).map(|i| xm[(i, a)] * wt[i] * xm[(i, b)]).sum());
        if ridge {
            h += DMatrix::identity(p, p) * RIDGE;
        }
        let step = match h.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None if !ridge => {
                ridge = true;
                h += DMatrix::identity(p, p) * RIDGE;
                match h.cholesky() {
                    Some(c) => c.solve(&grad),
                    None => return Err(StatsError::NonFinite),
                }
            }
            None => return Err(StatsError::NonFinite),
        };
        if step.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        w += &step;
        if step.amax() < TOL {
            converged = true;
            break;
        }
    }
    let weights: Vec<f64> = w.iter().copied().collect();
    let fitted: Vec<f64> = design.iter().map(|r| sigmoid(dot(&weights, r))).collect();
    let separated = fitted.iter().zip(y).all(|(m, yi)| (m - yi).abs() < 1e-6);
    Ok(LogisticFit {
        log_likelihood: log_likelihood(&weights, &design, y),
        weights,
        iterations,
        converged: converged && !separated,
        separated,
        ridge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn balanced_null_model() {
        let x: Vec<Vec<f64>> = vec![vec![], vec![]];
        let fit = fit_logistic(&x, &[1.0, 0.0]).unwrap();
        assert!(fit.weights[0].abs() < 1e-12);
        assert!((fit.predict(&[]) - 0.5).abs() < 1e-12);
        assert!(fit.converged && !fit.separated && !fit.ridge);
    }

    #[test]
    fn uninformative_covariate_gets_zero_weight() {
        let x = vec![vec![1.0], vec![2.0], vec![1.0], vec![2.0]];
        let fit = fit_logistic(&x, &[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(fit.weights[1].abs() < 1e-9);
        assert!(fit.converged);
    }

    #[test]
    fn matches_known_mle() {
        // One-covariate MLE check: the score equations sum(y - p) = 0 and
        // sum(x (y - p)) = 0 must hold at the fit.
        let x: Vec<Vec<f64>> = [0.5, 1.2, -0.3, 2.0, -1.1, 0.0, 0.9, -0.6].iter().map(|v| vec![*v]).collect();
        let y = [1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let fit = fit_logistic(&x, &y).unwrap();
        let g = gradient(&fit.weights, &with_intercept(&x), &y);
        assert!(g.iter().all(|v| v.abs() < 1e-9), "{g:?}");
        assert!(fit.weights[1] > 0.0);
    }

    #[test]
    fn separation_is_flagged() {
        let x = vec![vec![-1.0], vec![-1.0], vec![1.0], vec![1.0]];
        let y = [0.0, 0.0, 1.0, 1.0];
        let fit = fit_logistic(&x, &y).unwrap();
        assert!(fit.separated);
        assert!(!fit.converged);
        assert!(fit.predict(&[-1.0]) < fit.predict(&[0.0]) && fit.predict(&[0.0]) < fit.predict(&[1.0]));

        // Grid-search oracle: the best slope on a coarse grid is the largest positive one.
        let design = with_intercept(&x);
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in -20..=20 {
            for j in -20..=20 {
                let w = [i as f64 * 0.5, j as f64 * 0.5];
                let ll = log_likelihood(&w, &design, &y);
                if ll > best.0 {
                    best = (ll, w[1]);
                }
            }
        }
        assert!(best.1 > 0.0);
        assert_eq!(fit.weights[1].signum(), best.1.signum());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let design: Vec<Vec<f64>> = (0..12).map(|_| vec![1.0, rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
        let y: Vec<f64> = (0..12).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 }).collect();
        let h = 1e-5;
        for _ in 0..10 {
            let w: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let g = gradient(&w, &design, &y);
            for j in 0..3 {
                let (mut up, mut down) = (w.clone(), w.clone());
                up[j] += h;
                down[j] -= h;
                let fd = (log_likelihood(&up, &design, &y) - log_likelihood(&down, &design, &y)) / (2.0 * h);
                let rel = (g[j] - fd).abs() / g[j].abs().max(1e-3);
                assert!(rel <= 1e-6, "component {j}: {} vs {fd}", g[j]);
            }
        }
    }

    #[test]
    fn standardize_columns() {
        let z = standardize(&[vec![1.0, 10.0], vec![2.0, 20.0], vec![3.0, 30.0]]).unwrap();
        assert_eq!(z.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(standardize(&[vec![1.0, 5.0], vec![2.0, 5.0]]), Err(StatsError::ConstantCovariate(1)));
    }

    #[test]
    fn collinear_design_falls_back_to_ridge() {
        let x = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0], vec![4.0, 4.0]];
        let fit = fit_logistic(&x, &[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(fit.ridge);
        assert!(fit.weights.iter().all(|w| w.is_finite()));
    }
}
