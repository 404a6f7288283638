//! Statistics used by the audits: rank correlation, t-tests, Cohen's kappa,
//! logistic regression, propensity matching and the top/bottom comparison.

mod kappa;
mod logistic;
mod matching;
mod rank;
mod search;
mod ttest;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kappa::cohen_kappa;
pub use logistic::{fit_logistic, gradient, log_likelihood, standardize, with_intercept, LogisticFit};
pub use matching::{propensity_match, top_bottom_test, MatchedPair, Unit};
pub use rank::{mid_ranks, spearman, spearman_exact_p};
pub use search::{read_search_counts, SearchCounts};
pub use ttest::{student_t_cdf, t_independent, t_paired};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {need} observations, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("at most {max} observations supported, got {got}")]
    TooMany { max: usize, got: usize },
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("constant input: rank correlation is undefined")]
    Constant,
    #[error("degenerate groups: zero variance with a nonzero mean difference")]
    DegenerateGroups,
    #[error("degenerate marginals: chance agreement is 1")]
    DegenerateMarginals,
    #[error("covariate column {0} is constant")]
    ConstantCovariate(usize),
    #[error("fewer controls ({controls}) than treated units ({treated})")]
    NotEnoughControls { treated: usize, controls: usize },
    #[error("non-finite value in input")]
    NonFinite,
    #[error("search-count table: {0}")]
    SearchTable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub df: f64,
    pub significant_at_5pct: bool,
}

impl TestResult {
    pub(crate) fn new(statistic: f64, p_value: f64, df: f64) -> TestResult {
        let p_value = p_value.clamp(0.0, 1.0);
        TestResult { statistic, p_value, df, significant_at_5pct: p_value < 0.05 }
    }
}

pub(crate) fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n - 1 denominator).
pub(crate) fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}
