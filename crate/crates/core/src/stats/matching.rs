use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{t_independent, StatsError, TestResult};

/// A novel with its propensity score and the covariates that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub id: String,
    pub score: f64,
    pub covariates: Vec<f64>,
}

impl Unit {
    pub fn new(id: impl Into<String>, score: f64) -> Unit {
        Unit { id: id.into(), score, covariates: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub treated: String,
    pub control: String,
    pub treated_score: f64,
    pub control_score: f64,
    pub treated_covariates: Vec<f64>,
    pub control_covariates: Vec<f64>,
}

impl MatchedPair {
    pub fn distance(&self) -> f64 {
        (self.treated_score - self.control_score).abs()
    }
}

/// Greedy nearest-neighbour matching without replacement. Treated units are
/// visited in descending score order; all ties break on id.
pub fn propensity_match(treated: &[Unit], controls: &[Unit]) -> Result<Vec<MatchedPair>, StatsError> {
    if controls.len() < treated.len() {
        return Err(StatsError::NotEnoughControls { treated: treated.len(), controls: controls.len() });
    }
    let scores: Vec<f64> = treated.iter().chain(controls).map(|u| u.score).collect();
    super::check_finite(&scores)?;
    let mut order: Vec<&Unit> = treated.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
    let mut used = BTreeSet::new();
    let mut pairs = Vec::with_capacity(treated.len());
    for t in order {
        let best = controls
            .iter()
            .enumerate()
            .filter(|(i, _)| !used.contains(i))
            .min_by(|(_, a), (_, b)| {
                (a.score - t.score).abs().total_cmp(&(b.score - t.score).abs()).then_with(|| a.id.cmp(&b.id))
            })
            .expect("enough controls");
        used.insert(best.0);
        let c = best.1;
        pairs.push(MatchedPair {
            treated: t.id.clone(),
            control: c.id.clone(),
            treated_score: t.score,
            control_score: c.score,
            treated_covariates: t.covariates.clone(),
            control_covariates: c.covariates.clone(),
        });
    }
    Ok(pairs)
}

/// Independent t-test of accuracy between the `k` highest- and `k`
/// lowest-scoring novels, testing top > bottom. Items are
/// `(novel id, memorization score, accuracy)`.
pub fn top_bottom_test(items: &[(String, f64, f64)], k: usize) -> Result<TestResult, StatsError> {
    if k == 0 || items.len() < 2 * k {
        return Err(StatsError::TooFew { need: 2 * k.max(1), got: items.len() });
    }
    let mut sorted: Vec<&(String, f64, f64)> = items.iter().collect();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let top: Vec<f64> = sorted[..k].iter().map(|x| x.2).collect();
    let bottom: Vec<f64> = sorted[sorted.len() - k..].iter().map(|x| x.2).collect();
    t_independent(&top, &bottom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_control_wins() {
        let pairs = propensity_match(&[Unit::new("t", 0.7)], &[Unit::new("a", 0.69), Unit::new("b", 0.2)]).unwrap();
        assert_eq!(pairs[0].control, "a");
    }

    #[test]
    fn no_reuse_on_tied_treated() {
        let treated = [Unit::new("t1", 0.5), Unit::new("t2", 0.5)];
        let controls = [Unit::new("c1", 0.5), Unit::new("c2", 0.9)];
        let pairs = propensity_match(&treated, &controls).unwrap();
        assert_eq!((pairs[0].treated.as_str(), pairs[0].control.as_str()), ("t1", "c1"));
        assert_eq!(pairs[0].distance(), 0.0);
        assert!((pairs[1].distance() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn too_few_controls() {
        assert_eq!(
            propensity_match(&[Unit::new("a", 0.1), Unit::new("b", 0.2)], &[Unit::new("c", 0.3)]),
            Err(StatsError::NotEnoughControls { treated: 2, controls: 1 })
        );
    }

    #[test]
    fn greedy_can_miss_the_global_optimum() {
        // Greedy total 0.08 + 0.40; the swapped assignment totals 0.30 + 0.02.
        let treated = [Unit::new("t1", 0.6), Unit::new("t2", 0.5)];
        let controls = [Unit::new("c1", 0.52), Unit::new("c2", 0.9)];
        let total: f64 = propensity_match(&treated, &controls).unwrap().iter().map(MatchedPair::distance).sum();
        assert!((total - 0.48).abs() < 1e-12);
    }

    fn item(id: &str, score: f64, acc: f64) -> (String, f64, f64) {
        (id.to_string(), score, acc)
    }

    #[test]
    fn top_bottom_cases() {
        let flat: Vec<_> = (0..10).map(|i| item(&format!("n{i}"), i as f64, 0.8)).collect();
        let r = top_bottom_test(&flat, 5).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.significant_at_5pct);

        let gap: Vec<_> = (0..10).map(|i| item(&format!("n{i}"), i as f64, if i >= 5 { 0.9 } else { 0.7 })).collect();
        assert_eq!(top_bottom_test(&gap, 5), Err(StatsError::DegenerateGroups));

        let jitter = [0.01, 0.0, -0.01, 0.0, 0.0];
        let clusters: Vec<_> =
            (0..10).map(|i| item(&format!("n{i}"), i as f64, if i >= 5 { 0.9 } else { 0.7 } + jitter[i % 5])).collect();
        let r = top_bottom_test(&clusters, 5).unwrap();
        assert!(r.statistic > 0.0 && r.significant_at_5pct);

        assert!(top_bottom_test(&clusters[..9], 5).is_err());
    }
}
