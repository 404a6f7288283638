//! Min-K% probability over verbalized annotation records.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, MemauditError};
use crate::corpus::{verbalize_record, Novel};
use crate::inference::Backend;

/// Mean of the lowest `k`% values (at least one). Every value tied with the
/// cutoff is included. `None` for an empty slice.
pub fn min_k_mean(logprobs: &[f64], k_percent: f64) -> Option<f64> {
    if logprobs.is_empty() {
        return None;
    }
    let mut sorted = logprobs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = ((k_percent / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    let cutoff = sorted[m.min(sorted.len()) - 1];
    let chosen: Vec<f64> = sorted.into_iter().take_while(|v| *v <= cutoff).collect();
    Some(chosen.iter().sum::<f64>() / chosen.len() as f64)
}

#[derive(Debug, Clone)]
pub struct MinKConfig {
    pub k_values: Vec<f64>,
    pub sample_frac: f64,
    pub seed: u64,
}

impl Default for MinKConfig {
    fn default() -> Self {
        MinKConfig { k_values: vec![10.0, 20.0, 30.0], sample_frac: 0.2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinKResult {
    pub novel_id: String,
    pub k: f64,
    pub value: f64,
    pub sample_size: usize,
}

/// Samples `ceil(frac * n)` records, scores each verbalization, and
/// averages the per-record Min-K% values for each `k`.
pub fn run_min_k(novel: &Novel, backend: &dyn Backend, cfg: &MinKConfig) -> Result<Vec<MinKResult>, MemauditError> {
    backend.require_scoring()?;
    if !(cfg.sample_frac > 0.0 && cfg.sample_frac <= 1.0) {
        return Err(MemauditError::Config(format!("sample fraction {} outside (0, 1]", cfg.sample_frac)));
    }
    if let Some(k) = cfg.k_values.iter().find(|k| !(**k > 0.0 && **k <= 100.0)) {
        return Err(MemauditError::Config(format!("k = {k} outside (0, 100]")));
    }
    let n = novel.records.len();
    if n == 0 {
        return Err(MemauditError::NoEligible { novel: novel.id.clone(), probe: "Min-K%" });
    }
    let size = ((cfg.sample_frac * n as f64).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[0x6d6b]));
    let mut picked = sample(&mut rng, n, size).into_vec();
    picked.sort_unstable();

    let scored: Vec<Vec<f64>> = picked
        .par_iter()
        .map(|&i| {
            let text = verbalize_record(&novel.records[i])?;
            Ok(backend.score(&text)?.into_iter().map(|t| t.logprob).collect())
        })
        .collect::<Result<_, MemauditError>>()?;
    let usable: Vec<&Vec<f64>> = scored.iter().filter(|s| !s.is_empty()).collect();
    if usable.is_empty() {
        return Err(MemauditError::NoEligible { novel: novel.id.clone(), probe: "Min-K%" });
    }
    Ok(cfg
        .k_values
        .iter()
        .map(|&k| {
            let vals: Vec<f64> = usable.iter().filter_map(|s| min_k_mean(s, k)).collect();
            MinKResult {
                novel_id: novel.id.clone(),
                k,
                value: vals.iter().sum::<f64>() / vals.len() as f64,
                sample_size: vals.len(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{hash_scores, MockBackend};
    use crate::synth::{generate, SynthSpec};

    #[test]
    fn hand_examples() {
        let v = [-1.0, -2.0, -3.0, -4.0];
        assert_eq!(min_k_mean(&v, 50.0), Some(-3.5));
        assert_eq!(min_k_mean(&v, 100.0), Some(-2.5));
        assert_eq!(min_k_mean(&[-2.0; 7], 10.0), Some(-2.0));
        assert_eq!(min_k_mean(&[], 20.0), None);
    }

    #[test]
    fn ties_at_cutoff_are_included() {
        // 25% of 4 is one value, but three values tie at the cutoff.
        assert_eq!(min_k_mean(&[-1.0, -3.0, -3.0, -3.0], 25.0), Some(-3.0));
        assert_eq!(min_k_mean(&[-1.0, -2.0, -3.0, -3.0], 25.0), Some(-3.0));
        assert_eq!(min_k_mean(&[-1.0, -2.0, -2.0, -3.0], 50.0), Some(-7.0 / 3.0));
    }

    #[test]
    fn requires_scoring() {
        let n = generate("mk", &SynthSpec::default()).novel().unwrap();
        let err = run_min_k(&n, &MockBackend::constant("x"), &MinKConfig::default()).unwrap_err();
        assert!(matches!(err, MemauditError::Inference(crate::inference::InferenceError::ScoringUnsupported { .. })));
    }

    #[test]
    fn samples_a_fifth_and_is_monotone() {
        let n = generate("mk", &SynthSpec::default()).novel().unwrap();
        let mock = MockBackend::constant("x").with_scorer(hash_scores);
        let res = run_min_k(&n, &mock, &MinKConfig { seed: 3, ..MinKConfig::default() }).unwrap();
        assert_eq!(res.len(), 3);
        let expected = (0.2 * n.records.len() as f64).ceil() as usize;
        assert!(res.iter().all(|r| r.sample_size == expected));
        assert!(res[0].value <= res[1].value && res[1].value <= res[2].value);
        assert!(res.iter().all(|r| r.value <= 0.0));
        assert_eq!(res, run_min_k(&n, &mock, &MinKConfig { seed: 3, ..MinKConfig::default() }).unwrap());
    }
}
