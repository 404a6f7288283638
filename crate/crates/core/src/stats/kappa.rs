use std::collections::BTreeMap;

use super::StatsError;

/// Cohen's kappa for two raters over the same items.
pub fn cohen_kappa<T: Ord + Clone>(a: &[T], b: &[T]) -> Result<f64, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::TooFew { need: 1, got: 0 });
    }
    let n = a.len() as f64;
    let mut ma: BTreeMap<&T, f64> = BTreeMap::new();
    let mut mb: BTreeMap<&T, f64> = BTreeMap::new();
    let mut agree = 0.0;
    for (x, y) in a.iter().zip(b) {
        *ma.entry(x).or_default() += 1.0;
        *mb.entry(y).or_default() += 1.0;
        if x == y {
            agree += 1.0;
        }
    }
    let p_o = agree / n;
    let p_e: f64 = ma.iter().map(|(k, ca)| ca / n * mb.get(k).copied().unwrap_or(0.0) / n).sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(StatsError::DegenerateMarginals);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Kappa from an explicit 2x2 contingency table.
    fn table_kappa(a: &[u8], b: &[u8]) -> f64 {
        let mut t = [[0.0f64; 2]; 2];
        for (x, y) in a.iter().zip(b) {
            t[*x as usize][*y as usize] += 1.0;
        }
        let n: f64 = t.iter().flatten().sum();
        let p_o = (t[0][0] + t[1][1]) / n;
        let row = [t[0][0] + t[0][1], t[1][0] + t[1][1]];
        let col = [t[0][0] + t[1][0], t[0][1] + t[1][1]];
        let p_e = (row[0] * col[0] + row[1] * col[1]) / (n * n);
        (p_o - p_e) / (1.0 - p_e)
    }

    #[test]
    fn identical_sequences() {
        assert_eq!(cohen_kappa(&[1, 0, 2, 1], &[1, 0, 2, 1]).unwrap(), 1.0);
    }

    #[test]
    fn chance_level_agreement() {
        let k = cohen_kappa(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap();
        assert!(k.abs() <= 1e-12);
    }

    #[test]
    fn below_chance_fixture() {
        // p_o = 0.5, marginals (3/4, 1/4) on both sides give p_e = 0.625.
        let (a, b) = ([1u8, 1, 1, 0], [1u8, 1, 0, 1]);
        let k = cohen_kappa(&a, &b).unwrap();
        assert!((k - table_kappa(&a, &b)).abs() <= 1e-12);
        assert!((k - (-1.0 / 3.0)).abs() <= 1e-12);
    }

    #[test]
    fn degenerate_marginals() {
        assert_eq!(cohen_kappa(&[1, 1], &[1, 1]), Err(StatsError::DegenerateMarginals));
        assert!(cohen_kappa::<u8>(&[], &[]).is_err());
    }

    #[test]
    fn bounded_above_by_one() {
        let a = [0, 1, 2, 2, 1, 0, 1];
        let b = [0, 1, 2, 1, 1, 0, 2];
        let k = cohen_kappa(&a, &b).unwrap();
        assert!(k < 1.0);
    }
}
