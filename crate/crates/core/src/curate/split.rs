use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DatasetEntry;
use crate::chemgraph::canonical_smiles;

/// Train/test indices for items grouped by `keys`. Groups are shuffled
/// under `seed` and moved whole into train while they fit in
/// `round(ratio * n)`; the rest go to test. Both lists are ascending.
pub fn split_indices(keys: &[String], ratio: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    assert!(ratio > 0.0 && ratio < 1.0, "ratio must lie in (0, 1)");
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        groups.entry(k.as_str()).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let want = (ratio * keys.len() as f64).round() as usize;
    let mut in_train = vec![false; keys.len()];
    let mut filled = 0;
    for g in &groups {
        if filled + g.len() <= want {
            filled += g.len();
            for &i in g {
                in_train[i] = true;
            }
        }
    }
    (0..keys.len()).partition(|&i| in_train[i])
}

/// Accepted entries split so that identical canonical SMILES never
/// straddle the two sides. Entries with a failed verdict are dropped.
pub fn split_dataset(
    entries: &[DatasetEntry],
    ratio: f64,
    seed: u64,
) -> (Vec<DatasetEntry>, Vec<DatasetEntry>) {
    let usable: Vec<&DatasetEntry> = entries.iter().filter(|e| e.accepted()).collect();
    let keys: Vec<String> = usable.iter().map(|e| canonical_smiles(&e.molecule)).collect();
    let (train, test) = split_indices(&keys, ratio, seed);
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| usable[i].clone()).collect();
    (pick(train), pick(test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("k{i}")).collect()
    }

    #[test]
    fn ten_entries_eight_two() {
        let (train, test) = split_indices(&keys(10), 0.8, 3);
        assert_eq!((train.len(), test.len()), (8, 2));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let k = keys(50);
        assert_eq!(split_indices(&k, 0.8, 7), split_indices(&k, 0.8, 7));
        assert_ne!(split_indices(&k, 0.8, 7), split_indices(&k, 0.8, 8));
    }

    #[test]
    fn duplicates_stay_together() {
        let mut k = keys(9);
        k.push("k3".into());
        for seed in 0..20 {
            let (train, _) = split_indices(&k, 0.8, seed);
            assert_eq!(train.contains(&3), train.contains(&9));
        }
    }
}
