use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{protocol, Result};

/// Default number of random splits.
pub const DEFAULT_TRIALS: usize = 10;

/// One random half split of the identities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSplit {
    pub trial: usize,
    pub seed: u64,
    /// Sorted.
    pub train_ids: Vec<String>,
    /// Sorted; takes the extra identity when the count is odd.
    pub test_ids: Vec<String>,
}

/// `num_trials` seeded shuffles of the distinct identities; trial `t` draws
/// from ChaCha8 stream `t` of `seed`, so each split depends only on
/// `(seed, t)`.
pub fn make_splits<S: AsRef<str>>(identities: &[S], num_trials: usize, seed: u64) -> Result<Vec<TrialSplit>> {
    let mut ids: Vec<String> = identities.iter().map(|s| s.as_ref().to_string()).collect();
    ids.sort();
    ids.dedup();
    if ids.len() < 2 {
        return Err(protocol!("need at least 2 identities to split, got {}", ids.len()));
    }
    if num_trials == 0 {
        return Err(protocol!("num_trials must be at least 1"));
    }
    let n_train = ids.len() / 2;
    Ok((0..num_trials)
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let mut shuffled = ids.clone();
            shuffled.shuffle(&mut rng);
            let mut test_ids = shuffled.split_off(n_train);
            let mut train_ids = shuffled;
            train_ids.sort();
            test_ids.sort();
            TrialSplit {
                trial,
                seed,
                train_ids,
                test_ids,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::person_label;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(person_label).collect()
    }

    #[test]
    fn half_splits() {
        for split in make_splits(&ids(4), 5, 1).unwrap() {
            assert_eq!((split.train_ids.len(), split.test_ids.len()), (2, 2));
        }
        let s = make_splits(&ids(178), 10, 3).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.iter().all(|t| t.test_ids.len() == 89 && t.train_ids.len() == 89));
        let s = make_splits(&ids(300), 10, 3).unwrap();
        assert!(s.iter().all(|t| t.test_ids.len() == 150));
        let s = make_splits(&ids(5), 1, 3).unwrap();
        assert_eq!((s[0].train_ids.len(), s[0].test_ids.len()), (2, 3));
    }

    #[test]
    fn splits_are_disjoint_and_cover() {
        for s in make_splits(&ids(31), 4, 9).unwrap() {
            let mut all: Vec<String> = s.train_ids.iter().chain(&s.test_ids).cloned().collect();
            all.sort();
            assert_eq!(all, ids(31));
        }
    }

    #[test]
    fn deterministic_per_seed_and_trial() {
        let a = make_splits(&ids(20), 3, 42).unwrap();
        assert_eq!(a, make_splits(&ids(20), 3, 42).unwrap());
        assert_ne!(a[0].test_ids, a[1].test_ids);
        // Trial t does not depend on how many trials are requested.
        assert_eq!(make_splits(&ids(20), 1, 42).unwrap()[0], a[0]);
        assert_ne!(a, make_splits(&ids(20), 3, 43).unwrap());
    }

    #[test]
    fn too_few_identities() {
        assert!(make_splits(&ids(1), 1, 0).is_err());
        assert!(make_splits(&["a", "a"], 1, 0).is_err());
    }
}
