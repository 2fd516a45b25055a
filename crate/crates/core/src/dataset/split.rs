use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Validation,
    Dev,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub example_ids: Vec<String>,
    pub seed: u64,
}

/// Holds out `size` ids, sampled uniformly without replacement, as a
/// validation split. Both splits keep the input order.
///
/// Returns `(validation, train)`.
pub fn make_validation_split(
    train_ids: &[String],
    size: usize,
    seed: u64,
) -> Result<(DatasetSplit, DatasetSplit)> {
    if size >= train_ids.len() {
        return Err(Error::arg(format!(
            "validation size {size} must be smaller than the {} available ids",
            train_ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = vec![false; train_ids.len()];
    for i in sample(&mut rng, train_ids.len(), size) {
        held[i] = true;
    }
    let (mut validation, mut train) = (Vec::with_capacity(size), Vec::new());
    for (id, h) in train_ids.iter().zip(held) {
        if h {
            validation.push(id.clone());
        } else {
            train.push(id.clone());
        }
    }
    Ok((
        DatasetSplit {
            name: SplitName::Validation,
            example_ids: validation,
            seed,
        },
        DatasetSplit {
            name: SplitName::Train,
            example_ids: train,
            seed,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("q{i}")).collect()
    }

    #[test]
    fn deterministic_in_seed() {
        let a = make_validation_split(&ids(100), 14, 7).unwrap();
        let b = make_validation_split(&ids(100), 14, 7).unwrap();
        assert_eq!(a, b);
        let c = make_validation_split(&ids(100), 14, 8).unwrap();
        assert_ne!(a.0.example_ids, c.0.example_ids);
    }

    #[test]
    fn zero_size_keeps_everything_in_train() {
        let (v, t) = make_validation_split(&ids(100), 0, 1).unwrap();
        assert!(v.example_ids.is_empty());
        assert_eq!(t.example_ids, ids(100));
    }

    #[test]
    fn size_must_be_smaller_than_input() {
        assert!(matches!(
            make_validation_split(&ids(5), 5, 1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn hundred_ids_size_fourteen() {
        let (v, t) = make_validation_split(&ids(100), 14, 7).unwrap();
        assert_eq!((v.example_ids.len(), t.example_ids.len()), (14, 86));
    }

    proptest! {
        // Set-arithmetic oracle: union restores the input, no overlap, exact sizes.
        #[test]
        fn partitions_input(raw in proptest::collection::btree_set("[a-z0-9]{1,8}", 1..200), frac in 0.0f64..1.0, seed: u64) {
            let input: Vec<String> = raw.into_iter().collect();
            let size = ((input.len() as f64) * frac) as usize;
            let size = size.min(input.len() - 1);
            let (v, t) = make_validation_split(&input, size, seed).unwrap();
            let vs: BTreeSet<_> = v.example_ids.iter().cloned().collect();
            let ts: BTreeSet<_> = t.example_ids.iter().cloned().collect();
            prop_assert_eq!(v.example_ids.len(), size);
            prop_assert_eq!(t.example_ids.len(), input.len() - size);
            prop_assert!(vs.is_disjoint(&ts));
            let union: BTreeSet<_> = vs.union(&ts).cloned().collect();
            let all: BTreeSet<_> = input.iter().cloned().collect();
            prop_assert_eq!(union, all);
        }
    }
}
