use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::hetgraph::Label;
use crate::seed;

/// Disjoint train/validation/test partition of the labeled news.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

/// Splits `total` across classes proportionally to `sizes`, giving leftover
/// units to the largest fractional parts (earlier classes win ties).
fn apportion(sizes: &[usize], total: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    if n == 0 {
        return vec![0; sizes.len()];
    }
    let mut quota: Vec<usize> = sizes.iter().map(|&s| s * total / n).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // remainder of s * total / n, compared exactly in integers
    order.sort_by_key(|&i| std::cmp::Reverse((sizes[i] * total) % n));
    let mut left = total - quota.iter().sum::<usize>();
    for i in order {
        if left == 0 {
            break;
        }
        if quota[i] < sizes[i] {
            quota[i] += 1;
            left -= 1;
        }
    }
    quota
}

/// Seeded stratified split: `floor(train_frac * n)` training news, the rest
/// halved into validation and test (the odd item goes to a seed-chosen side).
pub fn split_dataset(labeled: &[(String, Label)], train_frac: f64, seed: u64) -> Result<Split> {
    if labeled.len() < 3 {
        return Err(Error::Precondition(format!(
            "need at least 3 labeled news to split, got {}",
            labeled.len()
        )));
    }
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Config(format!("train_frac {train_frac} outside (0, 1)")));
    }
    let mut by_class: BTreeMap<Label, Vec<String>> = BTreeMap::new();
    for (id, l) in labeled {
        by_class.entry(*l).or_default().push(id.clone());
    }
    let mut rng = seed::rng(seed::derive(seed, "split"));
    for ids in by_class.values_mut() {
        ids.sort();
        ids.dedup();
        ids.shuffle(&mut rng);
    }
    let sizes: Vec<usize> = by_class.values().map(Vec::len).collect();
    let n: usize = sizes.iter().sum();
    if n != labeled.len() {
        return Err(Error::Conflict("duplicate news ids in the labeled set".into()));
    }
    let n_train = (train_frac * n as f64).floor() as usize;
    let rest = n - n_train;
    let n_val = rest / 2 + usize::from(rest % 2 == 1 && rng.random::<bool>());

    let train_q = apportion(&sizes, n_train);
    let remaining: Vec<usize> = sizes.iter().zip(&train_q).map(|(s, t)| s - t).collect();
    let val_q = apportion(&remaining, n_val);

    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for (c, ids) in by_class.values().enumerate() {
        let (t, v) = (train_q[c], val_q[c]);
        split.train.extend_from_slice(&ids[..t]);
        split.val.extend_from_slice(&ids[t..t + v]);
        split.test.extend_from_slice(&ids[t + v..]);
    }
    split.train.sort();
    split.val.sort();
    split.test.sort();
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn labeled(n_real: usize, n_fake: usize) -> Vec<(String, Label)> {
        (0..n_real)
            .map(|i| (format!("r{i}"), Label::Real))
            .chain((0..n_fake).map(|i| (format!("f{i}"), Label::Fake)))
            .collect()
    }

    #[test]
    fn sizes_follow_the_seventy_percent_rule() {
        let s = split_dataset(&labeled(5, 5), 0.7, 1).unwrap();
        assert_eq!(s.train.len(), 7);
        let vt = (s.val.len(), s.test.len());
        assert!(vt == (2, 1) || vt == (1, 2));
        assert_eq!(s, split_dataset(&labeled(5, 5), 0.7, 1).unwrap());

        let big = split_dataset(&labeled(527, 527), 0.7, 3).unwrap();
        assert_eq!(big.train.len(), 737);
        assert!(matches!(split_dataset(&labeled(1, 1), 0.7, 0), Err(Error::Precondition(_))));
        assert!(matches!(split_dataset(&labeled(3, 3), 1.0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn disjoint_and_stratified_over_many_seeds() {
        let data = labeled(37, 23);
        for seed in 0..50 {
            let s = split_dataset(&data, 0.7, seed).unwrap();
            let all: BTreeSet<&String> = s.train.iter().chain(&s.val).chain(&s.test).collect();
            assert_eq!(all.len(), data.len());
            assert!(s.val.len().abs_diff(s.test.len()) <= 1);
            for part in [&s.train, &s.val, &s.test] {
                let fake = part.iter().filter(|id| id.starts_with('f')).count() as f64;
                let expected = part.len() as f64 * 23.0 / 60.0;
                assert!((fake - expected).abs() <= 1.0, "seed {seed}: {fake} vs {expected}");
            }
        }
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(&[5, 5], 7), vec![4, 3]);
        assert_eq!(apportion(&[1, 1, 1], 2).iter().sum::<usize>(), 2);
        assert_eq!(apportion(&[10, 0], 3), vec![3, 0]);
    }
}
