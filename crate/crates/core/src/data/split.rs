use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SplitPlan {
    /// Seeded shuffle, then `k` contiguous folds (not stratified). With
    /// `by_group`, whole groups are assigned to folds.
    KFold { k: usize, seed: u64, by_group: bool },
    /// Per class, `floor(train_fraction * n_c)` items train and the rest
    /// test, redrawn for each trial.
    MonteCarlo { train_fraction: f64, trials: usize, seed: u64 },
}

/// Indices into a dataset, ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

pub fn make_splits(dataset: &Dataset, plan: &SplitPlan) -> Result<Vec<Split>> {
    match *plan {
        SplitPlan::KFold { k, seed, by_group } => kfold(dataset, k, seed, by_group),
        SplitPlan::MonteCarlo {
            train_fraction,
            trials,
            seed,
        } => monte_carlo(dataset, train_fraction, trials, seed),
    }
}

fn kfold(dataset: &Dataset, k: usize, seed: u64, by_group: bool) -> Result<Vec<Split>> {
    let n = dataset.len();
    // Units are single items or whole groups.
    let units: Vec<Vec<usize>> = if by_group {
        let mut order: Vec<String> = Vec::new();
        let mut members: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, s) in dataset.sequences.iter().enumerate() {
            let key = s.group.clone().unwrap_or_else(|| format!("\u{0}{}", s.id));
            if !members.contains_key(&key) {
                order.push(key.clone());
            }
            members.entry(key).or_default().push(i);
        }
        order.into_iter().map(|g| members.remove(&g).unwrap()).collect()
    } else {
        (0..n).map(|i| vec![i]).collect()
    };
    if k < 2 {
        return Err(Error::Invalid(format!("k-fold needs k >= 2, got {k}")));
    }
    if k > units.len() {
        return Err(Error::Invalid(format!(
            "k = {k} exceeds the {} {} available",
            units.len(),
            if by_group { "groups" } else { "items" }
        )));
    }

    let mut order: Vec<usize> = (0..units.len()).collect();
    Rng::new(seed).shuffle(&mut order);
    let m = units.len();
    let mut fold_of = vec![0usize; n];
    for (pos, &u) in order.iter().enumerate() {
        let fold = pos * k / m;
        for &i in &units[u] {
            fold_of[i] = fold;
        }
    }
    Ok((0..k)
        .map(|f| Split {
            train: (0..n).filter(|&i| fold_of[i] != f).collect(),
            test: (0..n).filter(|&i| fold_of[i] == f).collect(),
        })
        .collect())
}

fn monte_carlo(dataset: &Dataset, fraction: f64, trials: usize, seed: u64) -> Result<Vec<Split>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Invalid(format!("train fraction {fraction} not in (0, 1)")));
    }
    if trials == 0 {
        return Err(Error::Invalid("need at least one trial".into()));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.classes()];
    for (i, s) in dataset.sequences.iter().enumerate() {
        by_class[s.label].push(i);
    }
    let mut rng = Rng::new(seed);
    let mut splits = Vec::with_capacity(trials);
    for _ in 0..trials {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for members in &by_class {
            let mut shuffled = members.clone();
            rng.shuffle(&mut shuffled);
            let n_train = (fraction * members.len() as f64).floor() as usize;
            train.extend_from_slice(&shuffled[..n_train]);
            test.extend_from_slice(&shuffled[n_train..]);
        }
        train.sort_unstable();
        test.sort_unstable();
        splits.push(Split { train, test });
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sequence;
    use crate::numerics::Vector;

    fn toy(per_class: usize, classes: usize) -> Dataset {
        let seqs = (0..per_class * classes)
            .map(|i| Sequence::new(format!("s{i}"), i % classes, vec![Vector::zeros(1)]))
            .collect();
        Dataset::new((0..classes).map(|c| c.to_string()).collect(), seqs).unwrap()
    }

    #[test]
    fn five_folds_of_ten() {
        let splits = make_splits(&toy(5, 2), &SplitPlan::KFold { k: 5, seed: 3, by_group: false }).unwrap();
        assert_eq!(splits.len(), 5);
        let mut seen = vec![0; 10];
        for s in &splits {
            assert_eq!(s.test.len(), 2);
            assert_eq!(s.train.len(), 8);
            for &i in &s.test {
                seen[i] += 1;
                assert!(!s.train.contains(&i));
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn monte_carlo_is_stratified() {
        let ds = toy(100, 3);
        let plan = SplitPlan::MonteCarlo { train_fraction: 0.8, trials: 5, seed: 1 };
        let splits = make_splits(&ds, &plan).unwrap();
        assert_eq!(splits.len(), 5);
        for s in &splits {
            for c in 0..3 {
                assert_eq!(s.train.iter().filter(|&&i| ds.sequences[i].label == c).count(), 80);
                assert_eq!(s.test.iter().filter(|&&i| ds.sequences[i].label == c).count(), 20);
            }
        }
        assert_ne!(splits[0], splits[1]);
    }

    #[test]
    fn monte_carlo_rounds_down() {
        let ds = toy(7, 2);
        let plan = SplitPlan::MonteCarlo { train_fraction: 0.5, trials: 1, seed: 1 };
        let s = &make_splits(&ds, &plan).unwrap()[0];
        assert_eq!(s.train.len(), 6);
        assert_eq!(s.test.len(), 8);
    }

    #[test]
    fn same_seed_same_splits() {
        let ds = toy(10, 2);
        let plan = SplitPlan::KFold { k: 4, seed: 8, by_group: false };
        assert_eq!(make_splits(&ds, &plan).unwrap(), make_splits(&ds, &plan).unwrap());
    }

    #[test]
    fn k_larger_than_dataset_fails() {
        assert!(make_splits(&toy(2, 2), &SplitPlan::KFold { k: 5, seed: 0, by_group: false }).is_err());
    }

    #[test]
    fn grouped_folds_keep_groups_together() {
        let mut ds = toy(6, 2);
        for (i, s) in ds.sequences.iter_mut().enumerate() {
            s.group = Some(format!("g{}", i / 3));
        }
        let splits = make_splits(&ds, &SplitPlan::KFold { k: 4, seed: 2, by_group: true }).unwrap();
        for s in &splits {
            for &i in &s.test {
                let g = &ds.sequences[i].group;
                assert!(s.train.iter().all(|&j| &ds.sequences[j].group != g));
            }
        }
        assert!(make_splits(&ds, &SplitPlan::KFold { k: 5, seed: 2, by_group: true }).is_err());
    }
}
