use super::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{pca_apply, pca_fit, PcaTransform, Vector};

/// Fits PCA on every frame of the (training) dataset.
pub fn fit_preprocess(train: &Dataset, energy: f64) -> Result<PcaTransform> {
    let frames: Vec<Vector> = train
        .sequences
        .iter()
        .flat_map(|s| s.frames.iter().cloned())
        .collect();
    if frames.is_empty() {
        return Err(Error::Empty("fit_preprocess"));
    }
    pca_fit(&frames, energy)
}

/// Projects every frame through an already fitted transform.
pub fn apply_preprocess(t: &PcaTransform, dataset: &Dataset) -> Result<Dataset> {
    let mut sequences = dataset.sequences.clone();
    for s in &mut sequences {
        for f in &mut s.frames {
            *f = pca_apply(t, f)?;
        }
    }
    Dataset::new(dataset.class_names.clone(), sequences)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_splits, Sequence, SplitPlan};
    use crate::numerics::Rng;

    fn gaussian(n: usize, dim: usize, seed: u64) -> Dataset {
        let mut rng = Rng::new(seed);
        let seqs = (0..n)
            .map(|i| {
                let frames = (0..3).map(|_| (0..dim).map(|_| rng.normal()).collect()).collect();
                Sequence::new(format!("s{i}"), i % 2, frames)
            })
            .collect();
        Dataset::new(vec!["a".into(), "b".into()], seqs).unwrap()
    }

    #[test]
    fn full_energy_preserves_dim() {
        let ds = gaussian(10, 4, 1);
        let t = fit_preprocess(&ds, 1.0).unwrap();
        assert_eq!(apply_preprocess(&t, &ds).unwrap().feature_dim(), 4);
    }

    #[test]
    fn rank_one_training_data_gives_one_feature() {
        let seqs = (0..6)
            .map(|i| {
                let frames = (0..3)
                    .map(|t| {
                        let a = (i * 3 + t) as f64 * 0.1;
                        Vector::from(vec![a, -2.0 * a, 0.5 * a])
                    })
                    .collect();
                Sequence::new(format!("s{i}"), i % 2, frames)
            })
            .collect();
        let ds = Dataset::new(vec!["a".into(), "b".into()], seqs).unwrap();
        let t = fit_preprocess(&ds, 0.9).unwrap();
        assert_eq!(apply_preprocess(&t, &ds).unwrap().feature_dim(), 1);
    }

    #[test]
    fn test_split_reuses_training_transform() {
        let ds = gaussian(20, 5, 2);
        let split = &make_splits(&ds, &SplitPlan::KFold { k: 4, seed: 0, by_group: false }).unwrap()[0];
        let train = ds.subset(&split.train);
        let test = ds.subset(&split.test);
        let t = fit_preprocess(&train, 0.9).unwrap();
        let snapshot = t.clone();
        let a = apply_preprocess(&t, &test).unwrap();
        let b = apply_preprocess(&t, &test).unwrap();
        assert_eq!(t, snapshot);
        assert_eq!(a, b);
        let expected = pca_apply(&t, &test.sequences[0].frames[0]).unwrap();
        assert_eq!(a.sequences[0].frames[0], expected);
        let refit = fit_preprocess(&test, 0.9).unwrap();
        assert_ne!(refit, t);
    }

    #[test]
    fn degenerate_training_data() {
        let seqs = vec![Sequence::new("s", 0, vec![Vector::from(vec![1.0, 1.0]); 4])];
        let ds = Dataset::new(vec!["a".into()], seqs).unwrap();
        assert!(fit_preprocess(&ds, 0.9).is_err());
    }
}
