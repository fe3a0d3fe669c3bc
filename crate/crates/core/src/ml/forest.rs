//! Bagged CART trees with per-split feature subsampling.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, majority, TreeNode, TreeParams};
use super::{check_rows, LabeledVector, MlError, Severity};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features considered at each split; `None` means `ceil(sqrt(p))`.
    pub features_per_split: Option<usize>,
    /// Draw a same-size bootstrap sample per tree. Off only in tests.
    pub bootstrap: bool,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            features_per_split: None,
            bootstrap: true,
            tree: TreeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub features_per_split: usize,
    pub trees: Vec<TreeNode>,
}

impl RandomForest {
    pub fn votes(&self, x: &[f64]) -> [usize; 2] {
        let mut votes = [0; 2];
        for tree in &self.trees {
            votes[tree.predict(x).index()] += 1;
        }
        votes
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Severity {
        majority(self.votes(x))
    }
}

pub fn train_random_forest(
    rows: &[LabeledVector],
    params: &ForestParams,
    seed: u64,
) -> Result<RandomForest, MlError> {
    let p = check_rows(rows)?;
    if params.n_trees == 0 {
        return Err(MlError::BadParameter("n_trees must be at least 1".into()));
    }
    if params.tree.min_split < 2 {
        return Err(MlError::BadParameter("min_split must be at least 2".into()));
    }
    let m = params
        .features_per_split
        .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize);
    if m == 0 || m > p {
        return Err(MlError::BadParameter(format!(
            "features_per_split must be in 1..={p}, got {m}"
        )));
    }

    // Each tree owns a generator seeded from (seed, tree index), so the
    // parallel result equals the serial one.
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, "forest-tree", t as u64));
            let idx: Vec<usize> = if params.bootstrap {
                (0..rows.len()).map(|_| rng.gen_range(0..rows.len())).collect()
            } else {
                (0..rows.len()).collect()
            };
            let mut features_at_node = || {
                let mut f = sample(&mut rng, p, m).into_vec();
                f.sort_unstable();
                f
            };
            grow(rows, idx, 0, &params.tree, &mut features_at_node)
        })
        .collect();

    Ok(RandomForest {
        n_features: p,
        features_per_split: m,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::{train_decision_tree, Model};

    fn dataset(n: usize, p: usize) -> Vec<LabeledVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        (0..n)
            .map(|i| {
                let features: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let label = if features[0] + 0.5 * features[1 % p] > 0.0 {
                    Severity::Severe
                } else {
                    Severity::Mild
                };
                LabeledVector {
                    example_id: format!("r{i}"),
                    label,
                    hu: 0.5,
                    features,
                }
            })
            .collect()
    }

    #[test]
    fn single_unbagged_full_tree_equals_decision_tree() {
        let rows = dataset(60, 4);
        let params = ForestParams {
            n_trees: 1,
            features_per_split: Some(4),
            bootstrap: false,
            tree: TreeParams::default(),
        };
        let forest = train_random_forest(&rows, &params, 3).unwrap();
        let tree = train_decision_tree(&rows, &TreeParams::default()).unwrap();
        assert_eq!(forest.trees[0], tree.root);
        let probe = dataset(200, 4);
        for r in &probe {
            assert_eq!(forest.predict_unchecked(&r.features), tree.predict_unchecked(&r.features));
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let rows = dataset(50, 5);
        let a = train_random_forest(&rows, &ForestParams::default(), 8).unwrap();
        let b = train_random_forest(&rows, &ForestParams::default(), 8).unwrap();
        assert_eq!(a, b);
        let c = train_random_forest(&rows, &ForestParams::default(), 9).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.features_per_split, 3);
    }

    #[test]
    fn separable_data_is_fit_perfectly() {
        let rows: Vec<_> = (0..40)
            .map(|i| {
                let severe = i % 2 == 1;
                let base = if severe { 2.0 } else { -2.0 };
                LabeledVector {
                    example_id: format!("s{i}"),
                    label: if severe { Severity::Severe } else { Severity::Mild },
                    hu: 0.5,
                    features: vec![base + 0.01 * i as f64, base - 0.02 * i as f64],
                }
            })
            .collect();
        let forest = train_random_forest(&rows, &ForestParams::default(), 1).unwrap();
        let model = Model::RandomForest(forest);
        let correct = rows
            .iter()
            .filter(|r| model.predict(&r.features).unwrap() == r.label)
            .count();
        assert_eq!(correct, rows.len());
    }

    #[test]
    fn vote_ties_go_to_severe() {
        let leaf = |class| TreeNode::Leaf { class, counts: [0, 0] };
        let forest = RandomForest {
            n_features: 1,
            features_per_split: 1,
            trees: vec![leaf(Severity::Mild), leaf(Severity::Severe)],
        };
        assert_eq!(forest.predict_unchecked(&[0.0]), Severity::Severe);
        let forest = RandomForest {
            n_features: 1,
            features_per_split: 1,
            trees: vec![leaf(Severity::Mild), leaf(Severity::Severe), leaf(Severity::Severe)],
        };
        assert_eq!(forest.votes(&[0.0]), [1, 2]);
        assert_eq!(forest.predict_unchecked(&[0.0]), Severity::Severe);
    }

    #[test]
    fn bad_parameters() {
        let rows = dataset(10, 3);
        let p = ForestParams {
            features_per_split: Some(4),
            ..ForestParams::default()
        };
        assert!(train_random_forest(&rows, &p, 0).is_err());
        let p = ForestParams {
            n_trees: 0,
            ..ForestParams::default()
        };
        assert!(train_random_forest(&rows, &p, 0).is_err());
    }
}
