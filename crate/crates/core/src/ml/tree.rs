//! CART classification tree with Gini impurity.
//!
//! Candidate thresholds are midpoints between consecutive distinct values of
//! a feature among the rows at a node; `x <= threshold` goes left. Split
//! quality is compared with exact integer arithmetic so ties are real ties
//! and resolve to the lowest feature index, then the lowest threshold.

use serde::{Deserialize, Serialize};

use super::{check_rows, LabeledVector, MlError, Severity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    /// Nodes with fewer rows than this become leaves.
    pub min_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        class: Severity,
        /// Training rows reaching this leaf, indexed mild then severe.
        counts: [usize; 2],
    },
}

impl TreeNode {
    pub(crate) fn predict(&self, x: &[f64]) -> Severity {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub root: TreeNode,
}

impl DecisionTree {
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Severity {
        self.root.predict(x)
    }
}

/// Majority class, ties going to severe.
pub(crate) fn majority(counts: [usize; 2]) -> Severity {
    if counts[0] > counts[1] {
        Severity::Mild
    } else {
        Severity::Severe
    }
}

fn class_counts(rows: &[LabeledVector], idx: &[usize]) -> [usize; 2] {
    let mut c = [0; 2];
    for &i in idx {
        c[rows[i].label.index()] += 1;
    }
    c
}

/// Split score `sum_children(sum_k c_k^2 / n_child)` as an exact fraction.
/// Weighted Gini impurity equals `1 - score / n`, so larger is better.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(left: [usize; 2], right: [usize; 2]) -> Self {
        let sq = |c: [usize; 2]| (c[0] * c[0] + c[1] * c[1]) as u128;
        let nl = (left[0] + left[1]) as u128;
        let nr = (right[0] + right[1]) as u128;
        Self {
            num: sq(left) * nr + sq(right) * nl,
            den: nl * nr,
        }
    }

    fn beats(&self, other: &Score) -> bool {
        self.num * other.den > other.num * self.den
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BestSplit {
    pub feature: usize,
    pub threshold: f64,
    score: Score,
}

/// Best split of `idx` over `features` (ascending), or `None` when every
/// candidate feature is constant on these rows.
pub(crate) fn best_split(
    rows: &[LabeledVector],
    idx: &[usize],
    features: &[usize],
) -> Option<BestSplit> {
    let total = class_counts(rows, idx);
    let mut best: Option<BestSplit> = None;
    let mut order = idx.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| rows[a].features[f].total_cmp(&rows[b].features[f]));
        let mut left = [0usize; 2];
        for w in 0..order.len() - 1 {
            left[rows[order[w]].label.index()] += 1;
            let lo = rows[order[w]].features[f];
            let hi = rows[order[w + 1]].features[f];
            if lo == hi {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let score = Score::new(left, right);
            if best.as_ref().is_none_or(|b| score.beats(&b.score)) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some(BestSplit {
                    feature: f,
                    threshold,
                    score,
                });
            }
        }
    }
    best
}

/// Grows a tree on `idx`, asking `features_at_node` for the candidate
/// feature list (ascending) at every node that may split.
pub(crate) fn grow(
    rows: &[LabeledVector],
    idx: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    features_at_node: &mut dyn FnMut() -> Vec<usize>,
) -> TreeNode {
    let counts = class_counts(rows, &idx);
    let leaf = TreeNode::Leaf {
        class: majority(counts),
        counts,
    };
    let pure = counts[0] == 0 || counts[1] == 0;
    if pure || idx.len() < params.min_split || params.max_depth.is_some_and(|d| depth >= d) {
        return leaf;
    }
    let features = features_at_node();
    let Some(split) = best_split(rows, &idx, &features) else {
        return leaf;
    };
    let (left, right): (Vec<usize>, Vec<usize>) = idx
        .into_iter()
        .partition(|&i| rows[i].features[split.feature] <= split.threshold);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(rows, left, depth + 1, params, features_at_node)),
        right: Box::new(grow(rows, right, depth + 1, params, features_at_node)),
    }
}

pub fn train_decision_tree(
    rows: &[LabeledVector],
    params: &TreeParams,
) -> Result<DecisionTree, MlError> {
    let p = check_rows(rows)?;
    if params.min_split < 2 {
        return Err(MlError::BadParameter("min_split must be at least 2".into()));
    }
    let all: Vec<usize> = (0..p).collect();
    let root = grow(rows, (0..rows.len()).collect(), 0, params, &mut || all.clone());
    Ok(DecisionTree { n_features: p, root })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(features: Vec<f64>, label: Severity) -> LabeledVector {
        LabeledVector {
            example_id: String::new(),
            label,
            hu: 0.5,
            features,
        }
    }

    use Severity::*;

    #[test]
    fn separable_single_feature_gives_stump() {
        let rows = vec![
            lv(vec![0.1], Mild),
            lv(vec![0.3], Mild),
            lv(vec![0.7], Severe),
            lv(vec![0.9], Severe),
        ];
        let tree = train_decision_tree(&rows, &TreeParams::default()).unwrap();
        assert_eq!(tree.root.depth(), 1);
        match &tree.root {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert!((threshold - 0.5).abs() < 1e-12);
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(tree.predict_unchecked(&[0.3]), Mild);
        assert_eq!(tree.predict_unchecked(&[0.6]), Severe);
    }

    #[test]
    fn pure_input_is_a_leaf() {
        let rows = vec![lv(vec![1.0, 2.0], Mild), lv(vec![3.0, 0.0], Mild)];
        let tree = train_decision_tree(&rows, &TreeParams::default()).unwrap();
        assert_eq!(
            tree.root,
            TreeNode::Leaf {
                class: Mild,
                counts: [2, 0]
            }
        );
    }

    #[test]
    fn constant_features_tie_to_severe() {
        let rows = vec![lv(vec![1.0], Mild), lv(vec![1.0], Severe)];
        let tree = train_decision_tree(&rows, &TreeParams::default()).unwrap();
        assert_eq!(
            tree.root,
            TreeNode::Leaf {
                class: Severe,
                counts: [1, 1]
            }
        );
    }

    #[test]
    fn equal_scores_prefer_lower_feature_then_lower_threshold() {
        // Both features separate perfectly; feature 0 must win.
        let rows = vec![
            lv(vec![0.0, 0.0], Mild),
            lv(vec![1.0, 1.0], Severe),
        ];
        let tree = train_decision_tree(&rows, &TreeParams::default()).unwrap();
        assert!(matches!(tree.root, TreeNode::Split { feature: 0, .. }));
        // M S M S along one feature: thresholds 0.5 and 2.5 tie; 0.5 wins.
        let rows = vec![
            lv(vec![0.0], Mild),
            lv(vec![1.0], Severe),
            lv(vec![2.0], Severe),
            lv(vec![3.0], Mild),
        ];
        let tree = train_decision_tree(&rows, &TreeParams::default()).unwrap();
        match tree.root {
            TreeNode::Split { threshold, .. } => assert_eq!(threshold, 0.5),
            _ => panic!(),
        }
    }

    #[test]
    fn depth_and_min_split_limits() {
        let rows: Vec<_> = (0..8)
            .map(|i| lv(vec![i as f64], if i % 2 == 0 { Mild } else { Severe }))
            .collect();
        let full = train_decision_tree(&rows, &TreeParams::default()).unwrap();
        assert_eq!(full.root.leaf_count(), 8);
        let stump = train_decision_tree(
            &rows,
            &TreeParams {
                max_depth: Some(1),
                min_split: 2,
            },
        )
        .unwrap();
        assert_eq!(stump.root.depth(), 1);
        let leaf = train_decision_tree(
            &rows,
            &TreeParams {
                max_depth: None,
                min_split: 9,
            },
        )
        .unwrap();
        assert_eq!(leaf.root.depth(), 0);
        assert!(train_decision_tree(&rows, &TreeParams { max_depth: None, min_split: 1 }).is_err());
    }

    #[test]
    fn full_tree_fits_training_data() {
        let rows: Vec<_> = (0..40)
            .map(|i| {
                let x = (i * 7 % 13) as f64;
                let y = (i * 5 % 11) as f64;
                lv(vec![x, y], if (x + y) as usize % 3 == 0 { Severe } else { Mild })
            })
            .collect();
        let tree = train_decision_tree(&rows, &TreeParams::default()).unwrap();
        for r in &rows {
            assert_eq!(tree.predict_unchecked(&r.features), r.label);
        }
    }
}
