//! Data splitting, the four classifiers, and evaluation.
//!
//! All classifiers are implemented here from scratch:
//! a CART decision tree, a bagged random forest of those trees, L2-regularized
//! logistic regression fit by full-batch gradient descent, and a linear SVM
//! fit by stochastic subgradient descent on the hinge loss. Linear models
//! standardize their inputs with statistics from the training partition and
//! keep those statistics inside the model.

mod eval;
mod forest;
mod linear;
mod split;
mod tree;

pub use eval::{evaluate, EvalReport, PredictionRecord};
pub use forest::{train_random_forest, ForestParams, RandomForest};
pub use linear::{
    logistic_gradient, logistic_objective, svm_objective, train_linear_svm,
    train_logistic_regression, LinearSvm, LogisticModel, LogisticParams, Standardizer, SvmParams,
};
pub use split::{largest_remainder, stratified_assignment, stratified_split, Partition, Split, SplitRatios};
pub use tree::{train_decision_tree, DecisionTree, TreeNode, TreeParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::lexicon::Severity;

#[derive(Debug, Error, PartialEq)]
pub enum MlError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("partition is empty")]
    EmptyPartition,
    #[error("expected {expected} features, got {got}")]
    FeatureLength { expected: usize, got: usize },
    #[error("non-finite feature value in {0:?}")]
    NonFinite(String),
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
    #[error("class {class} has {count} examples; cannot populate all three partitions")]
    ClassTooSmall { class: Severity, count: usize },
    #[error("duplicate example id {0:?}")]
    DuplicateId(String),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

/// One example's features with its class, identity and health utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledVector {
    pub example_id: String,
    pub label: Severity,
    pub hu: f64,
    pub features: Vec<f64>,
}

impl LabeledVector {
    /// Copy restricted to the feature columns at `indices`.
    pub fn project(&self, indices: &[usize]) -> Self {
        Self {
            example_id: self.example_id.clone(),
            label: self.label,
            hu: self.hu,
            features: indices.iter().map(|&i| self.features[i]).collect(),
        }
    }
}

/// Checks that `rows` is non-empty, rectangular and finite; returns the
/// feature count.
pub(crate) fn check_rows(rows: &[LabeledVector]) -> Result<usize, MlError> {
    let first = rows.first().ok_or(MlError::EmptyTrainingSet)?;
    let p = first.features.len();
    for r in rows {
        if r.features.len() != p {
            return Err(MlError::FeatureLength {
                expected: p,
                got: r.features.len(),
            });
        }
        if r.features.iter().any(|v| !v.is_finite()) {
            return Err(MlError::NonFinite(r.example_id.clone()));
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tree,
    Forest,
    Logreg,
    Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [Self::Tree, Self::Forest, Self::Logreg, Self::Svm];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tree => "tree",
            Self::Forest => "forest",
            Self::Logreg => "logreg",
            Self::Svm => "svm",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown model kind {s:?} (expected tree, forest, logreg or svm)"))
    }
}

/// A fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
    Logistic(LogisticModel),
    LinearSvm(LinearSvm),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::DecisionTree(m) => m.n_features,
            Model::RandomForest(m) => m.n_features,
            Model::Logistic(m) => m.weights.len(),
            Model::LinearSvm(m) => m.weights.len(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::DecisionTree(_) => ModelKind::Tree,
            Model::RandomForest(_) => ModelKind::Forest,
            Model::Logistic(_) => ModelKind::Logreg,
            Model::LinearSvm(_) => ModelKind::Svm,
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<Severity, MlError> {
        if features.len() != self.n_features() {
            return Err(MlError::FeatureLength {
                expected: self.n_features(),
                got: features.len(),
            });
        }
        Ok(match self {
            Model::DecisionTree(m) => m.predict_unchecked(features),
            Model::RandomForest(m) => m.predict_unchecked(features),
            Model::Logistic(m) => m.predict_unchecked(features),
            Model::LinearSvm(m) => m.predict_unchecked(features),
        })
    }
}

/// Which classifier to fit and with what hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub logistic: LogisticParams,
    pub svm: SvmParams,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::Tree,
            tree: TreeParams::default(),
            forest: ForestParams::default(),
            logistic: LogisticParams::default(),
            svm: SvmParams::default(),
        }
    }
}

impl ModelConfig {
    pub fn with_kind(kind: ModelKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    /// Fits the configured classifier. `seed` feeds the forest and SVM; the
    /// tree and logistic regression are deterministic without it.
    pub fn train(&self, rows: &[LabeledVector], seed: u64) -> Result<Model, MlError> {
        Ok(match self.kind {
            ModelKind::Tree => Model::DecisionTree(train_decision_tree(rows, &self.tree)?),
            ModelKind::Forest => Model::RandomForest(train_random_forest(rows, &self.forest, seed)?),
            ModelKind::Logreg => Model::Logistic(train_logistic_regression(rows, &self.logistic)?),
            ModelKind::Svm => Model::LinearSvm(train_linear_svm(rows, &self.svm, seed)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<LabeledVector> {
        (0..12)
            .map(|i| LabeledVector {
                example_id: format!("e{i}"),
                label: if i % 2 == 0 { Severity::Mild } else { Severity::Severe },
                hu: 0.5,
                features: vec![i as f64 * 0.37 - 2.0, (i % 2) as f64 + 0.1 * i as f64],
            })
            .collect()
    }

    #[test]
    fn every_model_round_trips_through_json() {
        let data = rows();
        for kind in ModelKind::ALL {
            let model = ModelConfig::with_kind(kind).train(&data, 11).unwrap();
            let json = serde_json::to_string(&model).unwrap();
            let back: Model = serde_json::from_str(&json).unwrap();
            assert_eq!(back, model, "{kind}");
            assert_eq!(serde_json::to_string(&back).unwrap(), json);
            assert!(json.contains(&format!("\"kind\":")), "{json}");
        }
    }

    #[test]
    fn predict_checks_length() {
        let model = ModelConfig::default().train(&rows(), 0).unwrap();
        assert_eq!(
            model.predict(&[1.0]),
            Err(MlError::FeatureLength { expected: 2, got: 1 })
        );
    }

    #[test]
    fn training_rejects_ragged_or_empty_input() {
        let mut data = rows();
        data[3].features.push(1.0);
        for kind in ModelKind::ALL {
            let cfg = ModelConfig::with_kind(kind);
            assert!(matches!(cfg.train(&data, 0), Err(MlError::FeatureLength { .. })));
            assert_eq!(cfg.train(&[], 0), Err(MlError::EmptyTrainingSet));
        }
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("forest".parse::<ModelKind>().unwrap(), ModelKind::Forest);
        assert!("cart".parse::<ModelKind>().is_err());
    }
}
