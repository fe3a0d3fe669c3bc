use serde::{Deserialize, Serialize};

use super::{LabeledVector, MlError, Model, Severity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub example_id: String,
    pub truth: Severity,
    pub predicted: Severity,
}

/// Accuracy and confusion matrix of a model on one partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub size: usize,
    pub accuracy: f64,
    /// `confusion[truth][predicted]`, classes ordered mild then severe.
    pub confusion: [[usize; 2]; 2],
    /// Mild examples predicted severe, the dominant error direction to watch.
    pub mild_predicted_severe: usize,
    pub predictions: Vec<PredictionRecord>,
}

impl EvalReport {
    pub fn correct(&self) -> usize {
        self.confusion[0][0] + self.confusion[1][1]
    }
}

pub fn evaluate(model: &Model, partition: &[LabeledVector]) -> Result<EvalReport, MlError> {
    if partition.is_empty() {
        return Err(MlError::EmptyPartition);
    }
    let mut confusion = [[0usize; 2]; 2];
    let mut predictions = Vec::with_capacity(partition.len());
    for row in partition {
        let predicted = model.predict(&row.features)?;
        confusion[row.label.index()][predicted.index()] += 1;
        predictions.push(PredictionRecord {
            example_id: row.example_id.clone(),
            truth: row.label,
            predicted,
        });
    }
    let correct = confusion[0][0] + confusion[1][1];
    Ok(EvalReport {
        size: partition.len(),
        accuracy: correct as f64 / partition.len() as f64,
        confusion,
        mild_predicted_severe: confusion[0][1],
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::{DecisionTree, TreeNode};

    fn rows() -> Vec<LabeledVector> {
        [(0.1, Severity::Mild), (0.2, Severity::Mild), (0.8, Severity::Severe), (0.9, Severity::Severe)]
            .iter()
            .enumerate()
            .map(|(i, &(x, label))| LabeledVector {
                example_id: format!("e{i}"),
                label,
                hu: 0.5,
                features: vec![x],
            })
            .collect()
    }

    fn stump() -> Model {
        Model::DecisionTree(DecisionTree {
            n_features: 1,
            root: TreeNode::Split {
                feature: 0,
                threshold: 0.5,
                left: Box::new(TreeNode::Leaf { class: Severity::Mild, counts: [2, 0] }),
                right: Box::new(TreeNode::Leaf { class: Severity::Severe, counts: [0, 2] }),
            },
        })
    }

    #[test]
    fn perfect_model() {
        let r = evaluate(&stump(), &rows()).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.confusion, [[2, 0], [0, 2]]);
        assert_eq!(r.mild_predicted_severe, 0);
        assert_eq!(stump().predict(&[0.3]).unwrap(), Severity::Mild);
    }

    #[test]
    fn constant_severe_on_balanced_data() {
        let model = Model::DecisionTree(DecisionTree {
            n_features: 1,
            root: TreeNode::Leaf { class: Severity::Severe, counts: [1, 1] },
        });
        let r = evaluate(&model, &rows()).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.confusion, [[0, 2], [0, 2]]);
        assert_eq!(r.mild_predicted_severe, 2);
        assert_eq!(r.correct() as f64 / r.size as f64, r.accuracy);
    }

    #[test]
    fn row_order_only_changes_prediction_order() {
        let mut rev = rows();
        rev.reverse();
        let a = evaluate(&stump(), &rows()).unwrap();
        let b = evaluate(&stump(), &rev).unwrap();
        assert_eq!((a.accuracy, a.confusion), (b.accuracy, b.confusion));
        let mut pa = a.predictions.clone();
        pa.reverse();
        assert_eq!(pa, b.predictions);
    }

    #[test]
    fn empty_partition_is_an_error() {
        assert_eq!(evaluate(&stump(), &[]), Err(MlError::EmptyPartition));
    }
}
