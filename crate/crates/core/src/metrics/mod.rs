//! Evaluation metrics and training-curve export.

mod history;
mod svg;

pub use history::{format_history, parse_history, read_history, write_history, HISTORY_HEADER};
pub use svg::{render_history_svg, write_history_svg};

use std::fmt;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::SequentialModel;
use crate::tensor::Scalar;
use crate::train::{argmax, sparse_ce_from_logits};

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        (0..self.classes).map(|p| self.get(class, p)).sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, class)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.counts.iter().max().map_or(1, |m| m.to_string().len()).max(2);
        write!(f, "{:>4}", "")?;
        for p in 0..self.classes {
            write!(f, " {p:>width$}")?;
        }
        writeln!(f)?;
        for t in 0..self.classes {
            write!(f, "{t:>4}")?;
            for p in 0..self.classes {
                write!(f, " {:>width$}", self.get(t, p))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn confusion(predictions: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "predictions vs labels",
            left: predictions.len(),
            right: labels.len(),
        });
    }
    let mut cm = ConfusionMatrix::new(classes);
    for (&p, &t) in predictions.iter().zip(labels) {
        for index in [p, t] {
            if index >= classes {
                return Err(Error::ClassOutOfRange { index, classes });
            }
        }
        cm.record(t, p);
    }
    Ok(cm)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MacroScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Classes with nonzero support, the ones the averages run over.
    pub classes_averaged: usize,
}

/// Precision and recall are 0 when their denominator is 0; F1 is 0 when both are.
pub fn class_scores(cm: &ConfusionMatrix) -> Vec<ClassScore> {
    (0..cm.classes())
        .map(|c| {
            let tp = cm.get(c, c) as f64;
            let predicted = cm.predicted(c) as f64;
            let support = cm.support(c);
            let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
            let recall = if support > 0 { tp / support as f64 } else { 0.0 };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassScore {
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect()
}

/// Unweighted means over classes that occur in the ground truth.
pub fn macro_scores(cm: &ConfusionMatrix) -> MacroScores {
    let scores: Vec<ClassScore> = class_scores(cm).into_iter().filter(|s| s.support > 0).collect();
    let n = scores.len();
    let mean = |f: fn(&ClassScore) -> f64| {
        if n == 0 {
            0.0
        } else {
            scores.iter().map(f).sum::<f64>() / n as f64
        }
    };
    MacroScores {
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        f1: mean(|s| s.f1),
        classes_averaged: n,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub samples: usize,
    pub accuracy: f64,
    pub mean_loss: f64,
    pub per_class: Vec<ClassScore>,
    pub macro_avg: MacroScores,
    pub confusion: ConfusionMatrix,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples            {}", self.samples)?;
        writeln!(f, "accuracy           {:.5}", self.accuracy)?;
        writeln!(f, "loss               {:.5}", self.mean_loss)?;
        writeln!(f, "precision (macro)  {:.5}", self.macro_avg.precision)?;
        writeln!(f, "recall (macro)     {:.5}", self.macro_avg.recall)?;
        writeln!(f, "f1 (macro)         {:.5}", self.macro_avg.f1)?;
        writeln!(f, "classes averaged   {}", self.macro_avg.classes_averaged)?;
        writeln!(f)?;
        writeln!(f, "class  precision  recall   f1       support")?;
        for (c, s) in self.per_class.iter().enumerate() {
            writeln!(
                f,
                "{c:>5}  {:.5}    {:.5}  {:.5}  {}",
                s.precision, s.recall, s.f1, s.support
            )?;
        }
        Ok(())
    }
}

/// Inference-mode evaluation: argmax predictions, mean cross-entropy, confusion
/// matrix and per-class/macro scores.
pub fn evaluate<T: Scalar>(model: &SequentialModel<T>, dataset: &Dataset) -> Result<EvalReport> {
    const CHUNK: usize = 256;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = model.num_classes();
    let idx: Vec<usize> = (0..dataset.len()).collect();
    let mut predictions = Vec::with_capacity(dataset.len());
    let mut loss_sum = 0.0;
    for chunk in idx.chunks(CHUNK) {
        let (x, y) = dataset.batch::<T>(chunk)?;
        let logits = model.forward_logits(&x)?;
        loss_sum += sparse_ce_from_logits(&logits, &y)?.0 * chunk.len() as f64;
        predictions.extend(logits.data().chunks(k).map(argmax));
    }
    let cm = confusion(&predictions, dataset.labels(), k)?;
    Ok(EvalReport {
        samples: dataset.len(),
        accuracy: cm.accuracy(),
        mean_loss: loss_sum / dataset.len() as f64,
        per_class: class_scores(&cm),
        macro_avg: macro_scores(&cm),
        confusion: cm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions() {
        let labels = [0, 1, 2, 2, 1];
        let cm = confusion(&labels, &labels, 3).unwrap();
        assert_eq!(cm.trace(), 5);
        let m = macro_scores(&cm);
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_computed_three_class_fixture() {
        // truth:     0 0 1 1 2 2
        // predicted: 0 1 1 1 2 0
        let truth = [0, 0, 1, 1, 2, 2];
        let pred = [0, 1, 1, 1, 2, 0];
        let cm = confusion(&pred, &truth, 3).unwrap();
        let want = [[1, 1, 0], [0, 2, 0], [1, 0, 1]];
        for t in 0..3 {
            for p in 0..3 {
                assert_eq!(cm.get(t, p), want[t][p], "cell ({t},{p})");
            }
        }
        let s = class_scores(&cm);
        // class 0: tp 1, predicted 2, support 2
        assert_eq!((s[0].precision, s[0].recall, s[0].f1), (0.5, 0.5, 0.5));
        // class 1: tp 2, predicted 3, support 2 → p 2/3, r 1, f1 0.8
        assert!((s[1].precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s[1].recall, 1.0);
        assert!((s[1].f1 - 0.8).abs() < 1e-15);
        // class 2: tp 1, predicted 1, support 2 → p 1, r 0.5, f1 2/3
        assert_eq!((s[2].precision, s[2].recall), (1.0, 0.5));
        assert!((s[2].f1 - 2.0 / 3.0).abs() < 1e-15);
        let m = macro_scores(&cm);
        assert!((m.precision - (0.5 + 2.0 / 3.0 + 1.0) / 3.0).abs() < 1e-15);
        assert!((m.recall - (0.5 + 1.0 + 0.5) / 3.0).abs() < 1e-15);
        assert!((m.f1 - (0.5 + 0.8 + 2.0 / 3.0) / 3.0).abs() < 1e-15);
        assert_eq!(cm.accuracy(), 4.0 / 6.0);
    }

    #[test]
    fn absent_class_excluded_from_macro() {
        let truth = [0, 1, 0, 1];
        let pred = [0, 1, 1, 1];
        let cm = confusion(&pred, &truth, 3).unwrap();
        let m = macro_scores(&cm);
        assert_eq!(m.classes_averaged, 2);
        let s = class_scores(&cm);
        assert!((m.precision - (s[0].precision + s[1].precision) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn predicted_but_unsupported_class_counts_as_false_positive_only() {
        let cm = confusion(&[2, 0], &[0, 0], 3).unwrap();
        let m = macro_scores(&cm);
        assert_eq!(m.classes_averaged, 1);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.5);
    }

    #[test]
    fn constant_class_zero_predictor_on_balanced_set() {
        let truth: Vec<usize> = (0..240).map(|i| i % 24).collect();
        let cm = confusion(&vec![0; 240], &truth, 24).unwrap();
        assert!((cm.accuracy() - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(confusion(&[0], &[0, 1], 2), Err(Error::LengthMismatch { .. })));
        assert!(matches!(
            confusion(&[0, 5], &[0, 1], 2),
            Err(Error::ClassOutOfRange { index: 5, classes: 2 })
        ));
    }

    fn pairs() -> impl Strategy<Value = Vec<(usize, usize)>> {
        proptest::collection::vec((0usize..5, 0usize..5), 1..60)
    }

    proptest! {
        #[test]
        fn trace_over_total_is_accuracy(p in pairs()) {
            let (pred, truth): (Vec<_>, Vec<_>) = p.into_iter().unzip();
            let cm = confusion(&pred, &truth, 5).unwrap();
            let hits = pred.iter().zip(&truth).filter(|(a, b)| a == b).count();
            prop_assert_eq!(cm.accuracy(), hits as f64 / pred.len() as f64);
        }

        #[test]
        fn support_weighted_recall_is_accuracy(p in pairs()) {
            let (pred, truth): (Vec<_>, Vec<_>) = p.into_iter().unzip();
            let cm = confusion(&pred, &truth, 5).unwrap();
            let weighted: f64 = class_scores(&cm)
                .iter()
                .map(|s| s.recall * s.support as f64)
                .sum::<f64>() / cm.total() as f64;
            prop_assert!((weighted - cm.accuracy()).abs() < 1e-12);
        }

        #[test]
        fn macro_scores_permutation_invariant(p in pairs(), shift in 1usize..5) {
            let (pred, truth): (Vec<_>, Vec<_>) = p.into_iter().unzip();
            let relabel = |v: &[usize]| v.iter().map(|&c| (c + shift) % 5).collect::<Vec<_>>();
            let a = macro_scores(&confusion(&pred, &truth, 5).unwrap());
            let b = macro_scores(&confusion(&relabel(&pred), &relabel(&truth), 5).unwrap());
            prop_assert!((a.precision - b.precision).abs() < 1e-12);
            prop_assert!((a.recall - b.recall).abs() < 1e-12);
            prop_assert!((a.f1 - b.f1).abs() < 1e-12);
        }
    }
}
