//! One-vs-rest classification metrics over the four rhythm classes.

use std::fmt::Write as _;

use log::warn;
use serde::Serialize;

use crate::ecg::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassRow {
    pub label: Label,
    pub support: usize,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverallRow {
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub classes: Vec<ClassRow>,
    /// Unweighted means over classes with a defined value.
    pub overall: OverallRow,
    pub accuracy: f64,
    /// `confusion[truth][prediction]`.
    pub confusion: [[usize; 4]; 4],
    pub warnings: Vec<String>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> f64 {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 }
}

pub fn classification_metrics(predictions: &[Label], truths: &[Label]) -> Result<ClassMetrics> {
    if predictions.len() != truths.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", predictions.len(), truths.len())));
    }
    if truths.is_empty() {
        return Err(Error::EmptyTensor);
    }
    let mut confusion = [[0usize; 4]; 4];
    for (p, t) in predictions.iter().zip(truths) {
        confusion[t.index()][p.index()] += 1;
    }
    let n = truths.len();
    let mut warnings = Vec::new();
    let classes: Vec<ClassRow> = Label::ALL
        .iter()
        .map(|&label| {
            let c = label.index();
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = (0..4).map(|t| confusion[t][c]).sum();
            let (fn_, fp) = (support - tp, predicted - tp);
            let tn = n - tp - fn_ - fp;
            let sensitivity = ratio(tp, tp + fn_);
            if sensitivity.is_none() {
                let msg = format!("class {label} is absent from the labels; excluded from overall means");
                warn!("{msg}");
                warnings.push(msg);
            }
            ClassRow {
                label,
                support,
                sensitivity,
                specificity: ratio(tn, tn + fp),
                f1: if support == 0 { None } else { ratio(2 * tp, 2 * tp + fp + fn_) },
            }
        })
        .collect();
    let overall = OverallRow {
        sensitivity: mean_defined(classes.iter().map(|c| c.sensitivity)),
        specificity: mean_defined(classes.iter().filter(|c| c.support > 0).map(|c| c.specificity)),
        f1: mean_defined(classes.iter().map(|c| c.f1)),
    };
    let correct = (0..4).map(|c| confusion[c][c]).sum::<usize>();
    Ok(ClassMetrics { classes, overall, accuracy: correct as f64 / n as f64, confusion, warnings })
}

/// Unweighted mean of per-class F1 values.
pub fn overall_f1(per_class: &[f64]) -> f64 {
    per_class.iter().sum::<f64>() / per_class.len() as f64
}

impl ClassMetrics {
    pub fn to_table(&self) -> String {
        let cell = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
        let mut s = String::new();
        let _ = writeln!(s, "{:<8} {:>11} {:>11} {:>7} {:>8}", "class", "sensitivity", "specificity", "F1", "support");
        for c in &self.classes {
            let _ = writeln!(
                s,
                "{:<8} {:>11} {:>11} {:>7} {:>8}",
                c.label.to_string(),
                cell(c.sensitivity),
                cell(c.specificity),
                cell(c.f1),
                c.support
            );
        }
        let o = &self.overall;
        let _ = writeln!(s, "{:<8} {:>11.3} {:>11.3} {:>7.3}", "overall", o.sensitivity, o.specificity, o.f1);
        let _ = writeln!(s, "accuracy {:.3}", self.accuracy);
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn perfect() {
        let t = [Normal, AF, Other, Noise, Normal];
        let m = classification_metrics(&t, &t).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!((m.overall.f1, m.overall.sensitivity, m.overall.specificity), (1.0, 1.0, 1.0));
    }

    #[test]
    fn single_class_predictions() {
        let t = [Normal, AF, Other, Noise];
        let m = classification_metrics(&[AF; 4], &t).unwrap();
        assert_eq!(m.classes[1].sensitivity, Some(1.0));
        assert_eq!(m.classes[1].specificity, Some(0.0));
        assert_eq!(m.accuracy, 0.25);
    }

    #[test]
    fn hand_computed_confusion() {
        // truth N N N A A O, prediction N N A A O O
        let t = [Normal, Normal, Normal, AF, AF, Other];
        let p = [Normal, Normal, AF, AF, Other, Other];
        let m = classification_metrics(&p, &t).unwrap();
        let n = &m.classes[0];
        assert_eq!((n.sensitivity, n.specificity), (Some(2.0 / 3.0), Some(1.0)));
        assert!((n.f1.unwrap() - 0.8).abs() < 1e-12);
        let a = &m.classes[1];
        assert_eq!((a.sensitivity, a.specificity, a.f1), (Some(0.5), Some(0.75), Some(0.5)));
        let o = &m.classes[2];
        assert!((o.f1.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.classes[3].sensitivity, None);
        assert_eq!(m.warnings.len(), 1);
        assert!((m.overall.f1 - (0.8 + 0.5 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
        assert!((m.accuracy - 4.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn table_overall_rows() {
        assert!((overall_f1(&[0.920, 0.776, 0.777, 0.727]) - 0.800).abs() < 5e-4);
        assert!((overall_f1(&[0.936, 0.841, 0.832, 0.707]) - 0.829).abs() < 5e-4);
    }

    #[test]
    fn length_mismatch() {
        assert!(classification_metrics(&[Normal], &[]).is_err());
    }
}
