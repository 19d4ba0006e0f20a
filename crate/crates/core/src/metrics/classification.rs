use serde::Serialize;

use crate::error::{Error, Result};

/// Square count grid, rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        Self { counts: vec![vec![0; classes]; classes] }
    }

    pub fn from_rows(counts: Vec<Vec<u64>>) -> Self {
        Self { counts }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!("{} predictions vs {} labels", preds.len(), labels.len())));
    }
    let mut m = ConfusionMatrix::zeros(classes);
    for (&p, &t) in preds.iter().zip(labels) {
        if p >= classes || t >= classes {
            return Err(Error::DimensionMismatch(format!("class index out of range ({t}, {p}) for {classes} classes")));
        }
        m.counts[t][p] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroMetrics {
    /// Unweighted mean of per-class precision.
    pub precision: f64,
    /// Unweighted mean of per-class recall.
    pub recall: f64,
    /// Harmonic mean of the macro precision and macro recall.
    pub f1: f64,
    /// Unweighted mean of per-class F1.
    pub mean_class_f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Macro-averaged precision, recall and F1. Zero denominators count as 0,
/// and every class contributes to the mean, present or not.
pub fn macro_metrics(m: &ConfusionMatrix) -> MacroMetrics {
    let n = m.classes();
    let per_class: Vec<ClassMetrics> = (0..n)
        .map(|c| {
            let tp = m.counts[c][c];
            let precision = ratio(tp, m.col_sum(c));
            let recall = ratio(tp, m.row_sum(c));
            ClassMetrics { precision, recall, f1: harmonic(precision, recall) }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| if n == 0 { 0.0 } else { per_class.iter().map(f).sum::<f64>() / n as f64 };
    let precision = mean(|c| c.precision);
    let recall = mean(|c| c.recall);
    MacroMetrics { precision, recall, f1: harmonic(precision, recall), mean_class_f1: mean(|c| c.f1), per_class }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let m = confusion(&[0, 1, 2, 3, 2], &[0, 1, 2, 3, 2], 4).unwrap();
        assert_eq!(m.counts[2][2], 2);
        assert_eq!(m.total(), 5);
        let mm = macro_metrics(&m);
        assert_eq!((mm.precision, mm.recall, mm.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn direct_counts() {
        let m = confusion(&[0, 1, 1], &[0, 0, 1], 4).unwrap();
        assert_eq!(m.counts[0][0], 1);
        assert_eq!(m.counts[0][1], 1);
        assert_eq!(m.counts[1][1], 1);
        assert_eq!(m.total(), 3);
        assert_eq!(confusion(&[], &[], 4).unwrap(), ConfusionMatrix::zeros(4));
        assert!(confusion(&[0], &[], 4).is_err());
    }

    #[test]
    fn embedded_two_class_example() {
        let m =
            ConfusionMatrix::from_rows(vec![vec![5, 5, 0, 0], vec![0, 10, 0, 0], vec![0, 0, 10, 0], vec![0, 0, 0, 10]]);
        let mm = macro_metrics(&m);
        assert_eq!(mm.per_class[1].precision, 10.0 / 15.0);
        assert_eq!(mm.per_class[0].recall, 0.5);
        assert!((mm.precision - 11.0 / 12.0).abs() < 1e-15);
        assert!((mm.recall - 0.875).abs() < 1e-15);
    }

    #[test]
    fn absent_class_counts_as_zero() {
        let m = confusion(&[0, 1, 2], &[0, 1, 2], 4).unwrap();
        let mm = macro_metrics(&m);
        assert_eq!(mm.per_class[3], ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0 });
        assert_eq!(mm.precision, 0.75);
        assert_eq!(mm.mean_class_f1, 0.75);
    }
}
