//! Precision, recall, and F1 from confusion counts, plus a confusion matrix
//! that writes out in the rows-actual / columns-predicted layout.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-class metrics. `zero_denominator` flags any metric forced to 0 by an
/// empty denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub zero_denominator: bool,
}

/// precision = TP/(TP+FP), recall = TP/(TP+FN), F1 = harmonic mean.
/// Counts may be rates; any zero denominator yields 0 with a flag.
pub fn prf(tp: f64, fp: f64, fn_: f64) -> ClassMetrics {
    let mut zero = false;
    let precision = if tp + fp > 0.0 {
        tp / (tp + fp)
    } else {
        zero = true;
        0.0
    };
    let recall = if tp + fn_ > 0.0 {
        tp / (tp + fn_)
    } else {
        zero = true;
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        zero = true;
        0.0
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        zero_denominator: zero,
    }
}

/// Support-weighted averages across classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Rows are actual classes, columns predicted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let n = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0.0; n]; n],
        }
    }

    /// Builds a matrix from (actual, predicted) label pairs; the class set
    /// is the union of both sides, sorted.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let pairs: Vec<(&str, &str)> = pairs.into_iter().collect();
        let classes: Vec<String> = pairs
            .iter()
            .flat_map(|&(a, p)| [a.to_string(), p.to_string()])
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<&str, usize> = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        let mut m = ConfusionMatrix::new(classes.clone());
        for (actual, predicted) in pairs {
            m.counts[index[actual]][index[predicted]] += 1.0;
        }
        m
    }

    pub fn add(&mut self, actual: usize, predicted: usize, count: f64) {
        self.counts[actual][predicted] += count;
    }

    pub fn per_class(&self) -> Vec<ClassMetrics> {
        let n = self.classes.len();
        (0..n)
            .map(|c| {
                let tp = self.counts[c][c];
                let fp: f64 = (0..n).filter(|&r| r != c).map(|r| self.counts[r][c]).sum();
                let fn_: f64 = (0..n).filter(|&p| p != c).map(|p| self.counts[c][p]).sum();
                prf(tp, fp, fn_)
            })
            .collect()
    }

    pub fn weighted(&self) -> WeightedMetrics {
        let per = self.per_class();
        let supports: Vec<f64> = self.counts.iter().map(|row| row.iter().sum()).collect();
        let total: f64 = supports.iter().sum();
        let correct: f64 = (0..self.classes.len()).map(|c| self.counts[c][c]).sum();
        if total == 0.0 {
            return WeightedMetrics {
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
                accuracy: 0.0,
            };
        }
        let weight = |f: fn(&ClassMetrics) -> f64| -> f64 {
            per.iter()
                .zip(&supports)
                .map(|(m, s)| f(m) * s)
                .sum::<f64>()
                / total
        };
        WeightedMetrics {
            precision: weight(|m| m.precision),
            recall: weight(|m| m.recall),
            f1: weight(|m| m.f1),
            accuracy: correct / total,
        }
    }

    /// Writes the matrix as TSV with row percentages (each row sums to 100).
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        write!(w, "actual\\predicted").map_err(|e| Error::io(path, e))?;
        for c in &self.classes {
            write!(w, "\t{c}").map_err(|e| Error::io(path, e))?;
        }
        writeln!(w).map_err(|e| Error::io(path, e))?;
        for (row_class, row) in self.classes.iter().zip(&self.counts) {
            let total: f64 = row.iter().sum();
            write!(w, "{row_class}").map_err(|e| Error::io(path, e))?;
            for v in row {
                let pct = if total > 0.0 { 100.0 * v / total } else { 0.0 };
                write!(w, "\t{pct:.1}").map_err(|e| Error::io(path, e))?;
            }
            writeln!(w).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detector_table_rates() {
        // TP 0.987, FP 0.022 -> precision ~0.979. The published rates are
        // three-decimal roundings, so the reproduced precision carries their
        // propagated rounding error (~0.0007) on top of its own half-ULP.
        let m = prf(0.987, 0.022, 0.013);
        assert!((m.precision - 0.979).abs() < 0.0015, "{}", m.precision);
        assert!((m.recall - 0.987).abs() < 0.0005);
    }

    #[test]
    fn perfect_classifier() {
        let m = prf(10.0, 0.0, 0.0);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.f1, 1.0);
        assert!(!m.zero_denominator);
    }

    #[test]
    fn f1_equals_p_when_p_equals_r() {
        let m = prf(8.0, 2.0, 2.0);
        assert!((m.f1 - m.precision).abs() < 1e-12);
        assert!((m.precision - m.recall).abs() < 1e-12);
    }

    #[test]
    fn zero_denominators_flagged() {
        let m = prf(0.0, 0.0, 0.0);
        assert_eq!(m.precision, 0.0);
        assert!(m.zero_denominator);
    }

    #[test]
    fn weighted_recall_is_accuracy() {
        let pairs = [
            ("a", "a"),
            ("a", "b"),
            ("a", "a"),
            ("b", "b"),
            ("b", "a"),
            ("c", "c"),
            ("c", "c"),
            ("c", "b"),
        ];
        let m = ConfusionMatrix::from_pairs(pairs.iter().copied());
        let w = m.weighted();
        assert!((w.recall - w.accuracy).abs() < 1e-12);
        assert!((w.accuracy - 5.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn tsv_rows_are_percentages() {
        let pairs = [("x", "x"), ("x", "y"), ("y", "y")];
        let m = ConfusionMatrix::from_pairs(pairs.iter().copied());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cm.tsv");
        m.write_tsv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "actual\\predicted\tx\ty");
        assert_eq!(lines[1], "x\t50.0\t50.0");
        assert_eq!(lines[2], "y\t0.0\t100.0");
    }
}
