//! Confusion reports comparing relation-based classification with actual
//! behavior.

use crate::matcher::UNDECIDABLE;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfusionError {
    #[error("expected {expected} labels, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
}

/// Rows are actual behaviors, columns are relation-based classifications;
/// the undecidable column is kept separate from misclassifications.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub actual_labels: Vec<String>,
    pub classified_labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub misclassifications: u64,
    pub undecidable: u64,
}

impl ConfusionMatrix {
    pub fn flags_fail(&self) -> bool {
        self.misclassifications > 0
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("actual\\classified");
        for c in &self.classified_labels {
            out.push_str(&format!("\t{c}"));
        }
        out.push('\n');
        for (i, a) in self.actual_labels.iter().enumerate() {
            out.push_str(a);
            for v in &self.counts[i] {
                out.push_str(&format!("\t{v}"));
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "misclassifications: {} ({})\nundecidable: {}\n",
            self.misclassifications,
            if self.flags_fail() { "FAIL" } else { "ok" },
            self.undecidable,
        ));
        out
    }
}

/// Build the matrix from per-case (classified, actual) label lists.
pub fn confusion_report(
    classified: &[String],
    actual: &[String],
) -> Result<ConfusionMatrix, ConfusionError> {
    if classified.len() != actual.len() {
        return Err(ConfusionError::LengthMismatch {
            expected: actual.len(),
            actual: classified.len(),
        });
    }
    let actual_labels: Vec<String> = actual
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut classified_labels: Vec<String> = classified
        .iter()
        .filter(|l| l.as_str() != UNDECIDABLE)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    classified_labels.push(UNDECIDABLE.to_string());

    let mut counts = vec![vec![0u64; classified_labels.len()]; actual_labels.len()];
    let mut misclassifications = 0;
    let mut undecidable = 0;
    for (c, a) in classified.iter().zip(actual) {
        let row = actual_labels.iter().position(|l| l == a).unwrap();
        let col = classified_labels.iter().position(|l| l == c).unwrap();
        counts[row][col] += 1;
        if c == UNDECIDABLE {
            undecidable += 1;
        } else if c != a {
            misclassifications += 1;
        }
    }
    Ok(ConfusionMatrix {
        actual_labels,
        classified_labels,
        counts,
        misclassifications,
        undecidable,
    })
}
