use std::fmt::Write as _;

use crate::engine::checkpoint::NamedTensor;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "epoch,train_loss_total,train_loss_a,train_loss_b,val_loss_b,val_accuracy";

/// One epoch of training curves.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub train_loss_total: f64,
    /// Absent without smart augmentation.
    pub train_loss_a: Option<f64>,
    pub train_loss_b: f64,
    pub val_loss_b: f64,
    pub val_accuracy: f64,
    pub test_accuracy_at_best: Option<f64>,
}

impl MetricsRecord {
    pub fn csv_row(&self) -> String {
        let a = self.train_loss_a.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{}",
            self.epoch, self.train_loss_total, a, self.train_loss_b, self.val_loss_b, self.val_accuracy
        )
    }
}

/// Full CSV text: header, one row per epoch, optional trailing test accuracy.
pub fn metrics_csv(records: &[MetricsRecord], test_accuracy: Option<f64>) -> String {
    let mut s = String::new();
    writeln!(s, "{CSV_HEADER}").unwrap();
    for r in records {
        writeln!(s, "{}", r.csv_row()).unwrap();
    }
    if let Some(acc) = test_accuracy {
        writeln!(s, "test_accuracy,{acc}").unwrap();
    }
    s
}

fn bad(line: usize, detail: impl std::fmt::Display) -> Error {
    Error::Format {
        what: "metrics CSV",
        detail: format!("line {line}: {detail}"),
    }
}

fn float(field: &str, line: usize, name: &str) -> Result<f64> {
    field.parse().map_err(|_| bad(line, format!("{name} `{field}` is not a number")))
}

/// Parses text written by [`metrics_csv`]. Requires at least one epoch row.
pub fn parse_metrics_csv(text: &str) -> Result<(Vec<MetricsRecord>, Option<f64>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        Some((n, h)) => return Err(bad(n, format!("expected header `{CSV_HEADER}`, got `{h}`"))),
        None => return Err(bad(1, "empty file")),
    }
    let mut records = Vec::new();
    let mut test_accuracy = None;
    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        if test_accuracy.is_some() {
            return Err(bad(n, "data after the test_accuracy line"));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields[0] == "test_accuracy" {
            if fields.len() != 2 {
                return Err(bad(n, "test_accuracy line needs exactly one value"));
            }
            test_accuracy = Some(float(fields[1], n, "test_accuracy")?);
            continue;
        }
        if fields.len() != 6 {
            return Err(bad(n, format!("expected 6 fields, got {}", fields.len())));
        }
        let epoch = fields[0]
            .parse()
            .map_err(|_| bad(n, format!("epoch `{}` is not an integer", fields[0])))?;
        records.push(MetricsRecord {
            epoch,
            train_loss_total: float(fields[1], n, "train_loss_total")?,
            train_loss_a: if fields[2].is_empty() {
                None
            } else {
                Some(float(fields[2], n, "train_loss_a")?)
            },
            train_loss_b: float(fields[3], n, "train_loss_b")?,
            val_loss_b: float(fields[4], n, "val_loss_b")?,
            val_accuracy: float(fields[5], n, "val_accuracy")?,
            test_accuracy_at_best: None,
        });
    }
    if records.is_empty() {
        return Err(bad(2, "no epoch rows"));
    }
    Ok((records, test_accuracy))
}

/// Keeps the Network B state of the epoch with the lowest validation loss.
#[derive(Clone, Debug)]
pub struct BestTracker {
    best_loss: f64,
    best_epoch: Option<usize>,
    snapshot: Vec<NamedTensor>,
    history: Vec<f64>,
}

impl BestTracker {
    /// Starts from the untrained state, which is used if no epoch ever runs.
    pub fn new(initial: Vec<NamedTensor>) -> Self {
        Self {
            best_loss: f64::INFINITY,
            best_epoch: None,
            snapshot: initial,
            history: Vec::new(),
        }
    }

    /// Records an epoch's validation loss; takes a snapshot on strict
    /// improvement. Returns whether it improved.
    pub fn observe(&mut self, epoch: usize, val_loss: f64, snapshot: impl FnOnce() -> Vec<NamedTensor>) -> bool {
        let improved = val_loss < self.best_loss;
        if improved {
            self.best_loss = val_loss;
            self.best_epoch = Some(epoch);
            self.snapshot = snapshot();
        }
        self.history.push(self.best_loss);
        improved
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn snapshot(&self) -> &[NamedTensor] {
        &self.snapshot
    }

    /// Best validation loss after each observed epoch.
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn into_parts(self) -> (f64, Option<usize>, Vec<NamedTensor>, Vec<f64>) {
        (self.best_loss, self.best_epoch, self.snapshot, self.history)
    }
}
