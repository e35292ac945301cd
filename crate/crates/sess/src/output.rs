//! JSON (and CSV) shapes for primary outputs. Field order is fixed by struct
//! declaration and floats print in shortest round-trip form, so identical
//! runs produce identical bytes.

use serde::{Deserialize, Serialize};

use sess_core::corpus::Pool;
use sess_core::oracle::PropertyReport;
use sess_core::selection::SelectionResult;
use sess_core::simharness::ComparisonTable;

/// Primary `select` output.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SelectionRecord {
    pub objective: String,
    pub k: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub selected_ids: Vec<String>,
    pub gains: Vec<f64>,
    pub objective_value: f64,
}

impl SelectionRecord {
    pub fn from_result(result: &SelectionResult, pool: &Pool) -> Self {
        SelectionRecord {
            objective: result.config.objective.as_str().to_string(),
            k: result.config.k,
            alpha: result.config.alpha,
            lambda: result.config.lambda,
            selected_ids: result
                .chosen
                .iter()
                .map(|&pos| pool.get(pos).expect("chosen position in range").id.clone())
                .collect(),
            gains: result.gains.clone(),
            objective_value: result.final_value,
        }
    }
}

/// One property-check report, as emitted by `verify`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PropertyRecord {
    pub check: String,
    pub objective: String,
    pub trials: usize,
    pub violations: usize,
    pub worst_violation: f64,
    pub seed: u64,
    pub tolerance: f64,
}

impl PropertyRecord {
    pub fn from_report(report: &PropertyReport) -> Self {
        PropertyRecord {
            check: report.check.as_str().to_string(),
            objective: report.family.as_str().to_string(),
            trials: report.trials,
            violations: report.violations,
            worst_violation: report.worst_violation,
            seed: report.seed,
            tolerance: report.tolerance,
        }
    }
}

/// Full `verify` output.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VerifyRecord {
    pub total_violations: usize,
    pub reports: Vec<PropertyRecord>,
}

/// One selector row of the `simulate` table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SelectorRow {
    pub selector: String,
    pub mean_full_accuracy: f64,
    pub stdev_full_accuracy: f64,
    pub mean_subset_accuracy: f64,
}

/// Full `simulate` output.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimulateRecord {
    pub pool_size: usize,
    pub dim: usize,
    pub budget: usize,
    pub repetitions: usize,
    pub steps: usize,
    pub candidates_per_step: usize,
    pub seed: u64,
    pub lambda: f64,
    pub rows: Vec<SelectorRow>,
}

impl SimulateRecord {
    pub fn from_table(table: &ComparisonTable) -> Self {
        SimulateRecord {
            pool_size: table.pool_size,
            dim: table.dim,
            budget: table.budget,
            repetitions: table.repetitions,
            steps: table.steps,
            candidates_per_step: table.candidates_per_step,
            seed: table.master_seed,
            lambda: table.lambda,
            rows: table
                .rows
                .iter()
                .map(|row| SelectorRow {
                    selector: row.selector.as_str().to_string(),
                    mean_full_accuracy: row.mean_full_accuracy,
                    stdev_full_accuracy: row.stdev_full_accuracy,
                    mean_subset_accuracy: row.mean_subset_accuracy,
                })
                .collect(),
        }
    }

    /// The same table as CSV. No field needs quoting: selectors are plain
    /// words and floats print without separators.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("selector,mean_full_accuracy,stdev_full_accuracy,mean_subset_accuracy\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.selector,
                row.mean_full_accuracy,
                row.stdev_full_accuracy,
                row.mean_subset_accuracy
            ));
        }
        out
    }
}

/// Pretty JSON with a trailing newline — the on-disk form of every primary
/// output.
pub fn to_json_bytes<T: Serialize>(value: &T) -> String {
    let mut json = serde_json::to_string_pretty(value).expect("output serializes");
    json.push('\n');
    json
}
