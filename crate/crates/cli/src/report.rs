//! Report rendering: machine-readable `key = value` lines first, then an
//! aligned human table.
//!
//! Every float prints through the shortest-roundtrip formatter and each
//! value is formatted exactly once, so the machine lines and the table carry
//! identical full-precision strings. Report files contain no timing — same
//! inputs, same bytes.

use cura_core::{EvalMetrics, TrainReport};

use crate::ablate::{ranking, VariantOutcome};
use crate::run_config::Task;

#[derive(Debug, Clone, Copy)]
pub enum Align {
    Left,
    Right,
}

/// Render column-aligned rows under a header line. Cells are padded to the
/// widest entry of their column; two spaces separate columns.
pub fn aligned_table(columns: &[(&str, Align)], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = columns.iter().map(|(h, _)| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let mut render = |cells: Vec<String>| {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            match columns[i].1 {
                Align::Left => line.push_str(&format!("{cell:<w$}", w = widths[i])),
                Align::Right => line.push_str(&format!("{cell:>w$}", w = widths[i])),
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    };
    render(columns.iter().map(|(h, _)| h.to_string()).collect());
    for row in rows {
        render(row.clone());
    }
    out
}

/// Metric name/value pairs in fixed order, efficiency last.
pub fn metric_pairs(metrics: &EvalMetrics, efficiency: f64) -> Vec<(&'static str, String)> {
    let mut pairs = match metrics {
        EvalMetrics::Regression { mse, mae, r2 } => vec![
            ("mse", mse.to_string()),
            ("mae", mae.to_string()),
            ("r2", r2.to_string()),
        ],
        EvalMetrics::Classification { f1_macro } => {
            vec![("f1_macro", f1_macro.to_string())]
        }
    };
    pairs.push(("efficiency", efficiency.to_string()));
    pairs
}

fn headline_name(task: Task) -> &'static str {
    match task {
        Task::Forecast => "r2",
        Task::Classify => "f1_macro",
    }
}

fn headline_value(metrics: &EvalMetrics) -> String {
    match metrics {
        EvalMetrics::Regression { r2, .. } => r2.to_string(),
        EvalMetrics::Classification { f1_macro } => f1_macro.to_string(),
    }
}

/// The `key = value` head of a training report (no timing, no file paths).
pub fn train_lines(task: Task, report: &TrainReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("task = {task}\n"));
    out.push_str(&format!("params = {}\n", report.param_count));
    out.push_str(&format!("seed = {}\n", report.seed));
    out.push_str(&format!("epochs = {}\n", report.epoch_losses.len()));
    if let Some(last) = report.epoch_losses.last() {
        out.push_str(&format!("final_train_loss = {last}\n"));
    }
    for (k, v) in metric_pairs(&report.test_metrics, report.efficiency) {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

/// Full training report: the head lines plus the per-epoch loss table.
pub fn train_report_text(task: Task, report: &TrainReport) -> String {
    let mut out = train_lines(task, report);
    if !report.epoch_losses.is_empty() {
        out.push('\n');
        let rows: Vec<Vec<String>> = report
            .epoch_losses
            .iter()
            .enumerate()
            .map(|(i, loss)| vec![(i + 1).to_string(), loss.to_string()])
            .collect();
        out.push_str(&aligned_table(
            &[("epoch", Align::Right), ("loss", Align::Right)],
            &rows,
        ));
    }
    out
}

/// Evaluation report: machine lines, then the same values as a table.
pub fn eval_report_text(
    task: Task,
    windows: usize,
    params: usize,
    metrics: &EvalMetrics,
    efficiency: f64,
) -> String {
    let pairs = metric_pairs(metrics, efficiency);
    let mut out = String::new();
    out.push_str(&format!("task = {task}\n"));
    out.push_str(&format!("windows = {windows}\n"));
    out.push_str(&format!("params = {params}\n"));
    for (k, v) in &pairs {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out.push('\n');
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .map(|(k, v)| vec![k.to_string(), v.clone()])
        .collect();
    out.push_str(&aligned_table(
        &[("metric", Align::Left), ("value", Align::Right)],
        &rows,
    ));
    out
}

/// Sweep report: per-variant machine lines in sweep order, then the ranked
/// table, best headline metric first.
pub fn ablate_report_text(task: Task, seed: u64, outcomes: &[VariantOutcome]) -> String {
    let mut out = String::new();
    out.push_str(&format!("task = {task}\n"));
    out.push_str(&format!("seed = {seed}\n"));
    let epochs = outcomes
        .first()
        .map(|o| o.report.epoch_losses.len())
        .unwrap_or(0);
    out.push_str(&format!("epochs = {epochs}\n"));
    out.push_str(&format!("variants = {}\n\n", outcomes.len()));
    for o in outcomes {
        out.push_str(&format!("{}.axis = {}\n", o.name, o.axis));
        out.push_str(&format!("{}.params = {}\n", o.name, o.report.param_count));
        if let Some(last) = o.report.epoch_losses.last() {
            out.push_str(&format!("{}.final_train_loss = {last}\n", o.name));
        }
        for (k, v) in metric_pairs(&o.report.test_metrics, o.report.efficiency) {
            out.push_str(&format!("{}.{k} = {v}\n", o.name));
        }
    }
    out.push('\n');
    out.push_str(&ranked_table(task, outcomes));
    out
}

/// Just the ranked table of a sweep.
pub fn ranked_table(task: Task, outcomes: &[VariantOutcome]) -> String {
    let rows: Vec<Vec<String>> = ranking(outcomes)
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            let o = &outcomes[i];
            vec![
                (rank + 1).to_string(),
                o.name.to_string(),
                o.axis.to_string(),
                o.report.param_count.to_string(),
                headline_value(&o.report.test_metrics),
            ]
        })
        .collect();
    aligned_table(
        &[
            ("rank", Align::Right),
            ("variant", Align::Left),
            ("axis", Align::Left),
            ("params", Align::Right),
            (headline_name(task), Align::Right),
        ],
        &rows,
    )
}
