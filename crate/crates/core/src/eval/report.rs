use std::path::Path;

use super::metrics::EvalReport;
use crate::error::{Error, Result};

pub fn load_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn save_report(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(report).map_err(|e| Error::Data(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// One row per report: name, protocol, init, accuracy, error.
pub fn render_csv(reports: &[EvalReport]) -> String {
    let mut s = String::from("name,protocol,encoder_init,accuracy_percent,azimuth_error_deg,error_statistic,labeled_hours,n_test,seed\n");
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{:.2},{:.2},{},{:.4},{},{}\n",
            r.name.replace(',', ";"),
            r.protocol,
            r.encoder_init,
            r.accuracy_percent,
            r.azimuth_error_deg,
            r.error_statistic,
            r.labeled_hours,
            r.n_test,
            r.seed
        ));
    }
    s
}

/// Markdown table with one row per method and Accuracy% / Error° columns.
pub fn render_markdown(reports: &[EvalReport]) -> String {
    let mut s = String::from("| Method | Protocol | Accuracy% | Error° |\n|---|---|---:|---:|\n");
    for r in reports {
        s.push_str(&format!(
            "| {} | {} | {:.1} | {:.1} |\n",
            r.name.replace('|', "/"),
            r.protocol,
            r.accuracy_percent,
            r.azimuth_error_deg
        ));
    }
    let stats: Vec<&str> = reports.iter().map(|r| r.error_statistic.as_str()).collect();
    if let Some(first) = stats.first() {
        if stats.iter().all(|s| s == first) {
            s.push_str(&format!("\nError° is the {first} absolute azimuth error over the test set.\n"));
        }
    }
    s
}

/// Accuracy and error against labeled hours, sorted by init then hours.
pub fn render_curve_csv(reports: &[EvalReport]) -> String {
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by(|a, b| a.encoder_init.cmp(&b.encoder_init).then(a.labeled_hours.total_cmp(&b.labeled_hours)).then(a.seed.cmp(&b.seed)));
    let mut s = String::from("encoder_init,labeled_hours,seed,accuracy_percent,azimuth_error_deg\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:.4},{},{:.2},{:.2}\n",
            r.encoder_init, r.labeled_hours, r.seed, r.accuracy_percent, r.azimuth_error_deg
        ));
    }
    s
}
