use std::fmt::Write;

use super::experiment::Summary;

/// Plain-text grid: one row per (dimension, metric), one column per system,
/// cells formatted `mean ± spread`.
pub fn summary_table(columns: &[&str], rows: &[(String, Vec<Option<Summary>>)]) -> String {
    let label_w = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0).max(6);
    let cell = |s: &Option<Summary>| match s {
        Some(s) => format!("{:.3} ± {:.3}", s.mean, s.spread),
        None => "undefined".to_string(),
    };
    let col_w = columns
        .iter()
        .map(|c| c.chars().count())
        .chain(rows.iter().flat_map(|(_, v)| v.iter().map(|s| cell(s).chars().count())))
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let _ = write!(out, "{:label_w$}", "");
    for c in columns {
        let _ = write!(out, "  {c:>col_w$}");
    }
    out.push('\n');
    for (label, cells) in rows {
        let _ = write!(out, "{label:label_w$}");
        for s in cells {
            let _ = write!(out, "  {:>col_w$}", cell(s));
        }
        out.push('\n');
    }
    out
}
