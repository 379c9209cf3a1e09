//! Number formatting and table writers. CSV uses '.' decimals, no grouping,
//! LF endings; JSON carries native numbers for machine consumption.

use std::fs;
use std::path::Path;

use gfvc::{Error, Result};

use crate::config::OutputCfg;

/// 12 significant digits; exact zero prints in the fixed form.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        "0.000000000000".to_string()
    } else {
        format!("{v:.11e}")
    }
}

pub fn write_table(cfg: &OutputCfg, columns: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let text = match cfg.format.as_str() {
        "csv" => {
            let mut s = columns.join(",");
            s.push('\n');
            for row in rows {
                let cells: Vec<String> = row.iter().map(|v| fmt_sig(*v)).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            s
        }
        "json" => {
            let doc = serde_json::json!({ "columns": columns, "rows": rows });
            let mut s = serde_json::to_string_pretty(&doc)
                .map_err(|e| Error::Usage(format!("cannot encode output: {e}")))?;
            s.push('\n');
            s
        }
        other => {
            return Err(Error::Usage(format!(
                "unknown output format {other:?}; expected csv or json"
            )))
        }
    };
    write_text(&cfg.path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display())))
}
