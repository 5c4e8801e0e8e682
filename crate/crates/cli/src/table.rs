use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

/// Ordered rows with a versioned schema. Columns are only ever appended.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Per-row structured payload for the JSON form only.
    pub attachments: Vec<Option<Value>>,
}

impl Table {
    pub fn new(schema: &'static str, columns: Vec<&'static str>) -> Self {
        Self { schema, columns, rows: Vec::new(), attachments: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>, attachment: Option<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
        self.attachments.push(attachment);
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("#schema={}\n{}\n", self.schema, self.columns.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.iter().map(|c| escape(c)).collect::<Vec<_>>().join(","));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .zip(&self.attachments)
            .map(|(row, extra)| {
                let mut obj = Map::new();
                for (c, v) in self.columns.iter().zip(row) {
                    obj.insert(c.to_string(), if v.is_empty() { Value::Null } else { Value::String(v.clone()) });
                }
                if let Some(extra) = extra {
                    obj.insert("detail".into(), extra.clone());
                }
                Value::Object(obj)
            })
            .collect();
        json!({ "schema": self.schema, "columns": self.columns, "rows": rows })
    }

    /// Writes `<stem>.csv` and/or `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str, csv: bool, json: bool) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        if csv {
            let path = dir.join(format!("{stem}.csv"));
            std::fs::write(&path, self.to_csv()).with_context(|| format!("writing {}", path.display()))?;
        }
        if json {
            let path = dir.join(format!("{stem}.json"));
            let text = serde_json::to_string_pretty(&self.to_json())? + "\n";
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

fn escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Shortest decimal that reads back as the same `f64`; empty when absent.
pub fn fmt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:?}"),
        Some(x) if x.is_nan() => "nan".into(),
        Some(x) => if x > 0.0 { "inf" } else { "-inf" }.into(),
        None => String::new(),
    }
}

pub fn num(v: f64) -> String {
    fmt(Some(v))
}
