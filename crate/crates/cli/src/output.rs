//! Rendering: one table per run plus the embedded resolved config, unit
//! conventions, notes, and optional fit summaries. CSV carries the
//! metadata as a sorted `# key = value` comment block; JSON carries it as
//! objects. Both forms are byte-deterministic for a fixed config.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};

use crate::config::Format;
use crate::runner::RunError;

pub const SCHEMA: &str = "qaction/1";

/// Unit conventions every output embeds.
pub const CONVENTIONS: &[(&str, &str)] = &[
    ("hbar", "1"),
    ("log-base", "e"),
    ("time-unit", "inverse-energy"),
];

/// One table cell. Optional values render as empty CSV fields and JSON
/// nulls; non-finite floats render as "inf"/"-inf"/"nan" in CSV and null
/// in JSON.
#[derive(Debug, Clone)]
pub enum Field {
    Str(String),
    U64(u64),
    F64(f64),
    OptF64(Option<f64>),
    Bool(bool),
    Empty,
}

impl Field {
    fn csv_cell(&self) -> String {
        match self {
            Field::Str(s) => s.clone(),
            Field::U64(v) => v.to_string(),
            Field::F64(v) => fmt_f64(*v),
            Field::OptF64(Some(v)) => fmt_f64(*v),
            Field::OptF64(None) | Field::Empty => String::new(),
            Field::Bool(b) => b.to_string(),
        }
    }

    fn json_value(&self) -> Value {
        match self {
            Field::Str(s) => Value::String(s.clone()),
            Field::U64(v) => Value::Number((*v).into()),
            Field::F64(v) | Field::OptF64(Some(v)) => {
                Number::from_f64(*v).map_or(Value::Null, Value::Number)
            }
            Field::OptF64(None) | Field::Empty => Value::Null,
            Field::Bool(b) => Value::Bool(*b),
        }
    }
}

/// 17 significant digits: round-trips f64 exactly, so golden files stay
/// byte-stable across platforms that agree on the arithmetic.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_owned()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_owned() } else { "-inf".to_owned() }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug)]
pub struct Document {
    pub command: String,
    /// Fully resolved settings, echoed verbatim.
    pub config: Vec<(String, String)>,
    pub notes: Vec<String>,
    /// Fit summaries (sweeps only); insertion order is presentation order.
    pub fit: Vec<(String, Field)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Field>>,
}

impl Document {
    pub fn render(&self, format: Format) -> Result<Vec<u8>, RunError> {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    fn render_csv(&self) -> Result<Vec<u8>, RunError> {
        let mut head: Vec<u8> = Vec::new();
        let mut line = |k: &str, v: &str| writeln!(head, "# {k} = {v}").expect("vec write");
        line("schema", SCHEMA);
        line("command", &self.command);
        let mut config = self.config.clone();
        config.sort_by(|a, b| a.0.cmp(&b.0));
        for (k, v) in &config {
            line(&format!("config.{k}"), v);
        }
        for (k, v) in CONVENTIONS {
            line(&format!("convention.{k}"), v);
        }
        for (i, note) in self.notes.iter().enumerate() {
            line(&format!("note.{}", i + 1), note);
        }
        for (k, v) in &self.fit {
            line(&format!("fit.{k}"), &v.csv_cell());
        }

        let mut w = csv::Writer::from_writer(head);
        w.write_record(&self.columns)
            .map_err(|e| RunError::io(format!("csv write: {e}")))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Field::csv_cell).collect();
            w.write_record(&cells)
                .map_err(|e| RunError::io(format!("csv write: {e}")))?;
        }
        w.into_inner().map_err(|e| RunError::io(format!("csv flush: {e}")))
    }

    fn render_json(&self) -> Result<Vec<u8>, RunError> {
        let mut root = Map::new();
        root.insert("schema".into(), Value::String(SCHEMA.into()));
        root.insert("command".into(), Value::String(self.command.clone()));

        let mut config = Map::new();
        for (k, v) in &self.config {
            config.insert(k.clone(), Value::String(v.clone()));
        }
        root.insert("config".into(), Value::Object(config));

        let mut conventions = Map::new();
        for (k, v) in CONVENTIONS {
            conventions.insert((*k).into(), Value::String((*v).into()));
        }
        root.insert("conventions".into(), Value::Object(conventions));

        root.insert(
            "notes".into(),
            Value::Array(self.notes.iter().map(|n| Value::String(n.clone())).collect()),
        );

        if !self.fit.is_empty() {
            let mut fit = Map::new();
            for (k, v) in &self.fit {
                fit.insert(k.clone(), v.json_value());
            }
            root.insert("fit".into(), Value::Object(fit));
        }

        let mut results = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let mut obj = Map::new();
            for (col, field) in self.columns.iter().zip(row) {
                obj.insert(col.clone(), field.json_value());
            }
            results.push(Value::Object(obj));
        }
        root.insert("results".into(), Value::Array(results));

        let mut bytes = serde_json::to_vec_pretty(&Value::Object(root))
            .map_err(|e| RunError::io(format!("json write: {e}")))?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

/// Explicit absolute paths pass through; relative paths (and the default
/// `<command>.<format>` name) resolve against QACTION_OUT_DIR when set,
/// else the working directory.
pub fn resolve_out_path(out: &Option<PathBuf>, command: &str, format: Format) -> PathBuf {
    let base = std::env::var_os("QACTION_OUT_DIR").map(PathBuf::from);
    match out {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => base.unwrap_or_default().join(p),
        None => base
            .unwrap_or_else(|| PathBuf::from("."))
            .join(format!("{command}.{}", format.extension())),
    }
}

pub fn write_document(doc: &Document, format: Format, path: &Path) -> Result<(), RunError> {
    let bytes = doc.render(format)?;
    std::fs::write(path, bytes)
        .map_err(|e| RunError::io(format!("cannot write {}: {e}", path.display())))
}
