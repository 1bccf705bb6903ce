//! JSON and CSV emission.

use std::path::Path;

use clap::ValueEnum;
use serde_json::Value;

use wdnorm::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Non-finite values become the strings "inf", "-inf" and "nan", which the
/// library's loaders accept.
pub fn number(x: f64) -> Value {
    if x.is_nan() {
        Value::from("nan")
    } else if x.is_infinite() {
        Value::from(if x > 0.0 { "inf" } else { "-inf" })
    } else {
        Value::from(x)
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format!("{x:.16e}"),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        // nested values stay JSON, quoted for CSV
        other => format!("\"{}\"", other.to_string().replace('"', "\"\"")),
    }
}

/// Flat records become a header row and a value row.
pub fn to_csv(v: &Value) -> String {
    match v {
        Value::Object(m) => {
            let head: Vec<&str> = m.keys().map(String::as_str).collect();
            let row: Vec<String> = m.values().map(csv_cell).collect();
            format!("{}\n{}\n", head.join(","), row.join(","))
        }
        other => format!("{}\n", csv_cell(other)),
    }
}

pub fn emit(v: &Value, format: Format, out: Option<&Path>) -> wdnorm::Result<()> {
    let text = match format {
        Format::Json => format!("{}\n", serde_json::to_string(v)?),
        Format::Csv => to_csv(v),
    };
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
