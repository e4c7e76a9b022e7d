//! Plain-text rendering of command results for `--pretty`.

use std::fmt::Write as _;

use serde_json::Value;

/// Prints `value` as one JSON line, or as indented text and tables.
pub fn emit(value: &Value, pretty: bool) {
    if pretty {
        print!("{}", render(value));
    } else {
        println!("{value}");
    }
}

pub fn render(value: &Value) -> String {
    let mut out = String::new();
    block(&mut out, value, 0);
    out
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => {
                if f != 0.0 && (f.abs() < 1e-3 || f.abs() >= 1e6) {
                    format!("{f:.3e}")
                } else {
                    format!("{f:.4}")
                }
            }
            _ => n.to_string(),
        },
        Value::Bool(b) => b.to_string(),
        Value::Array(items) if items.iter().all(is_scalar) => {
            let parts: Vec<String> = items.iter().map(scalar).collect();
            format!("[{}]", parts.join(", "))
        }
        other => other.to_string(),
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Object(_) | Value::Array(_))
}

/// Rows of objects whose fields are all scalars (or scalar lists).
fn table_columns(items: &[Value]) -> Option<Vec<String>> {
    let mut cols: Vec<String> = Vec::new();
    for item in items {
        let obj = item.as_object()?;
        for (k, v) in obj {
            if !is_scalar(v) && !matches!(v, Value::Array(a) if a.iter().all(is_scalar)) {
                return None;
            }
            if !cols.contains(k) {
                cols.push(k.clone());
            }
        }
    }
    (!cols.is_empty()).then_some(cols)
}

fn table(out: &mut String, items: &[Value], cols: &[String], indent: usize) {
    let cells: Vec<Vec<String>> = items
        .iter()
        .map(|item| cols.iter().map(|c| item.get(c).map_or_else(String::new, scalar)).collect())
        .collect();
    let widths: Vec<usize> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| cells.iter().map(|r| r[j].len()).chain([c.len()]).max().unwrap_or(0))
        .collect();
    let pad = " ".repeat(indent);
    let line = |row: Vec<&str>| {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        format!("{pad}{}\n", cells.join("  ").trim_end())
    };
    out.push_str(&line(cols.iter().map(String::as_str).collect()));
    for r in &cells {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
}

fn block(out: &mut String, value: &Value, indent: usize) {
    let pad = " ".repeat(indent);
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                match v {
                    Value::Object(_) => {
                        let _ = writeln!(out, "{pad}{k}:");
                        block(out, v, indent + 2);
                    }
                    Value::Array(items) if !items.iter().all(is_scalar) => {
                        let _ = writeln!(out, "{pad}{k}:");
                        block(out, v, indent + 2);
                    }
                    _ => {
                        let _ = writeln!(out, "{pad}{k}: {}", scalar(v));
                    }
                }
            }
        }
        Value::Array(items) => match table_columns(items) {
            Some(cols) => table(out, items, &cols, indent),
            None => {
                for item in items {
                    if is_scalar(item) || matches!(item, Value::Array(a) if a.iter().all(is_scalar)) {
                        let _ = writeln!(out, "{pad}- {}", scalar(item));
                    } else {
                        let _ = writeln!(out, "{pad}-");
                        block(out, item, indent + 2);
                    }
                }
            }
        },
        v => {
            let _ = writeln!(out, "{pad}{}", scalar(v));
        }
    }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    #[test]
    fn rows_become_a_table() {
        let text = render(&json!({
            "protocols": ["z/z", "0/s"],
            "accuracy": [
                {"recipe": "xyz+eig+dist", "z/z": 1.0, "0/s": 0.6875},
                {"recipe": "eig", "z/z": 0.84, "0/s": 0.84},
            ],
        }));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "protocols: [z/z, 0/s]");
        assert_eq!(lines[1], "accuracy:");
        assert_eq!(lines[2], "  recipe        z/z     0/s");
        assert_eq!(lines[3], "  xyz+eig+dist  1.0000  0.6875");
    }

    #[test]
    fn nested_objects_indent() {
        let text = render(&json!({"header": {"k1": 20, "seed": null}, "tiny": 1.5e-7}));
        assert_eq!(text, "header:\n  k1: 20\n  seed: -\ntiny: 1.500e-7\n");
    }
}
