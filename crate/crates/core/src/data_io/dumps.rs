use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::eigen_graph::{EigenDescriptorSet, NeighborGraph, NeighborRows};
use crate::error::{Error, Result};

/// CSV with a `# {json}` header line, then `index,l1,l2,l3[,eig_nbr_0..]`.
pub fn descriptors_csv(header: &Value, descriptors: &EigenDescriptorSet, eigen: Option<&NeighborRows>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {header}");
    out.push_str("index,l1,l2,l3");
    if let Some(rows) = eigen {
        for j in 0..rows.k() {
            let _ = write!(out, ",eig_nbr_{j}");
        }
    }
    out.push('\n');
    for (i, l) in descriptors.lambdas.iter().enumerate() {
        let _ = write!(out, "{i},{:?},{:?},{:?}", l[0], l[1], l[2]);
        if let Some(rows) = eigen {
            for j in rows.row(i) {
                let _ = write!(out, ",{j}");
            }
        }
        out.push('\n');
    }
    out
}

/// JSON lines: a `{"header": ...}` record, then one record per point.
pub fn descriptors_jsonl(header: &Value, descriptors: &EigenDescriptorSet, eigen: Option<&NeighborRows>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", json!({ "header": header }));
    for (i, l) in descriptors.lambdas.iter().enumerate() {
        let mut rec = json!({ "index": i, "lambda": l });
        if let Some(rows) = eigen {
            rec["eigen_idx"] = json!(rows.row(i));
        }
        let _ = writeln!(out, "{rec}");
    }
    out
}

/// Both neighbor sets of every anchor, one JSON record per anchor.
pub fn graph_jsonl(header: &Value, descriptors: &EigenDescriptorSet, graph: &NeighborGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", json!({ "header": header }));
    for (i, l) in descriptors.lambdas.iter().enumerate() {
        let rec = json!({
            "index": i,
            "lambda": l,
            "euclid_idx": graph.euclid.row(i),
            "eigen_idx": graph.eigen.row(i),
        });
        let _ = writeln!(out, "{rec}");
    }
    out
}

/// Appends JSON records to a file, header first, flushing each line.
pub struct JsonlLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonlLog {
    pub fn create(path: impl AsRef<Path>, header: &Value) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut log = Self {
            path,
            out: BufWriter::new(file),
        };
        log.write_value(&json!({ "header": header }))?;
        Ok(log)
    }

    pub fn record<T: Serialize>(&mut self, record: &T) -> Result<()> {
        self.write_value(&serde_json::to_value(record)?)
    }

    fn write_value(&mut self, v: &Value) -> Result<()> {
        writeln!(self.out, "{v}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (EigenDescriptorSet, NeighborRows) {
        let d = EigenDescriptorSet {
            lambdas: vec![[0.5, 0.25, 0.0], [1.0, 0.1, 1e-17]],
            vectors: None,
        };
        (d, NeighborRows::from_flat(1, vec![1, 0]).unwrap())
    }

    #[test]
    fn csv_layout() {
        let (d, rows) = sample();
        let text = descriptors_csv(&json!({"k1": 20}), &d, Some(&rows));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# {\"k1\":20}");
        assert_eq!(lines[1], "index,l1,l2,l3,eig_nbr_0");
        assert_eq!(lines[3], "1,1.0,0.1,1e-17,0");
        let plain = descriptors_csv(&json!({}), &d, None);
        assert_eq!(plain.lines().nth(2), Some("0,0.5,0.25,0.0"));
    }

    #[test]
    fn jsonl_records() {
        let (d, rows) = sample();
        let g = NeighborGraph {
            euclid: rows.clone(),
            eigen: rows,
        };
        let text = graph_jsonl(&json!({"seed": 1}), &d, &g);
        let recs: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(recs[0]["header"]["seed"], 1);
        assert_eq!(recs[2]["eigen_idx"], json!([0]));
        assert_eq!(recs[2]["lambda"][2].as_f64(), Some(1e-17));
    }

    #[test]
    fn log_writes_header_then_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let mut log = JsonlLog::create(&path, &json!({"run": "x"})).unwrap();
        log.record(&json!({"epoch": 1})).unwrap();
        drop(log);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "{\"header\":{\"run\":\"x\"}}\n{\"epoch\":1}\n");
    }
}
