//! File emission: atomic writes, commented CSV, JSON tables, and exact
//! complex-matrix serialization.

use crate::{CliError, CliResult, Format};
use otom_core::tensor::{c, ComplexMatrix};
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Convention notes stamped into every artifact.
pub fn conventions() -> Value {
    json!({
        "log_base": 2,
        "heisenberg_butterfly": "Z_t = U_t^dagger (sigma_z on target) U_t",
        "entanglement_measure": "log-negativity",
        "wire_order": "a_i, b_o, b_i, c_o",
    })
}

/// Artifact identifier for metadata blocks.
pub fn artifact() -> String {
    format!("otom {}", env!("CARGO_PKG_VERSION"))
}

/// Write via a temp file in the destination directory plus a rename, so an
/// interrupted run never leaves a truncated artifact.
pub fn atomic_write(path: &Path, contents: &str) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or_else(|| Path::new(".")))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path)
        .map_err(|e| CliError::Runtime(format!("cannot persist {}: {}", path.display(), e.error)))?;
    Ok(())
}

/// One tabular artifact: metadata lines, a header, and stringly-typed rows.
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# {}\n", artifact()));
        for (k, v) in &self.meta {
            s.push_str(&format!("# {k}={v}\n"));
        }
        s.push_str(
            "# conventions: log base 2; Z_t = U_t^dagger (sigma_z on target) U_t; entanglement: log-negativity\n",
        );
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    fn to_json(&self) -> String {
        let meta: Value = json!({
            "artifact": artifact(),
            "parameters": Value::Object(
                self.meta
                    .iter()
                    .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                    .collect(),
            ),
            "conventions": conventions(),
        });
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                Value::Object(
                    self.columns
                        .iter()
                        .zip(row)
                        .map(|(col, cell)| {
                            // numbers stay numbers in JSON when they parse
                            let v = cell
                                .parse::<i64>()
                                .ok()
                                .map(|n| Value::Number(n.into()))
                                .or_else(|| {
                                    cell.parse::<f64>()
                                        .ok()
                                        .and_then(serde_json::Number::from_f64)
                                        .map(Value::Number)
                                })
                                .unwrap_or_else(|| Value::String(cell.clone()));
                            (col.to_string(), v)
                        })
                        .collect(),
                )
            })
            .collect();
        let doc = json!({ "metadata": meta, "rows": rows });
        let mut s = serde_json::to_string_pretty(&doc).expect("static structure");
        s.push('\n');
        s
    }

    /// Emit under `stem.csv` or `stem.json` according to the format.
    pub fn write(&self, out_dir: &Path, stem: &str, format: Format) -> CliResult<PathBuf> {
        let (name, contents) = match format {
            Format::Csv => (format!("{stem}.csv"), self.to_csv()),
            Format::Json => (format!("{stem}.json"), self.to_json()),
        };
        let path = out_dir.join(name);
        atomic_write(&path, &contents)?;
        Ok(path)
    }
}

/// Render a complex matrix as JSON with a metadata block. Entries are
/// `[re, im]` pairs printed with 17 significant digits, so reading them back
/// reproduces the doubles bit for bit.
pub fn render_matrix_json(metadata: &Value, m: &ComplexMatrix) -> String {
    let mut s = String::new();
    s.push_str("{\n\"metadata\": ");
    s.push_str(&serde_json::to_string_pretty(metadata).expect("metadata serializes"));
    s.push_str(",\n\"matrix\": [\n");
    for r in 0..m.rows {
        s.push_str("  [");
        for col in 0..m.cols {
            let z = m.at(r, col);
            s.push_str(&format!("[{:.16e},{:.16e}]", z.re, z.im));
            if col + 1 < m.cols {
                s.push(',');
            }
        }
        s.push(']');
        if r + 1 < m.rows {
            s.push(',');
        }
        s.push('\n');
    }
    s.push_str("]\n}\n");
    s
}

/// Parse a matrix artifact back into its metadata and matrix.
pub fn parse_matrix_json(text: &str) -> CliResult<(Value, ComplexMatrix)> {
    let doc: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Runtime(format!("not valid JSON: {e}")))?;
    let metadata = doc
        .get("metadata")
        .cloned()
        .ok_or_else(|| CliError::Runtime("missing \"metadata\" block".into()))?;
    let rows = doc
        .get("matrix")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::Runtime("missing \"matrix\" array".into()))?;
    let n = rows.len();
    let mut m = ComplexMatrix::zeros(n, n);
    for (r, row) in rows.iter().enumerate() {
        let cells = row
            .as_array()
            .filter(|cells| cells.len() == n)
            .ok_or_else(|| CliError::Runtime(format!("matrix row {r} is not length {n}")))?;
        for (col, cell) in cells.iter().enumerate() {
            let pair = cell.as_array().filter(|p| p.len() == 2).ok_or_else(|| {
                CliError::Runtime(format!("entry ({r},{col}) is not an [re, im] pair"))
            })?;
            let re = pair[0]
                .as_f64()
                .ok_or_else(|| CliError::Runtime(format!("entry ({r},{col}): bad real part")))?;
            let im = pair[1]
                .as_f64()
                .ok_or_else(|| CliError::Runtime(format!("entry ({r},{col}): bad imag part")))?;
            m.set(r, col, c(re, im));
        }
    }
    Ok((metadata, m))
}
