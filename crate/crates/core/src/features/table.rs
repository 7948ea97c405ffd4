use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use super::extract::extract;
use super::kind::FeatureKind;
use crate::error::{Error, Result};
use crate::zoo::ZooCollection;

pub const TABLE_FORMAT_VERSION: u32 = 1;
const MAGIC_LINE: &str = "# weightzoo feature table v";

/// One feature vector per network plus its test accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub kind: FeatureKind,
    pub names: Vec<String>,
    pub model_ids: Vec<String>,
    /// Row-major, `n_rows * n_features`.
    values: Vec<f64>,
    pub targets: Vec<f64>,
    /// `key: value` pairs written as comment lines ahead of the header.
    pub metadata: Vec<(String, String)>,
}

impl FeatureTable {
    pub fn new(
        kind: FeatureKind,
        names: Vec<String>,
        model_ids: Vec<String>,
        values: Vec<f64>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        let n = model_ids.len();
        if targets.len() != n || values.len() != n * names.len() {
            return Err(Error::validation(format!(
                "table shape mismatch: {n} ids, {} targets, {} values for {} columns",
                targets.len(),
                values.len(),
                names.len()
            )));
        }
        if names.is_empty() {
            return Err(Error::validation("table has no feature columns"));
        }
        if let Some(i) = values.iter().chain(&targets).position(|v| !v.is_finite()) {
            let row = if i < values.len() { i / names.len() } else { i - values.len() };
            return Err(Error::validation(format!("non-finite value in row {row}")));
        }
        Ok(FeatureTable {
            kind,
            names,
            model_ids,
            values,
            targets,
            metadata: Vec::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_features())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// A table with the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> FeatureTable {
        let mut values = Vec::with_capacity(indices.len() * self.n_features());
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        FeatureTable {
            kind: self.kind.clone(),
            names: self.names.clone(),
            model_ids: indices.iter().map(|&i| self.model_ids[i].clone()).collect(),
            values,
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            metadata: self.metadata.clone(),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.metadata.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.metadata.push((key.to_string(), value)),
        }
    }

    /// CSV text: comment lines, `model_id,<names>,target`, one row per network.
    ///
    /// Features carry 9 significant digits, enough to restore any `f32`
    /// parameter exactly. Targets use the shortest exact representation.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC_LINE}{TABLE_FORMAT_VERSION}");
        let _ = writeln!(out, "# kind: {}", self.kind);
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {}", v.replace('\n', " "));
        }
        out.push_str("model_id");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push_str(",target\n");
        for (i, row) in self.rows().enumerate() {
            out.push_str(&self.model_ids[i]);
            for v in row {
                let _ = write!(out, ",{v:.8e}");
            }
            let _ = writeln!(out, ",{:e}", self.targets[i]);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut metadata = Vec::new();
        let mut lines = text.lines().enumerate().peekable();
        while let Some((_, line)) = lines.next_if(|(_, l)| l.starts_with('#')) {
            if let Some(v) = line.strip_prefix(MAGIC_LINE) {
                if v.trim() != TABLE_FORMAT_VERSION.to_string() {
                    return Err(Error::Version(format!(
                        "feature table format {} (supported: {TABLE_FORMAT_VERSION})",
                        v.trim()
                    )));
                }
                continue;
            }
            let body = line.trim_start_matches('#').trim_start();
            if let Some((k, v)) = body.split_once(": ") {
                if k == "kind" {
                    kind = Some(v.parse::<FeatureKind>()?);
                } else {
                    metadata.push((k.to_string(), v.to_string()));
                }
            }
        }
        let kind = kind.ok_or_else(|| Error::parse("feature table lacks a '# kind:' line"))?;
        let (_, header) = lines.next().ok_or_else(|| Error::parse("feature table has no header"))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols[0] != "model_id" || cols[cols.len() - 1] != "target" {
            return Err(Error::parse("feature table header must be model_id,<features>,target"));
        }
        let names: Vec<String> = cols[1..cols.len() - 1].iter().map(|s| s.to_string()).collect();
        let mut model_ids = Vec::new();
        let mut values = Vec::new();
        let mut targets = Vec::new();
        for (ln, line) in lines {
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != cols.len() {
                return Err(Error::parse(format!(
                    "line {}: {} cells, expected {}",
                    ln + 1,
                    cells.len(),
                    cols.len()
                )));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(format!("line {}: bad number {s:?}", ln + 1)))
            };
            model_ids.push(cells[0].to_string());
            for c in &cells[1..cells.len() - 1] {
                values.push(num(c)?);
            }
            targets.push(num(cells[cells.len() - 1])?);
        }
        let mut table = FeatureTable::new(kind, names, model_ids, values, targets)?;
        table.metadata = metadata;
        Ok(table)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Featurize every network of a zoo (or split); targets are test accuracies.
///
/// Rows follow the record order. Every record must be `ok`.
pub fn featurize_zoo(zoo: &ZooCollection, kind: &FeatureKind) -> Result<FeatureTable> {
    if zoo.is_empty() {
        return Err(Error::validation("cannot featurize an empty zoo"));
    }
    let rows: Vec<(Vec<String>, Vec<f64>, f64)> = zoo
        .records
        .par_iter()
        .map(|r| {
            let named = |e: Error| Error::validation(format!("{}: {e}", r.model_id));
            let target = match (r.is_ok(), r.test_accuracy()) {
                (true, Some(t)) => t,
                _ => return Err(named(Error::validation("record is not ok"))),
            };
            let params = zoo.params(r).map_err(named)?;
            let fv = extract(&params, kind, Some(&r.hyperparams)).map_err(named)?;
            Ok((fv.names, fv.values, target))
        })
        .collect::<Result<_>>()?;
    let names = rows[0].0.clone();
    let mut values = Vec::with_capacity(rows.len() * names.len());
    let mut targets = Vec::with_capacity(rows.len());
    for ((n, v, t), r) in rows.into_iter().zip(&zoo.records) {
        if n != names {
            return Err(Error::validation(format!("{}: feature names differ from the first row", r.model_id)));
        }
        values.extend(v);
        targets.push(t);
    }
    let ids = zoo.records.iter().map(|r| r.model_id.clone()).collect();
    let mut table = FeatureTable::new(kind.clone(), names, ids, values, targets)?;
    table.set_meta("dataset", zoo.meta.dataset.clone());
    table.set_meta("percentiles", "linear interpolation at q/100*(n-1)");
    table.set_meta("variance", "population");
    Ok(table)
}
