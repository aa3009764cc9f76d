//! Golden-file regression over a fixed configuration matrix: every mesh
//! generator × {zero, rotation} × two resolutions.
//!
//! Each case stores its exit code and the flattened report. Every numeric
//! field carries its own tolerance in the file, so a field can be loosened
//! by hand without touching the code.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hodge_dn::mesh::Shape;
use hodge_dn::witten::VectorFieldSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::pipeline::{execute, is_config_error};

#[derive(Clone, Debug)]
pub struct GoldenCase {
    pub shape: Shape,
    pub res: usize,
    pub field: VectorFieldSpec,
}

impl GoldenCase {
    pub fn name(&self) -> String {
        let f = match self.field {
            VectorFieldSpec::Zero => "zero",
            VectorFieldSpec::ProductRotation { .. } => "rotation",
        };
        format!("{}_r{}_{f}", self.shape, self.res)
    }

    pub fn config(&self) -> RunConfig {
        RunConfig::generated(self.shape, self.res, self.field)
    }
}

/// Two resolutions per generator, chosen so the whole matrix runs in
/// seconds on one core.
pub fn resolutions(shape: Shape) -> [usize; 2] {
    match shape {
        Shape::Interval => [4, 8],
        Shape::Disk => [2, 3],
        Shape::Annulus => [4, 6],
        Shape::Square => [2, 3],
        Shape::SolidTorus => [3, 6],
        Shape::Ball => [1, 2],
    }
}

pub fn cases() -> Vec<GoldenCase> {
    let mut v = vec![];
    for shape in Shape::ALL {
        for field in [VectorFieldSpec::Zero, VectorFieldSpec::rotation(1.0)] {
            for res in resolutions(shape) {
                v.push(GoldenCase { shape, res, field });
            }
        }
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub value: Value,
    /// Absolute tolerance for numbers; ignored (exact match) otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenFile {
    pub case: String,
    pub exit: i32,
    pub fields: BTreeMap<String, Field>,
}

/// Default tolerance for a freshly recorded float.
fn default_tol(v: f64) -> f64 {
    1e-8f64.max(1e-6 * v.abs())
}

pub fn flatten(v: &Value, prefix: &str, out: &mut BTreeMap<String, Value>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(x, &p, out);
            }
        }
        Value::Array(a) => {
            if a.is_empty() {
                out.insert(prefix.to_string(), Value::Array(vec![]));
            }
            for (i, x) in a.iter().enumerate() {
                flatten(x, &format!("{prefix}[{i}]"), out);
            }
        }
        leaf => {
            out.insert(prefix.to_string(), leaf.clone());
        }
    }
}

/// Run one case: exit code as the CLI would report it, plus the flattened report.
pub fn record(case: &GoldenCase) -> GoldenFile {
    let (exit, fields) = match execute(case.config()) {
        Err(e) => (if is_config_error(&e) { 2 } else { 1 }, BTreeMap::new()),
        Ok((report, _)) => {
            let exit = if report.failures().is_empty() { 0 } else { 1 };
            let json = serde_json::to_value(&report).expect("report serialises");
            let mut flat = BTreeMap::new();
            flatten(&json, "", &mut flat);
            let fields = flat
                .into_iter()
                .map(|(k, value)| {
                    let tol = value.as_f64().filter(|_| value.is_f64()).map(default_tol);
                    (k, Field { value, tol })
                })
                .collect();
            (exit, fields)
        }
    };
    GoldenFile { case: case.name(), exit, fields }
}

/// Differences between a stored golden file and a fresh run.
pub fn compare(expected: &GoldenFile, actual: &GoldenFile) -> Vec<String> {
    let mut drift = vec![];
    if expected.exit != actual.exit {
        drift.push(format!("exit code {} → {}", expected.exit, actual.exit));
    }
    for (k, e) in &expected.fields {
        let Some(a) = actual.fields.get(k) else {
            drift.push(format!("{k}: missing"));
            continue;
        };
        let same = match (&e.value, &a.value, e.tol) {
            (Value::Number(x), Value::Number(y), Some(tol)) => (x.as_f64().unwrap() - y.as_f64().unwrap()).abs() <= tol,
            (x, y, _) => x == y,
        };
        if !same {
            drift.push(format!("{k}: {} → {}", e.value, a.value));
        }
    }
    for k in actual.fields.keys().filter(|k| !expected.fields.contains_key(*k)) {
        drift.push(format!("{k}: new field"));
    }
    drift
}

pub fn default_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub struct CaseResult {
    pub name: String,
    pub drift: Vec<String>,
}

/// Run the matrix (optionally filtered by a substring of the case name).
/// With `update`, rewrite the files instead of comparing; a missing file is
/// reported as drift otherwise.
pub fn run(dir: &Path, update: bool, filter: Option<&str>) -> std::io::Result<Vec<CaseResult>> {
    if update {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = vec![];
    for case in cases().into_iter().filter(|c| filter.is_none_or(|f| c.name().contains(f))) {
        let path = dir.join(format!("{}.json", case.name()));
        let fresh = record(&case);
        let drift = if update {
            let text = serde_json::to_string_pretty(&fresh).map_err(std::io::Error::other)?;
            std::fs::write(&path, text + "\n")?;
            vec![]
        } else {
            match std::fs::read_to_string(&path) {
                Ok(text) => {
                    let stored: GoldenFile = serde_json::from_str(&text).map_err(std::io::Error::other)?;
                    compare(&stored, &fresh)
                }
                Err(_) => vec![format!("no golden file at {}", path.display())],
            }
        };
        out.push(CaseResult { name: case.name(), drift });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn matrix_covers_generators_fields_and_two_resolutions() {
        let c = cases();
        assert_eq!(c.len(), Shape::ALL.len() * 2 * 2);
        let mut names: Vec<_> = c.iter().map(|c| c.name()).collect();
        names.dedup();
        assert_eq!(names.len(), c.len());
    }

    #[test]
    fn flatten_and_compare() {
        let mut flat = BTreeMap::new();
        flatten(&json!({"a": [1, 2.5], "b": {"c": "x"}, "e": []}), "", &mut flat);
        assert_eq!(flat.keys().cloned().collect::<Vec<_>>(), ["a[0]", "a[1]", "b.c", "e"]);
        let mk = |v: f64| GoldenFile {
            case: "t".into(),
            exit: 0,
            fields: [("x".to_string(), Field { value: json!(v), tol: Some(1e-3) })].into(),
        };
        assert!(compare(&mk(1.0), &mk(1.0005)).is_empty());
        assert_eq!(compare(&mk(1.0), &mk(1.01)).len(), 1);
    }
}
