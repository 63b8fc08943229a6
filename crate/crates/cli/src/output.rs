//! Artifact emission. Every file lands in the run's output directory and
//! carries the manifest hash: CSV files in `#` comment lines, JSON files in
//! a leading `manifest_sha256` field.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::config::RunManifest;
use crate::error::CliError;

pub enum Body {
    Csv { columns: String, rows: Vec<String> },
    Json(Value),
}

pub struct Artifact {
    pub name: String,
    pub body: Body,
}

impl Artifact {
    pub fn csv(name: &str, columns: &str, rows: Vec<String>) -> Self {
        Self { name: name.into(), body: Body::Csv { columns: columns.into(), rows } }
    }

    pub fn json(name: &str, value: Value) -> Self {
        Self { name: name.into(), body: Body::Json(value) }
    }

    fn render(&self, manifest: &RunManifest, hash: &str) -> String {
        match &self.body {
            Body::Csv { columns, rows } => {
                let mut out = format!(
                    "# mgame {} {}\n# manifest-sha256: {hash}\n{columns}\n",
                    manifest.version, manifest.subcommand
                );
                for row in rows {
                    out.push_str(row);
                    out.push('\n');
                }
                out
            }
            Body::Json(value) => {
                let mut map = Map::new();
                map.insert("manifest_sha256".into(), Value::from(hash));
                match value {
                    Value::Object(obj) => map.extend(obj.clone()),
                    other => {
                        map.insert("data".into(), other.clone());
                    }
                }
                let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("serializable");
                s.push('\n');
                s
            }
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Writes `manifest.json` plus the artifacts; returns the written paths.
pub fn write_all(out_dir: &Path, manifest: &mut RunManifest, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, CliError> {
    for a in artifacts {
        if a.name.contains('/') || a.name.contains('\\') || a.name == "manifest.json" {
            return Err(CliError::Usage(format!("artifact name `{}` would escape the output directory", a.name)));
        }
    }
    manifest.outputs =
        std::iter::once("manifest.json".to_string()).chain(artifacts.iter().map(|a| a.name.clone())).collect();
    let hash = manifest.hash();
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let mut written = Vec::new();
    let manifest_json = Artifact::json("manifest.json", serde_json::json!({ "manifest": manifest }));
    for a in std::iter::once(&manifest_json).chain(artifacts) {
        let path = out_dir.join(&a.name);
        fs::write(&path, a.render(manifest, &hash)).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

/// Shortest round-trip representation, so outputs are stable and lossless.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}
