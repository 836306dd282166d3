//! Artifact envelopes and writing.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

/// Version of the artifact layout; bump on incompatible changes.
pub const SCHEMA_VERSION: u32 = 1;
pub const PROGRAM: &str = "spheroidal";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A finished artifact.
#[derive(Debug)]
pub enum Artifact {
    Json(Value),
    Text(String),
}

/// `{schema_version, program, version, command, config, result}`.
pub fn json_envelope<C: Serialize, R: Serialize>(
    command: &str,
    config: &C,
    result: &R,
) -> Artifact {
    let value = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "program": PROGRAM,
        "version": VERSION,
        "command": command,
        "config": config,
        "result": result,
    });
    Artifact::Json(value)
}

/// Comment lines prefixed with `#` carrying the same metadata as the JSON
/// envelope; the configuration is serialised as one JSON line.
pub fn csv_preamble<C: Serialize>(command: &str, config: &C) -> String {
    let config = serde_json::to_string(config).unwrap_or_else(|_| "{}".into());
    format!(
        "# schema_version={SCHEMA_VERSION}\n# program={PROGRAM} version={VERSION} command={command}\n# config={config}\n"
    )
}

pub fn emit(artifact: &Artifact, path: Option<&Path>) -> io::Result<()> {
    let mut out: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            io::Error::new(e.kind(), format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match artifact {
        Artifact::Json(v) => {
            serde_json::to_writer_pretty(&mut out, v)?;
            writeln!(out)?;
        }
        Artifact::Text(s) => out.write_all(s.as_bytes())?,
    }
    out.flush()
}

/// Reads the `result` of a JSON envelope, or the whole document when it is
/// not wrapped.
pub fn read_result(path: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| format!("{} is not valid JSON: {e}", path.display()))?;
    if let Some(version) = doc.get("schema_version") {
        if version.as_u64() != Some(SCHEMA_VERSION as u64) {
            return Err(format!(
                "{} has schema_version {version}, expected {SCHEMA_VERSION}",
                path.display()
            ));
        }
    }
    Ok(doc.get("result").cloned().unwrap_or(doc))
}
