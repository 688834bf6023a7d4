//! CSV emission. Every file opens with one comment line
//! `# nfbs <version> schema=<name>/<rev> config_sha256=<hex>` followed by a
//! header row.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const SCHEMA_NMSE_SUMMARY: &str = "nmse-summary/1";
pub const SCHEMA_NMSE_TRIALS: &str = "nmse-trials/1";
pub const SCHEMA_GAIN_MAP: &str = "gain-map/1";
pub const SCHEMA_GAIN_MARKERS: &str = "gain-markers/1";
pub const SCHEMA_FL_TRAIN: &str = "fl-train/1";
pub const SCHEMA_OVERHEAD: &str = "overhead/1";

pub fn header_line(schema: &str, config_hash: &str) -> String {
    format!("# nfbs {TOOL_VERSION} schema={schema} config_sha256={config_hash}")
}

pub fn write_csv<W: Write, S: Serialize>(mut w: W, schema: &str, config_hash: &str, rows: &[S]) -> Result<()> {
    writeln!(w, "{}", header_line(schema, config_hash))?;
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn csv_string<S: Serialize>(schema: &str, config_hash: &str, rows: &[S]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, schema, config_hash, rows)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_csv_file<S: Serialize>(path: impl AsRef<Path>, schema: &str, config_hash: &str, rows: &[S]) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_csv(file, schema, config_hash, rows)
}

/// Splits a harness CSV into its comment fields (`schema`, `config_sha256`, ...)
/// and the remaining CSV text.
pub fn parse_header(text: &str) -> Result<(Vec<(String, String)>, &str)> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let fields = first
        .strip_prefix("# nfbs ")
        .ok_or_else(|| Error::Format("missing `# nfbs` header comment".into()))?;
    let mut parts = fields.split_whitespace();
    let mut out = vec![("version".to_string(), parts.next().unwrap_or_default().to_string())];
    for p in parts {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("malformed header field `{p}`")))?;
        out.push((k.to_string(), v.to_string()));
    }
    Ok((out, rest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: f64,
    }

    #[test]
    fn header_and_rows() {
        let text = csv_string("demo/1", "abc", &[Row { a: 1, b: 0.1 }, Row { a: 2, b: -3e-12 }]).unwrap();
        let (fields, body) = parse_header(&text).unwrap();
        assert_eq!(fields[1], ("schema".into(), "demo/1".into()));
        assert_eq!(fields[2], ("config_sha256".into(), "abc".into()));
        assert_eq!(body, "a,b\n1,0.1\n2,-3e-12\n");
        assert!(parse_header("a,b\n").is_err());
    }
}
