//! JSON-lines export. Every file starts with a header record carrying the
//! config, the seed pair, the artifact version, and a sha-256 hash of those
//! header fields; records follow one per line in deterministic order, so a
//! rerun with the same seed produces byte-identical output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::coupling::CoupledRun;
use crate::error::Result;
use crate::growth::Trajectory;
use crate::harmonic::HarmonicTable;
use crate::rng::RngStream;
use crate::VERSION;

#[derive(Debug, Clone, Serialize)]
pub struct ExportHeader {
    pub kind: String,
    pub config: Value,
    pub seed: u64,
    pub stream: u64,
    pub version: String,
    pub content_hash: String,
}

impl ExportHeader {
    pub fn new(kind: &str, config: Value, stream: RngStream) -> Self {
        let mut h = ExportHeader {
            kind: kind.to_string(),
            config,
            seed: stream.seed,
            stream: stream.stream_id,
            version: VERSION.to_string(),
            content_hash: String::new(),
        };
        let mut hasher = Sha256::new();
        hasher.update(h.kind.as_bytes());
        hasher.update(serde_json::to_string(&h.config).unwrap().as_bytes());
        hasher.update(h.seed.to_le_bytes());
        hasher.update(h.stream.to_le_bytes());
        hasher.update(h.version.as_bytes());
        h.content_hash = format!("{:x}", hasher.finalize());
        h
    }
}

/// Resolve the output path: keep it under --overwrite, otherwise move an
/// existing target aside to a timestamped sibling and write fresh.
pub fn resolve_output_path(path: &Path, overwrite: bool) -> Result<PathBuf> {
    if overwrite || !path.exists() {
        return Ok(path.to_path_buf());
    }
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let mut candidate = path.to_path_buf();
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let mut k = 0u32;
    loop {
        candidate.set_file_name(format!("{name}.{stamp}{}", if k == 0 { String::new() } else { format!(".{k}") }));
        if !candidate.exists() {
            return Ok(candidate);
        }
        k += 1;
    }
}

pub fn write_jsonl<T: Serialize>(
    path: &Path,
    header: &ExportHeader,
    records: impl IntoIterator<Item = T>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut w, &r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// One record per edge of a harmonic table.
pub fn export_table(path: &Path, table: &HarmonicTable, config: Value, stream: RngStream) -> Result<()> {
    let header = ExportHeader::new("harmonic_table", config, stream);
    let records = table.entries.iter().map(|(e, (value, stderr))| {
        json!({
            "from": [e.from.x, e.from.y],
            "to": [e.to.x, e.to.y],
            "value": value,
            "stderr": stderr,
        })
    });
    let tail = std::iter::once(json!({
        "lazy_mass": table.lazy_mass,
        "lazy_stderr": table.lazy_stderr,
        "dropped": table.dropped,
    }));
    write_jsonl(path, &header, records.chain(tail))
}

/// Header, then one record per event, then one record per snapshot.
pub fn export_trajectory(path: &Path, traj: &Trajectory, config: Value, stream: RngStream) -> Result<()> {
    let header = ExportHeader::new("trajectory", config, stream);
    let events = traj.events.iter().map(|e| json!({ "event": e }));
    let snaps = traj.snapshots.iter().map(|s| {
        json!({
            "snapshot": {
                "step": s.step,
                "time": s.time,
                "vertices": s.vertices.iter().map(|v| [v.x, v.y]).collect::<Vec<_>>(),
                "edges": s
                    .edges
                    .iter()
                    .map(|e| [[e.from.x, e.from.y], [e.to.x, e.to.y]])
                    .collect::<Vec<_>>(),
            }
        })
    });
    write_jsonl(path, &header, events.chain(snaps))
}

/// One record per discrepancy, then a summary record.
pub fn export_ledger(path: &Path, run: &CoupledRun, config: Value, stream: RngStream) -> Result<()> {
    let header = ExportHeader::new("coupling_ledger", config, stream);
    let deltas = run.ledger.deltas.iter().map(|d| json!({ "delta": d }));
    let tail = std::iter::once(json!({
        "summary": {
            "case_counts": run.ledger.case_counts,
            "vertex_discrepancies": run.ledger.vertex_disc.len(),
            "edge_discrepancies": run.ledger.edge_disc.len(),
            "voided": run.ledger.voided,
            "first_envelope_exit": run.first_envelope_exit,
        }
    }));
    write_jsonl(path, &header, deltas.chain(tail))
}

/// Single-document JSON report (used by verify/report).
pub fn export_report<T: Serialize>(path: &Path, report: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{run_coupled, CoupledConfig};
    use crate::growth::{run_process, ProcessConfig};

    #[test]
    fn header_hash_depends_on_fields() {
        let a = ExportHeader::new("x", json!({"n": 4}), RngStream::new(1, 2));
        let b = ExportHeader::new("x", json!({"n": 4}), RngStream::new(1, 2));
        assert_eq!(a.content_hash, b.content_hash);
        let c = ExportHeader::new("x", json!({"n": 5}), RngStream::new(1, 2));
        assert_ne!(a.content_hash, c.content_hash);
        let d = ExportHeader::new("x", json!({"n": 4}), RngStream::new(1, 3));
        assert_ne!(a.content_hash, d.content_hash);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str| -> Vec<u8> {
            let path = dir.path().join(name);
            let cfg = ProcessConfig::intermediate(2, 8);
            let traj = run_process(cfg.clone(), RngStream::new(9, 0)).unwrap();
            export_trajectory(&path, &traj, serde_json::to_value(&cfg).unwrap(), RngStream::new(9, 0))
                .unwrap();
            std::fs::read(&path).unwrap()
        };
        assert_eq!(write("a.jsonl"), write("b.jsonl"));
    }

    #[test]
    fn ledger_export_roundtrip_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let cfg = CoupledConfig::new(2, 3, 8);
        let run = run_coupled(cfg.clone(), RngStream::new(11, 1)).unwrap();
        export_ledger(&path, &run, serde_json::to_value(&cfg).unwrap(), RngStream::new(11, 1))
            .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + run.ledger.deltas.len() + 1);
        let header: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(header["kind"], "coupling_ledger");
        assert_eq!(header["content_hash"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn collision_avoidance_without_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.jsonl");
        std::fs::write(&path, b"existing").unwrap();
        let kept = resolve_output_path(&path, true).unwrap();
        assert_eq!(kept, path);
        let moved = resolve_output_path(&path, false).unwrap();
        assert_ne!(moved, path);
        assert!(!moved.exists());
    }
}
