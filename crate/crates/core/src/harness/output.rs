//! CSV emission for traces and PE reports.
//!
//! Floats are written in scientific notation with 17 significant digits so
//! every value survives a parse round trip.

use std::io::Write;
use std::path::Path;

use tempfile::NamedTempFile;

use super::SimulationTrace;
use crate::error::{Error, Result};
use crate::observability::PeReport;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn to_bytes<F>(header: Vec<String>, fill: F) -> Vec<u8>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut buf);
        w.write_record(&header).expect("in-memory write");
        fill(&mut w).expect("in-memory write");
        w.flush().expect("in-memory write");
    }
    buf
}

pub fn trace_header(n: usize, m: usize) -> Vec<String> {
    let d = m + n;
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.extend((1..=n).map(|i| format!("xhat{i}")));
    h.extend((0..m).map(|i| format!("z{i}")));
    h.extend((0..d).map(|i| format!("zhat{i}")));
    h.extend(["y", "yhat", "err_x", "err_z"].map(String::from));
    h
}

pub const PE_HEADER: [&str; 7] = [
    "condition_id",
    "window_start",
    "delta",
    "margin",
    "threshold",
    "pass",
    "skip_reason",
];

pub fn trace_csv_string(trace: &SimulationTrace) -> Vec<u8> {
    to_bytes(trace_header(trace.n, trace.m), |w| {
        for row in &trace.rows {
            let mut rec = vec![num(row.t)];
            rec.extend(row.x.iter().map(|&v| num(v)));
            rec.extend(row.xhat.iter().map(|&v| num(v)));
            rec.extend(row.z.iter().map(|&v| num(v)));
            rec.extend(row.zhat.iter().map(|&v| num(v)));
            rec.extend([row.y, row.yhat, row.err_x, row.err_z].map(num));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

pub fn pe_csv_string(reports: &[PeReport]) -> Vec<u8> {
    to_bytes(PE_HEADER.map(String::from).to_vec(), |w| {
        for r in reports {
            w.write_record([
                r.condition.as_str().to_string(),
                num(r.window_start),
                num(r.delta),
                r.margin.map(num).unwrap_or_default(),
                num(r.threshold),
                r.pass.to_string(),
                r.skip_reason.clone().unwrap_or_default(),
            ])?;
        }
        Ok(())
    })
}

/// Writes through a temporary file in the destination directory and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn emit_trace_csv(trace: &SimulationTrace, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &trace_csv_string(trace))
}

pub fn emit_pe_csv(reports: &[PeReport], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &pe_csv_string(reports))
}

/// A parsed CSV file: header plus string records.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column values parsed as floats; empty cells become NaN.
    pub fn floats(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.column(name)?;
        Some(
            self.records
                .iter()
                .map(|r| r[idx].parse().unwrap_or(f64::NAN))
                .collect(),
        )
    }
}

pub fn parse_csv(bytes: &[u8]) -> Result<CsvTable> {
    let parse_err = |e: csv::Error| Error::Parse {
        path: "<csv>".into(),
        message: e.to_string(),
    };
    let mut r = csv::Reader::from_reader(bytes);
    let header = r
        .headers()
        .map_err(parse_err)?
        .iter()
        .map(String::from)
        .collect();
    let records = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<std::result::Result<_, _>>()
        .map_err(parse_err)?;
    Ok(CsvTable { header, records })
}
