//! Data-file writers: CSV tables, their JSON mirrors, and the metadata
//! sidecar.
//!
//! Data files are strictly reproducible: numbers are printed in scientific
//! notation with 17 significant digits, records end in a bare line feed,
//! and nothing time- or host-dependent is ever written. Run metadata
//! (resolved configuration, diagnostics, fits) lives in a separate
//! `<path>.meta.json` sidecar next to each data file.

use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use locfim::Fisher64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::run::{FitSummary, PointDiagnostics, PointRow};
use crate::Failure;

/// Scientific notation with 17 significant digits; enough to round-trip an
/// `f64` exactly.
fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, Failure> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn finish(mut writer: csv::Writer<File>, path: &Path) -> Result<(), Failure> {
    writer
        .flush()
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn write_record<I, S>(writer: &mut csv::Writer<File>, path: &Path, record: I) -> Result<(), Failure>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    writer
        .write_record(record)
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

/// Columns of an eigenvalue sweep: `x,l,eig_1..eig_N,rank,cond_warning`.
fn eigen_columns(n: usize) -> Vec<String> {
    let mut columns = vec!["x".to_string(), "l".to_string()];
    columns.extend((1..=n).map(|i| format!("eig_{i}")));
    columns.push("rank".to_string());
    columns.push("cond_warning".to_string());
    columns
}

/// Columns of a matrix-element sweep: `x,l,m_1_1..m_N_N`, row-major.
fn element_columns(n: usize) -> Vec<String> {
    let mut columns = vec!["x".to_string(), "l".to_string()];
    for i in 1..=n {
        for j in 1..=n {
            columns.push(format!("m_{i}_{j}"));
        }
    }
    columns
}

fn eigen_record(row: &PointRow) -> Vec<String> {
    let report = row.report.as_ref().expect("eigen rows carry a report");
    let mut record = vec![sci(row.x), sci(row.size)];
    record.extend(report.eigenvalues().iter().map(|&v| sci(v)));
    record.push(report.rank().to_string());
    record.push(u8::from(row.diagnostics.warning).to_string());
    record
}

fn element_record(row: &PointRow) -> Vec<String> {
    let mut record = vec![sci(row.x), sci(row.size)];
    let entries = row.matrix.entries();
    for i in 0..entries.nrows() {
        for j in 0..entries.ncols() {
            record.push(sci(entries[(i, j)]));
        }
    }
    record
}

fn eigen_values(row: &PointRow) -> Vec<Value> {
    let report = row.report.as_ref().expect("eigen rows carry a report");
    let mut values = vec![json!(row.x), json!(row.size)];
    values.extend(report.eigenvalues().iter().map(|&v| json!(v)));
    values.push(json!(report.rank()));
    values.push(json!(u8::from(row.diagnostics.warning)));
    values
}

fn element_values(row: &PointRow) -> Vec<Value> {
    let mut values = vec![json!(row.x), json!(row.size)];
    let entries = row.matrix.entries();
    for i in 0..entries.nrows() {
        for j in 0..entries.ncols() {
            values.push(json!(entries[(i, j)]));
        }
    }
    values
}

/// Write a single-computation sweep. Eigenvalue rows when the analysis asks
/// for them, raw matrix elements otherwise.
pub fn write_sweep(
    path: &Path,
    format: crate::config::OutputFormat,
    rows: &[PointRow],
    fit: Option<&FitSummary>,
) -> Result<(), Failure> {
    let n = rows[0].matrix.dim();
    let spectral = rows[0].report.is_some();
    let columns = if spectral {
        eigen_columns(n)
    } else {
        element_columns(n)
    };
    match format {
        crate::config::OutputFormat::Csv => {
            let mut writer = csv_writer(path)?;
            write_record(&mut writer, path, &columns)?;
            for row in rows {
                let record = if spectral {
                    eigen_record(row)
                } else {
                    element_record(row)
                };
                write_record(&mut writer, path, &record)?;
            }
            finish(writer, path)
        }
        crate::config::OutputFormat::Json => {
            let data: Vec<Vec<Value>> = rows
                .iter()
                .map(|row| {
                    if spectral {
                        eigen_values(row)
                    } else {
                        element_values(row)
                    }
                })
                .collect();
            let diagnostics: Vec<&PointDiagnostics> =
                rows.iter().map(|row| &row.diagnostics).collect();
            let mut payload = json!({
                "columns": columns,
                "rows": data,
                "diagnostics": diagnostics,
            });
            if let Some(fit) = fit {
                payload["fit"] = serde_json::to_value(fit)
                    .map_err(|e| Failure::Io(format!("cannot encode fit: {e}")))?;
            }
            write_json(path, &payload)
        }
    }
}

/// Write a paired sweep: `x,l,qeig_*,ceig_*,qrank,crank`, where the `q`
/// columns belong to the primary computation slot and the `c` columns to
/// the `versus` slot.
pub fn write_compare(
    path: &Path,
    format: crate::config::OutputFormat,
    primary: &[PointRow],
    versus: &[PointRow],
) -> Result<(), Failure> {
    let n = primary[0].matrix.dim();
    let mut columns = vec!["x".to_string(), "l".to_string()];
    columns.extend((1..=n).map(|i| format!("qeig_{i}")));
    columns.extend((1..=n).map(|i| format!("ceig_{i}")));
    columns.push("qrank".to_string());
    columns.push("crank".to_string());
    match format {
        crate::config::OutputFormat::Csv => {
            let mut writer = csv_writer(path)?;
            write_record(&mut writer, path, &columns)?;
            for (q, c) in primary.iter().zip(versus.iter()) {
                let q_report = q.report.as_ref().expect("compare rows carry reports");
                let c_report = c.report.as_ref().expect("compare rows carry reports");
                let mut record = vec![sci(q.x), sci(q.size)];
                record.extend(q_report.eigenvalues().iter().map(|&v| sci(v)));
                record.extend(c_report.eigenvalues().iter().map(|&v| sci(v)));
                record.push(q_report.rank().to_string());
                record.push(c_report.rank().to_string());
                write_record(&mut writer, path, &record)?;
            }
            finish(writer, path)
        }
        crate::config::OutputFormat::Json => {
            let data: Vec<Vec<Value>> = primary
                .iter()
                .zip(versus.iter())
                .map(|(q, c)| {
                    let q_report = q.report.as_ref().expect("compare rows carry reports");
                    let c_report = c.report.as_ref().expect("compare rows carry reports");
                    let mut values = vec![json!(q.x), json!(q.size)];
                    values.extend(q_report.eigenvalues().iter().map(|&v| json!(v)));
                    values.extend(c_report.eigenvalues().iter().map(|&v| json!(v)));
                    values.push(json!(q_report.rank()));
                    values.push(json!(c_report.rank()));
                    values
                })
                .collect();
            let q_diag: Vec<&PointDiagnostics> =
                primary.iter().map(|row| &row.diagnostics).collect();
            let c_diag: Vec<&PointDiagnostics> =
                versus.iter().map(|row| &row.diagnostics).collect();
            let payload = json!({
                "columns": columns,
                "rows": data,
                "diagnostics": { "primary": q_diag, "versus": c_diag },
            });
            write_json(path, &payload)
        }
    }
}

/// Write a single matrix: header row of parameter labels, then the entries
/// row by row.
pub fn write_dump(
    path: &Path,
    format: crate::config::OutputFormat,
    matrix: &Fisher64,
) -> Result<(), Failure> {
    match format {
        crate::config::OutputFormat::Csv => {
            let mut writer = csv_writer(path)?;
            write_record(&mut writer, path, matrix.labels())?;
            let entries = matrix.entries();
            for i in 0..entries.nrows() {
                let record: Vec<String> =
                    (0..entries.ncols()).map(|j| sci(entries[(i, j)])).collect();
                write_record(&mut writer, path, &record)?;
            }
            finish(writer, path)
        }
        crate::config::OutputFormat::Json => {
            let entries = matrix.entries();
            let data: Vec<Vec<f64>> = (0..entries.nrows())
                .map(|i| (0..entries.ncols()).map(|j| entries[(i, j)]).collect())
                .collect();
            let payload = json!({
                "labels": matrix.labels(),
                "entries": data,
            });
            write_json(path, &payload)
        }
    }
}

fn write_json(path: &Path, payload: &Value) -> Result<(), Failure> {
    let mut file = File::create(path)
        .map_err(|e| Failure::Io(format!("cannot create {}: {e}", path.display())))?;
    serde_json::to_writer_pretty(&mut file, payload)
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
    file.write_all(b"\n")
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

/// Eigen-spectrum summary of a single-scene run, for the sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
}

/// Covariance-bound summary of a single-scene run, for the sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct CrbSummary {
    pub support_dim: usize,
    pub matrix: Vec<Vec<f64>>,
}

/// Per-run metadata written next to each data file.
#[derive(Serialize)]
pub struct Sidecar<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub diagnostics: SidecarDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<&'a FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crb: Option<CrbSummary>,
}

#[derive(Serialize)]
#[serde(untagged)]
pub enum SidecarDiagnostics {
    Single(Vec<PointDiagnostics>),
    Paired {
        primary: Vec<PointDiagnostics>,
        versus: Vec<PointDiagnostics>,
    },
}

/// The sidecar path of a data file: `<path>.meta.json`.
pub fn sidecar_path(data_path: &Path) -> PathBuf {
    let mut name = data_path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn write_sidecar(data_path: &Path, sidecar: &Sidecar) -> Result<(), Failure> {
    let path = sidecar_path(data_path);
    let value = serde_json::to_value(sidecar)
        .map_err(|e| Failure::Io(format!("cannot encode metadata: {e}")))?;
    write_json(&path, &value)
}
