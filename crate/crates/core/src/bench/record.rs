//! Per-iteration metric rows and their CSV, JSON and plot-data encodings.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const CSV_HEADER: [&str; 8] = ["k", "velocity", "rtan", "rfix", "objective", "feasibility", "gap", "ns"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `||z_k - z_{k-1}||`.
    pub velocity: f64,
    /// Certified tangent residual, when the method maintains a certificate.
    pub rtan: Option<f64>,
    pub rfix: Option<f64>,
    /// `(f + h)(x_k)`.
    pub objective: f64,
    /// `||A x_k - b||`.
    pub feasibility: f64,
    /// `L(x_k, λ*) - L(x*, λ_k)` when a reference solution is available.
    pub gap: Option<f64>,
    /// Wall-clock nanoseconds since the start of the run; zero unless timing is enabled.
    pub ns: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_primal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_dual: Option<f64>,
}

/// A scalar column of [`IterationRecord`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Quantity {
    Velocity,
    VelocityPrimal,
    VelocityDual,
    Rtan,
    Rfix,
    Feasibility,
    Gap,
    /// `|objective - f_star|`.
    ObjectiveError { f_star: f64 },
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Velocity => "velocity",
            Quantity::VelocityPrimal => "velocity_primal",
            Quantity::VelocityDual => "velocity_dual",
            Quantity::Rtan => "rtan",
            Quantity::Rfix => "rfix",
            Quantity::Feasibility => "feasibility",
            Quantity::Gap => "gap",
            Quantity::ObjectiveError { .. } => "objective_error",
        }
    }

    pub fn of(&self, r: &IterationRecord) -> Option<f64> {
        match *self {
            Quantity::Velocity => Some(r.velocity),
            Quantity::VelocityPrimal => r.velocity_primal,
            Quantity::VelocityDual => r.velocity_dual,
            Quantity::Rtan => r.rtan,
            Quantity::Rfix => r.rfix,
            Quantity::Feasibility => Some(r.feasibility),
            Quantity::Gap => r.gap,
            Quantity::ObjectiveError { f_star } => Some((r.objective - f_star).abs()),
        }
    }
}

/// Value of `quantity` at iteration `k`, if recorded.
pub fn value_at(records: &[IterationRecord], quantity: Quantity, k: usize) -> Option<f64> {
    records.iter().find(|r| r.k == k).and_then(|r| quantity.of(r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn to_csv(records: &[IterationRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.k.to_string(),
            r.velocity.to_string(),
            opt(r.rtan),
            opt(r.rfix),
            r.objective.to_string(),
            r.feasibility.to_string(),
            opt(r.gap),
            r.ns.to_string(),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn from_csv(bytes: &[u8]) -> Result<Vec<IterationRecord>> {
    let mut rd = csv::Reader::from_reader(bytes);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(crate::error::Error::Config(format!(
            "unexpected CSV header {:?}, expected {}",
            header.iter().collect::<Vec<_>>(),
            CSV_HEADER.join(",")
        )));
    }
    let parse_opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|e| crate::error::Error::Config(format!("bad number {s:?}: {e}")))
        }
    };
    let parse = |s: &str| -> Result<f64> {
        s.parse().map_err(|e| crate::error::Error::Config(format!("bad number {s:?}: {e}")))
    };
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        out.push(IterationRecord {
            k: row[0].parse().map_err(|e| crate::error::Error::Config(format!("bad k {:?}: {e}", &row[0])))?,
            velocity: parse(&row[1])?,
            rtan: parse_opt(&row[2])?,
            rfix: parse_opt(&row[3])?,
            objective: parse(&row[4])?,
            feasibility: parse(&row[5])?,
            gap: parse_opt(&row[6])?,
            ns: row[7].parse().map_err(|e| crate::error::Error::Config(format!("bad ns {:?}: {e}", &row[7])))?,
            velocity_primal: None,
            velocity_dual: None,
        });
    }
    Ok(out)
}

pub fn to_json(records: &[IterationRecord]) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(records)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn from_json(bytes: &[u8]) -> Result<Vec<IterationRecord>> {
    Ok(serde_json::from_slice(bytes)?)
}

/// Reads a CSV or JSON record file, chosen by extension.
pub fn read_records(path: &Path) -> Result<Vec<IterationRecord>> {
    let bytes = fs::read(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => from_json(&bytes),
        _ => from_csv(&bytes),
    }
}

/// Writes records as `{stem}.{csv|json}` plus one two-column `{stem}.{quantity}.dat`
/// file per tracked quantity. Returns the paths written.
pub fn emit(records: &[IterationRecord], format: Format, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let main = dir.join(format!("{stem}.{}", format.extension()));
    let bytes = match format {
        Format::Csv => to_csv(records)?,
        Format::Json => to_json(records)?,
    };
    write_atomic(&main, &bytes)?;
    let mut written = vec![main];
    for q in [
        Quantity::Velocity,
        Quantity::VelocityPrimal,
        Quantity::VelocityDual,
        Quantity::Rtan,
        Quantity::Rfix,
        Quantity::Feasibility,
        Quantity::Gap,
    ] {
        if let Some(path) = write_plot_data(records, q, dir, stem)? {
            written.push(path);
        }
    }
    let objective: String = records.iter().map(|r| format!("{} {}\n", r.k, r.objective)).collect();
    if !records.is_empty() {
        let path = dir.join(format!("{stem}.objective.dat"));
        write_atomic(&path, objective.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

fn write_plot_data(records: &[IterationRecord], q: Quantity, dir: &Path, stem: &str) -> Result<Option<PathBuf>> {
    let body: String = records.iter().filter_map(|r| q.of(r).map(|v| format!("{} {}\n", r.k, v))).collect();
    if body.is_empty() {
        return Ok(None);
    }
    let path = dir.join(format!("{stem}.{}.dat", q.name()));
    write_atomic(&path, body.as_bytes())?;
    Ok(Some(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<IterationRecord> {
        vec![
            IterationRecord {
                k: 1,
                velocity: 0.1,
                rtan: Some(1.0 / 3.0),
                rfix: None,
                objective: 25.634,
                feasibility: 3.7e-7,
                gap: None,
                ns: 0,
                velocity_primal: None,
                velocity_dual: None,
            },
            IterationRecord {
                k: 10,
                velocity: 1e-300,
                rtan: None,
                rfix: Some(2.5e-5),
                objective: -0.0,
                feasibility: 0.0,
                gap: Some(1e-9),
                ns: 42,
                velocity_primal: None,
                velocity_dual: None,
            },
        ]
    }

    #[test]
    fn empty_records_give_header_only() {
        let bytes = to_csv(&[]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "k,velocity,rtan,rfix,objective,feasibility,gap,ns\n");
    }

    #[test]
    fn csv_round_trip() {
        let r = sample();
        assert_eq!(from_csv(&to_csv(&r).unwrap()).unwrap(), r);
    }

    #[test]
    fn json_round_trip_keeps_block_velocities() {
        let mut r = sample();
        r[0].velocity_primal = Some(0.05);
        r[0].velocity_dual = Some(0.02);
        assert_eq!(from_json(&to_json(&r).unwrap()).unwrap(), r);
    }

    #[test]
    fn plot_files_are_two_numeric_columns() {
        let dir = tempfile::tempdir().unwrap();
        let written = emit(&sample(), Format::Csv, dir.path(), "run").unwrap();
        assert!(written.iter().any(|p| p.ends_with("run.csv")));
        for p in written.iter().filter(|p| p.extension().is_some_and(|e| e == "dat")) {
            for line in fs::read_to_string(p).unwrap().lines() {
                let cols: Vec<&str> = line.split_whitespace().collect();
                assert_eq!(cols.len(), 2);
                assert!(cols.iter().all(|c| c.parse::<f64>().is_ok()));
            }
        }
        assert!(!dir.path().join("run.rtan.dat").exists() || fs::read_to_string(dir.path().join("run.rtan.dat")).unwrap().lines().count() == 1);
    }
}
