//! CSV files, provenance sidecars and the comparison report.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const MC_HEADER: [&str; 5] = ["x", "mean", "stderr", "n_trials", "seed"];
pub const PROFILE_HEADER: [&str; 2] = ["x", "u"];
pub const HEATKERNEL_HEADER: [&str; 3] = ["r", "y", "h"];

/// Version string: crate version plus `git describe` when available at build time.
pub fn version() -> &'static str {
    env!("FKWALK_VERSION")
}

/// 17 significant digits, round-trip exact.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// File-name form of a time, e.g. `0.1` → `t0.1`.
pub fn time_label(t: f64) -> String {
    format!("t{t}")
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

/// CSV text with `\n` line endings.
pub fn csv_bytes<R, I>(header: &[&str], rows: I) -> Result<Vec<u8>, CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Usage(format!("csv: {e}"))
}

/// Provenance written next to each CSV as `<file>.meta.toml`.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub problem: String,
    pub kernel: String,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub h: f64,
    pub k: Option<f64>,
    pub t_requested: f64,
    pub t_used: f64,
    pub extra: BTreeMap<String, String>,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.toml");
    csv.with_file_name(name)
}

/// One output file and its sidecar, written only after every file is ready.
pub struct Artifact {
    pub path: PathBuf,
    pub csv: Vec<u8>,
    pub meta: Metadata,
}

pub fn write_artifacts(artifacts: &[Artifact]) -> Result<(), CliError> {
    for a in artifacts {
        let meta = toml::to_string(&a.meta).map_err(|e| CliError::Usage(format!("metadata: {e}")))?;
        write_atomic(&a.path, &a.csv)?;
        write_atomic(&sidecar_path(&a.path), meta.as_bytes())?;
    }
    Ok(())
}

/// Reads `x` and the value column (the second column) of a CSV produced by
/// any `run-*` command.
pub fn read_xy(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut r = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Usage(format!("{} row {}: {e}", path.display(), i + 2)))?;
        rows.push(vals);
    }
    Ok((header, rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffendingRow {
    pub x: f64,
    pub mean: f64,
    pub reference: f64,
    pub band: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub rows: usize,
    pub max_abs_diff: f64,
    pub outside: Vec<OffendingRow>,
    pub tol: f64,
    pub z: f64,
}

impl CompareReport {
    pub fn pass(&self) -> bool {
        self.outside.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "rows = {}\nmax_abs_diff = {}\nrows_outside_band = {}\nband = {} + {}*stderr\nresult = {}\n",
            self.rows,
            fmt_f64(self.max_abs_diff),
            self.outside.len(),
            self.tol,
            self.z,
            if self.pass() { "pass" } else { "fail" }
        );
        for r in &self.outside {
            s.push_str(&format!(
                "outside: x = {} mean = {} ref = {} band = {}\n",
                fmt_f64(r.x),
                fmt_f64(r.mean),
                fmt_f64(r.reference),
                fmt_f64(r.band)
            ));
        }
        s
    }
}

/// Piecewise-linear interpolation of sorted `(xs, ys)` at `x`.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let eps = 1e-12;
    if xs.is_empty() || x < xs[0] - eps || x > xs[xs.len() - 1] + eps {
        return None;
    }
    let i = xs.partition_point(|&v| v < x - eps);
    if i < xs.len() && (xs[i] - x).abs() <= eps {
        return Some(ys[i]);
    }
    if i == 0 || i == xs.len() {
        return None;
    }
    let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    Some((1.0 - w) * ys[i - 1] + w * ys[i])
}

/// Pointwise check `|mean - ref| ≤ tol + z·stderr` with the reference
/// interpolated onto the Monte Carlo grid.
pub fn compare(mc: &Path, reference: &Path, tol: f64, z: f64) -> Result<CompareReport, CliError> {
    let (mh, mrows) = read_xy(mc)?;
    if mh.len() < 3 || mh[0] != "x" || mh[2] != "stderr" {
        return Err(CliError::Usage(format!(
            "{} is not a Monte Carlo CSV (expected header {})",
            mc.display(),
            MC_HEADER.join(",")
        )));
    }
    let (rh, rrows) = read_xy(reference)?;
    if rh.len() < 2 || rh[0] != "x" {
        return Err(CliError::Usage(format!("{} has no x column", reference.display())));
    }
    let mut pairs: Vec<(f64, f64)> = rrows.iter().map(|r| (r[0], r[1])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    if xs.is_empty() {
        return Err(CliError::Usage(format!("{} has no rows", reference.display())));
    }
    let mut report = CompareReport {
        rows: mrows.len(),
        max_abs_diff: 0.0,
        outside: Vec::new(),
        tol,
        z,
    };
    for r in &mrows {
        let (x, mean, se) = (r[0], r[1], r[2]);
        let reference = interp(&xs, &ys, x).ok_or_else(|| {
            CliError::Usage(format!(
                "x = {x} lies outside the reference grid [{}, {}]",
                xs[0],
                xs[xs.len() - 1]
            ))
        })?;
        let d = (mean - reference).abs();
        report.max_abs_diff = report.max_abs_diff.max(d);
        let band = tol + z * se;
        if d > band {
            report.outside.push(OffendingRow {
                x,
                mean,
                reference,
                band,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn interpolation_bounds() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 10.0, 0.0];
        assert_eq!(interp(&xs, &ys, 1.0), Some(10.0));
        assert_eq!(interp(&xs, &ys, 0.5), Some(5.0));
        assert_eq!(interp(&xs, &ys, 2.5), None);
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            sidecar_path(Path::new("out/mc_t0.1.csv")),
            Path::new("out/mc_t0.1.csv.meta.toml")
        );
    }
}
