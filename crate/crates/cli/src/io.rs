//! CSV and JSON readers and writers for the command-line surface.

use std::fs;
use std::path::{Path, PathBuf};

use nergrvt_core::nonergodic::{AleatoryRow, FnergResult};
use nergrvt_core::residuals::{ResidualRow, ResidualTable};
use nergrvt_core::{AleatoryCoefficients, CorrelationModel, EasSpectrum, FrequencyGrid, NonErgodicField};
use serde::de::DeserializeOwned;

use crate::error::{CliError, CliResult};

pub const EAS_HEADER: [&str; 2] = ["frequency_hz", "eas"];
pub const FIELD_HEADER: [&str; 3] = ["frequency_hz", "mean_ln", "sd_ln"];
pub const RESIDUAL_HEADER: [&str; 7] = [
    "event_id",
    "station_id",
    "magnitude",
    "r_rup_km",
    "vs30_ms",
    "period_s",
    "residual_ln",
];
pub const ALEATORY_HEADER: [&str; 6] = ["period_s", "phi0_m1", "phi0_m2", "tau0_m1", "tau0_m2", "dc0"];
pub const PSA_HEADER: [&str; 8] = ["period_s", "psa", "m0", "delta", "n_z", "pf", "d_gm", "d_rms"];
pub const FNERG_HEADER: [&str; 3] = ["realization", "period_s", "fnerg"];
pub const HAZARD_HEADER: [&str; 7] = ["level_g", "mean", "median", "p02", "p16", "p84", "p98"];

/// Formats with 9 significant digits, fixed or scientific like C's `%.9g`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{x:.*}", (8 - exp) as usize)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::input(path, format!("line {}, column {}: {e}", e.line(), e.column())))
}

/// Parsed CSV body: (line number, fields) per record.
struct Table {
    rows: Vec<(u64, Vec<String>)>,
}

fn read_csv(path: &Path, header: &[&str]) -> CliResult<Table> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found = rdr
        .headers()
        .map_err(|e| CliError::input(path, format!("row 1: {e}")))?
        .clone();
    let found: Vec<&str> = found.iter().collect();
    if found != header {
        return Err(CliError::input(
            path,
            format!(
                "row 1: header must be `{}`, found `{}`",
                header.join(","),
                found.join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::input(path, format!("row {line}: {e}"))
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(CliError::input(path, "no data rows"));
    }
    Ok(Table { rows })
}

fn num(path: &Path, line: u64, header: &[&str], fields: &[String], col: usize) -> CliResult<f64> {
    let s = &fields[col];
    let v: f64 = s.parse().map_err(|_| {
        CliError::input(
            path,
            format!(
                "row {line}, column {} ({}): cannot parse `{s}` as a number",
                col + 1,
                header[col]
            ),
        )
    })?;
    if !v.is_finite() {
        return Err(CliError::input(
            path,
            format!("row {line} ({}): value must be finite", header[col]),
        ));
    }
    Ok(v)
}

/// Reads an ascending frequency column, reporting the first offending row.
fn frequencies(path: &Path, t: &Table, header: &[&str]) -> CliResult<Vec<f64>> {
    let mut out: Vec<f64> = Vec::with_capacity(t.rows.len());
    for (line, f) in &t.rows {
        let v = num(path, *line, header, f, 0)?;
        if !(v > 0.0) {
            return Err(CliError::input(path, format!("row {line}: frequencies must be > 0")));
        }
        if out.last().is_some_and(|&p| v <= p) {
            return Err(CliError::input(
                path,
                format!("row {line}: frequencies must be strictly ascending"),
            ));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn read_eas(path: &Path) -> CliResult<EasSpectrum> {
    let t = read_csv(path, &EAS_HEADER)?;
    let freqs = frequencies(path, &t, &EAS_HEADER)?;
    let mut amps = Vec::with_capacity(freqs.len());
    for (line, f) in &t.rows {
        let a = num(path, *line, &EAS_HEADER, f, 1)?;
        if a < 0.0 {
            return Err(CliError::input(path, format!("row {line}: eas must be >= 0")));
        }
        amps.push(a);
    }
    let grid = FrequencyGrid::new(freqs).map_err(|e| CliError::in_file(path, e))?;
    EasSpectrum::new(grid, amps).map_err(|e| CliError::in_file(path, e))
}

pub fn read_field(path: &Path, correlation: CorrelationModel) -> CliResult<NonErgodicField> {
    let t = read_csv(path, &FIELD_HEADER)?;
    let freqs = frequencies(path, &t, &FIELD_HEADER)?;
    let (mut mean, mut sd) = (Vec::new(), Vec::new());
    for (line, f) in &t.rows {
        mean.push(num(path, *line, &FIELD_HEADER, f, 1)?);
        let s = num(path, *line, &FIELD_HEADER, f, 2)?;
        if s < 0.0 {
            return Err(CliError::input(path, format!("row {line}: sd_ln must be >= 0")));
        }
        sd.push(s);
    }
    let grid = FrequencyGrid::new(freqs).map_err(|e| CliError::in_file(path, e))?;
    NonErgodicField::new(grid, mean, sd, correlation).map_err(|e| CliError::in_file(path, e))
}

pub fn read_residuals(path: &Path) -> CliResult<ResidualTable> {
    let t = read_csv(path, &RESIDUAL_HEADER)?;
    let mut rows = Vec::with_capacity(t.rows.len());
    for (line, f) in &t.rows {
        let n = |c| num(path, *line, &RESIDUAL_HEADER, f, c);
        if f[0].is_empty() {
            return Err(CliError::input(path, format!("row {line}: event_id must not be empty")));
        }
        let row = ResidualRow {
            event_id: f[0].clone(),
            station_id: f[1].clone(),
            magnitude: n(2)?,
            r_rup_km: n(3)?,
            vs30_ms: n(4)?,
            period_s: n(5)?,
            residual_ln: n(6)?,
        };
        if !(row.period_s > 0.0) {
            return Err(CliError::input(path, format!("row {line}: period_s must be > 0")));
        }
        rows.push(row);
    }
    ResidualTable::new(rows).map_err(|e| CliError::in_file(path, e))
}

pub fn read_aleatory(path: &Path) -> CliResult<AleatoryCoefficients> {
    let t = read_csv(path, &ALEATORY_HEADER)?;
    let mut rows = Vec::with_capacity(t.rows.len());
    for (line, f) in &t.rows {
        let n = |c| num(path, *line, &ALEATORY_HEADER, f, c);
        let row = AleatoryRow {
            period_s: n(0)?,
            phi0_m1: n(1)?,
            phi0_m2: n(2)?,
            tau0_m1: n(3)?,
            tau0_m2: n(4)?,
            dc0: n(5)?,
        };
        if [row.phi0_m1, row.phi0_m2, row.tau0_m1, row.tau0_m2]
            .iter()
            .any(|s| !(*s > 0.0))
        {
            return Err(CliError::input(
                path,
                format!("row {line}: all standard deviations must be > 0"),
            ));
        }
        rows.push(row);
    }
    AleatoryCoefficients::new(rows).map_err(|e| CliError::in_file(path, e))
}

/// Realization rows of an F_nerg file; the `mean`/`sd` summary rows are skipped.
pub fn read_fnerg(path: &Path) -> CliResult<Vec<FnergResult>> {
    let t = read_csv(path, &FNERG_HEADER)?;
    let mut out: Vec<FnergResult> = Vec::new();
    for (line, f) in &t.rows {
        let Ok(r) = f[0].parse::<usize>() else {
            if f[0] == "mean" || f[0] == "sd" {
                continue;
            }
            return Err(CliError::input(
                path,
                format!(
                    "row {line}: realization must be an index, `mean` or `sd`, found `{}`",
                    f[0]
                ),
            ));
        };
        let period = num(path, *line, &FNERG_HEADER, f, 1)?;
        let value = num(path, *line, &FNERG_HEADER, f, 2)?;
        match out.last_mut() {
            Some(last) if last.realization == Some(r) => {
                if last.periods.last().is_some_and(|&p| period <= p) {
                    return Err(CliError::input(
                        path,
                        format!("row {line}: periods must ascend within a realization"),
                    ));
                }
                last.periods.push(period);
                last.values.push(value);
            }
            _ => {
                if out.iter().any(|o| o.realization == Some(r)) {
                    return Err(CliError::input(
                        path,
                        format!("row {line}: realization {r} is not contiguous"),
                    ));
                }
                out.push(FnergResult {
                    periods: vec![period],
                    values: vec![value],
                    realization: Some(r),
                });
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::input(path, "no realization rows"));
    }
    Ok(out)
}

/// A CSV output held in memory until written.
pub struct CsvOut {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl CsvOut {
    pub fn new(name: &'static str, header: &[&'static str]) -> Self {
        Self {
            name,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push_nums(&mut self, lead: Option<String>, values: &[f64]) {
        let mut row: Vec<String> = lead.into_iter().collect();
        row.extend(values.iter().map(|&v| fmt_num(v)));
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
