//! Strict CSV/JSON readers and writers.
//!
//! Readers reject unknown headers, missing or extra fields, and anything that
//! does not parse as a finite float, reporting the offending line. Writers
//! emit 17 significant digits with LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Direction, Trace};
use crate::error::{Error, Result};

/// Float formatting with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Read a headed numeric CSV with exactly the given columns.
pub fn read_numeric_csv(path: impl AsRef<Path>, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_numeric_csv(&text, path, header)
}

fn parse_numeric_csv(text: &str, path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(text.as_bytes());
    let got: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if got != header {
        return Err(parse_error(
            path,
            1,
            format!(
                "expected header '{}', got '{}'",
                header.join(","),
                got.join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_error(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != header.len() {
            return Err(parse_error(
                path,
                line,
                format!("expected {} fields, got {}", header.len(), record.len()),
            ));
        }
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        parse_error(path, line, format!("'{field}' is not a finite number"))
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(path, 2, "no data rows"));
    }
    Ok(rows)
}

/// `vg_volt,ic_ampere`.
pub fn read_ic_table(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    Ok(read_numeric_csv(path, &["vg_volt", "ic_ampere"])?
        .into_iter()
        .map(|r| (r[0], r[1]))
        .collect())
}

/// `freq_hz,re_s11,im_s11`.
pub fn read_s11_trace(path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let rows = read_numeric_csv(path, &["freq_hz", "re_s11", "im_s11"])?;
    Ok(rows
        .into_iter()
        .map(|r| (r[0], Complex64::new(r[1], r[2])))
        .unzip())
}

/// `bias_volt,psd_watt`.
pub fn read_psd_table(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    Ok(read_numeric_csv(path, &["bias_volt", "psd_watt"])?
        .into_iter()
        .map(|r| (r[0], r[1]))
        .collect())
}

/// One entry of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub power_dbm: f64,
    pub direction: Direction,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let mut entries: Vec<ManifestEntry> = serde_json::from_str(&fs::read_to_string(path)?)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for e in &mut entries {
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
    }
    Ok(entries)
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(entries)? + "\n"))
}

/// Write a file, creating parent directories.
pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Header line plus rows of floats.
pub fn numeric_csv(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt_f64).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// `freq_hz,re_s11,im_s11`.
pub fn s11_csv(freqs: &[f64], s11: &[Complex64]) -> String {
    numeric_csv(
        "freq_hz,re_s11,im_s11",
        freqs.iter().zip(s11).map(|(f, s)| vec![*f, s.re, s.im]),
    )
}

/// `freq_hz,power_dbm,re_s11,im_s11,branch,stable`, traces in order.
pub fn traces_csv(traces: &[Trace]) -> String {
    let mut out = String::from("freq_hz,power_dbm,re_s11,im_s11,branch,stable\n");
    for t in traces {
        for ((f, s), st) in t.frequencies.iter().zip(&t.s11).zip(&t.states) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(*f),
                fmt_f64(t.power_dbm),
                fmt_f64(s.re),
                fmt_f64(s.im),
                st.branch.as_str(),
                st.stable
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, header: &[&str]) -> Result<Vec<Vec<f64>>> {
        parse_numeric_csv(text, Path::new("t.csv"), header)
    }

    #[test]
    fn float_format_round_trips() {
        for x in [
            0.1,
            1.0 / 3.0,
            5.849e9,
            -1.234_567_890_123_456_7e-30,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn parses_valid_table() {
        let rows = parse(
            "vg_volt,ic_ampere\n-3,1e-7\n15,1.3e-6\n",
            &["vg_volt", "ic_ampere"],
        )
        .unwrap();
        assert_eq!(rows, vec![vec![-3.0, 1e-7], vec![15.0, 1.3e-6]]);
    }

    #[test]
    fn malformed_rows_report_line() {
        let h = ["vg_volt", "ic_ampere"];
        let err = parse("vg_volt,ic_ampere\n-3,1e-7\n15,abc\n", &h).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse("vg_volt,ic_ampere\n-3,1e-7,4\n", &h).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse("vg,ic\n1,2\n", &h).is_err());
        assert!(parse("vg_volt,ic_ampere\n1,1 000\n", &h).is_err());
        assert!(parse("vg_volt,ic_ampere\n1,1,5\n", &h).is_err());
        assert!(parse("vg_volt,ic_ampere\n", &h).is_err());
        assert!(parse("vg_volt,ic_ampere\n1,NaN\n", &h).is_err());
    }

    #[test]
    fn manifest_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(
            &path,
            r#"[{"power_dbm": -120, "direction": "up", "path": "a.csv", "x": 1}]"#,
        )
        .unwrap();
        assert!(read_manifest(&path).is_err());
        fs::write(
            &path,
            r#"[{"power_dbm": -120, "direction": "up", "path": "a.csv"}]"#,
        )
        .unwrap();
        let m = read_manifest(&path).unwrap();
        assert_eq!(m[0].path, dir.path().join("a.csv"));
        assert_eq!(m[0].direction, Direction::Up);
    }
}
