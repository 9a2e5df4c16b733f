//! End-to-end runs of the command line through [`run`], the binary's entry point.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::{run, EXIT_CONVERGENCE, EXIT_DATA, EXIT_OK, EXIT_USAGE};

fn jpa_sim(args: &[&str]) -> i32 {
    run(std::iter::once("jpa-sim").chain(args.iter().copied()))
}

fn ic_table() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/ic_table.csv")
}

fn config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"seed = 11

[device]
ic_table = "{table}"
normal_resistance_ohm = 1000.0
f0_hz = 6.44e9
ref_freq_hz = 5.849e9
ref_ic_ampere = 1.3e-6
kerr_ref_gate_volt = 15.0
kerr_ref_hz = -135e3
gamma1_hz = 11.0e6
gamma2_hz = 0.95e6
gamma3_hz = 11e3

[resonator]
f_r_hz = 5.849e9
gamma1_hz = 11.0e6
gamma2_hz = 0.95e6
gamma3_hz = 11e3
kerr_hz = -135e3

[synth]
fractions_of_critical = [0.01, 0.25, 0.5, 0.75, 0.95]
direction = "up"
snr_db = 40.0

[fit]
manifest = "out/synth/manifest.json"
{extra}"#,
        table = ic_table().display()
    );
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn invoke(cfg: &Path, args: &[&str], out: &Path) -> i32 {
    let mut argv: Vec<OsString> = std::iter::once("jpa-sim")
        .chain(args.iter().copied())
        .map(Into::into)
        .collect();
    argv.extend(["--config".into(), cfg.into(), "--out".into(), out.into()]);
    run(argv)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let name = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((name, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_is_byte_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(invoke(&cfg, &["synth"], &a), EXIT_OK);
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    assert_eq!(single.install(|| invoke(&cfg, &["synth"], &b)), EXIT_OK);
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.len(), 7);
    assert_eq!(fa, fb);

    let c = tmp.path().join("c");
    assert_eq!(invoke(&cfg, &["synth", "--seed", "12"], &c), EXIT_OK);
    assert_ne!(files(&c), fa);
}

#[test]
fn synth_then_fit_recovers_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    let out = tmp.path().join("out");
    assert_eq!(invoke(&cfg, &["synth"], &out), EXIT_OK);
    assert_eq!(invoke(&cfg, &["fit"], &out), EXIT_OK);

    let truth = read_json(&out.join("synth_truth.json"))["params"].clone();
    let got = read_json(&out.join("fit_report.json"))["params"].clone();
    for (key, tol) in [
        ("f_r_hz", 1e-4),
        ("gamma1_hz", 0.05),
        ("gamma2_hz", 0.05),
        ("kerr_hz", 0.1),
        ("gamma3_hz", 0.2),
    ] {
        let (t, g) = (truth[key].as_f64().unwrap(), got[key].as_f64().unwrap());
        assert!(((g - t) / t).abs() < tol, "{key}: {g} vs {t}");
    }
}

#[test]
fn freqmap_passes_through_the_reference_point() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    let out = tmp.path().join("out");
    assert_eq!(invoke(&cfg, &["freqmap"], &out), EXIT_OK);
    let text = fs::read_to_string(out.join("freqmap.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("vg_volt,ic_ampere,lj_henry,fr_hz"));
    let row = lines
        .map(|l| {
            l.split(',')
                .map(|v| v.parse::<f64>().unwrap())
                .collect::<Vec<_>>()
        })
        .find(|r| r[0] == 15.0)
        .unwrap();
    assert!((row[1] - 1.3e-6).abs() < 1e-15);
    assert!((row[3] / 5.849e9 - 1.0).abs() < 1e-9);

    assert_eq!(
        invoke(&cfg, &["freqmap", "--format", "json"], &out),
        EXIT_OK
    );
    let json = read_json(&out.join("freqmap.json"));
    assert_eq!(json["columns"][3], "fr_hz");
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "\n[solver]\ngain_ceiling = 40.0\n");
    assert_eq!(
        invoke(&cfg, &["freqmap"], &tmp.path().join("out")),
        EXIT_USAGE
    );
}

#[test]
fn bad_arguments_are_a_usage_error() {
    assert_eq!(jpa_sim(&["warp"]), EXIT_USAGE);
    assert_eq!(jpa_sim(&["gain"]), EXIT_USAGE);
    assert_eq!(jpa_sim(&["--version"]), EXIT_OK);
}

#[test]
fn malformed_table_row_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let table = tmp.path().join("ic.csv");
    fs::write(
        &table,
        "vg_volt,ic_ampere\n0.0,1e-6\n1.0,oops\n2.0,1.2e-6\n",
    )
    .unwrap();
    let cfg = config(tmp.path(), "");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replace(&ic_table().display().to_string(), "ic.csv");
    fs::write(&cfg, text).unwrap();
    assert_eq!(
        invoke(&cfg, &["freqmap"], &tmp.path().join("out")),
        EXIT_DATA
    );
}

#[test]
fn malformed_trace_row_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    let out = tmp.path().join("out");
    assert_eq!(invoke(&cfg, &["synth"], &out), EXIT_OK);
    let trace = out.join("synth/trace_000.csv");
    let mut text = fs::read_to_string(&trace).unwrap();
    text.push_str("5.9e9,0.1\n");
    fs::write(&trace, text).unwrap();
    assert_eq!(invoke(&cfg, &["fit"], &out), EXIT_DATA);
}

#[test]
fn missing_section_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    assert_eq!(invoke(&cfg, &["tune"], &tmp.path().join("out")), EXIT_USAGE);
}

#[test]
fn unreachable_gain_is_a_convergence_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        "\n[tune]\ntarget_freq_hz = 5.7e9\ntarget_gain_db = 80.0\n",
    );
    assert_eq!(
        invoke(&cfg, &["tune"], &tmp.path().join("out")),
        EXIT_CONVERGENCE
    );
}
