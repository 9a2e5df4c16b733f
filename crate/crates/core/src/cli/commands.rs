use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;

use super::config::{OutputFormat, RunConfig};
use crate::amplifier::{
    compression_curve_with, gain_curve_with, suggested_span, tune_operating_point, GainOptions,
    HarmonicBalanceOptions, PumpOperatingPoint,
};
use crate::constants::{hertz, linear_to_db, TWO_PI};
use crate::device::josephson_inductance;
use crate::dynamics::{
    bifurcation_point, critical_flux_at, folds_at, linear_s11, sweep_trace, DriveTone,
    KerrResonatorParams,
};
use crate::error::{Error, Result};
use crate::fitkit::{
    initial_guess, lm::LmOptions, nonlinear_fit_with, synthesize, FitOptions, S11Dataset,
};
use crate::io::{numeric_csv, read_psd_table, traces_csv, write_json, write_text};
use crate::noise::{
    fit_calibration, friis_cascade, loss_degraded_added_noise, noise_spectrum, sql_quanta,
    sql_temperature, SntjParams, Stage,
};

/// Per-invocation overrides of configuration values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub gate: Option<f64>,
    pub pump_frequency: Option<f64>,
    pub fraction: Option<f64>,
    pub powers_dbm: Vec<f64>,
    pub direction: Option<crate::dynamics::Direction>,
    pub signal_offset: Option<f64>,
    pub hemt_quanta: Option<f64>,
    pub psd_table: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub snr_db: Option<f64>,
    pub target_frequency: Option<f64>,
    pub target_gain: Option<f64>,
}

/// Outcome of a command: files written, plus a non-fatal convergence failure.
#[derive(Debug, Default)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub converged: bool,
}

impl Outcome {
    fn done(written: Vec<PathBuf>) -> Self {
        Self {
            written,
            converged: true,
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

fn table(cfg: &RunConfig, name: &str, header: &[&str], rows: Vec<Vec<f64>>) -> Result<PathBuf> {
    let dir = &cfg.output.directory;
    match cfg.output.format {
        OutputFormat::Csv => {
            let path = dir.join(format!("{name}.csv"));
            write_text(&path, &numeric_csv(&header.join(","), rows))?;
            Ok(path)
        }
        OutputFormat::Json => {
            let path = dir.join(format!("{name}.json"));
            write_json(&path, &json!({ "columns": header, "rows": rows }))?;
            Ok(path)
        }
    }
}

fn summary<T: Serialize>(cfg: &RunConfig, name: &str, value: &T) -> Result<PathBuf> {
    let path = cfg.output.directory.join(format!("{name}.json"));
    write_json(&path, value)?;
    Ok(path)
}

fn operating_point(cfg: &RunConfig, o: &Overrides) -> Result<PumpOperatingPoint> {
    let params = cfg.resonator_params(o.gate)?;
    let (freq, fraction) = match (o.pump_frequency, o.fraction) {
        (Some(f), Some(x)) => (f, x),
        (f, x) => {
            let p = cfg.pump()?;
            (f.unwrap_or(p.frequency_hz), x.unwrap_or(p.fraction))
        }
    };
    PumpOperatingPoint::new(params, freq, fraction)
}

fn params_hz(p: &KerrResonatorParams) -> serde_json::Value {
    json!({
        "f_r_hz": hertz(p.omega_r),
        "gamma1_hz": hertz(p.gamma1),
        "gamma2_hz": hertz(p.gamma2),
        "gamma3_hz": hertz(p.gamma3),
        "kerr_hz": hertz(p.kerr),
    })
}

fn sweep_grid(cfg: &RunConfig, p: &KerrResonatorParams) -> Vec<f64> {
    let f_r = hertz(p.omega_r);
    let span = cfg
        .solver
        .sweep_span_hz
        .unwrap_or(10.0 * hertz(p.total_linear_loss()));
    linspace(f_r - span / 2.0, f_r + span / 2.0, cfg.solver.sweep_points)
}

/// `vg_volt,ic_ampere,lj_henry,fr_hz` over the gate range, including every table node.
pub fn cmd_freqmap(cfg: &RunConfig) -> Result<Outcome> {
    let device = cfg.device_model()?;
    let (lo, hi) = device.junction.gate_range();
    let mut gates = linspace(lo, hi, cfg.solver.freqmap_points);
    gates.extend(device.junction.table().iter().map(|r| r.0));
    gates.sort_by(f64::total_cmp);
    gates.dedup();
    let rows = gates
        .into_iter()
        .map(|v| {
            let ic = device.junction.critical_current_at(v)?;
            Ok(vec![
                v,
                ic,
                josephson_inductance(ic)?,
                device.resonance_frequency(v)?,
            ])
        })
        .collect::<Result<_>>()?;
    let path = table(
        cfg,
        "freqmap",
        &["vg_volt", "ic_ampere", "lj_henry", "fr_hz"],
        rows,
    )?;
    Ok(Outcome::done(vec![path]))
}

/// Hysteresis-aware reflection traces at each configured power.
pub fn cmd_s11(cfg: &RunConfig, o: &Overrides) -> Result<Outcome> {
    let params = cfg.resonator_params(o.gate)?;
    let (mut powers, mut direction) = match &cfg.s11 {
        Some(s) => (s.powers_dbm.clone(), s.direction),
        None => (Vec::new(), crate::dynamics::Direction::Up),
    };
    if !o.powers_dbm.is_empty() {
        powers = o.powers_dbm.clone();
    }
    if let Some(d) = o.direction {
        direction = d;
    }
    if powers.is_empty() {
        return Err(Error::Config(
            "s11 needs at least one power ([s11] powers_dbm or --power)".into(),
        ));
    }
    let traces = sweep_trace(&params, &powers, &sweep_grid(cfg, &params), direction)?;
    let path = match cfg.output.format {
        OutputFormat::Csv => {
            let path = cfg.output.directory.join("s11_traces.csv");
            write_text(&path, &traces_csv(&traces))?;
            path
        }
        OutputFormat::Json => {
            let out: Vec<_> = traces
                .iter()
                .map(|t| {
                    json!({
                        "power_dbm": t.power_dbm,
                        "direction": t.direction,
                        "freq_hz": t.frequencies,
                        "re_s11": t.s11.iter().map(|s| s.re).collect::<Vec<_>>(),
                        "im_s11": t.s11.iter().map(|s| s.im).collect::<Vec<_>>(),
                        "branch": t.branches().map(|b| b.as_str()).collect::<Vec<_>>(),
                        "stable": t.states.iter().map(|s| s.stable).collect::<Vec<_>>(),
                    })
                })
                .collect();
            summary(cfg, "s11_traces", &out)?
        }
    };
    Ok(Outcome::done(vec![path]))
}

/// Signal and idler gain around the pump, with the pump-off reflection for reference.
pub fn cmd_gain(cfg: &RunConfig, o: &Overrides) -> Result<Outcome> {
    let op = operating_point(cfg, o)?;
    let span = cfg
        .solver
        .gain_span_hz
        .unwrap_or_else(|| suggested_span(&op));
    let opts = GainOptions {
        ceiling_db: cfg.solver.gain_ceiling_db,
        ..GainOptions::default()
    };
    let curve = gain_curve_with(&op, span, cfg.solver.gain_points, &opts)?;
    let rows = (0..curve.signal_freqs.len())
        .map(|k| {
            let fs = curve.signal_freqs[k];
            let off = linear_to_db(linear_s11(&op.params, op.params.detuning(fs)).norm_sqr());
            vec![
                fs,
                curve.idler_freqs[k],
                curve.signal_gain[k],
                curve.idler_gain[k],
                off,
            ]
        })
        .collect();
    let a = table(
        cfg,
        "gain",
        &[
            "signal_hz",
            "idler_hz",
            "signal_gain_db",
            "idler_gain_db",
            "pump_off_db",
        ],
        rows,
    )?;
    let b = summary(
        cfg,
        "gain_summary",
        &json!({
            "params": params_hz(&op.params),
            "pump_hz": op.pump.frequency,
            "pump_dbm": op.pump.dbm(),
            "fraction_of_critical": op.fraction_of_critical,
            "pump_photons": op.photon_number(),
            "peak_gain_db": curve.peak_gain,
            "bandwidth_3db_hz": curve.bandwidth_3db,
            "gbw_hz": curve.gbw,
            "diverged": curve.diverged,
        }),
    )?;
    Ok(Outcome::done(vec![a, b]))
}

/// Cusp of the bistable region plus both fold powers against pump frequency.
pub fn cmd_bifurcation(cfg: &RunConfig, o: &Overrides) -> Result<Outcome> {
    let p = cfg.resonator_params(o.gate)?;
    let b = bifurcation_point(&p)?;
    let f_c = hertz(p.omega_r - b.critical_detuning);
    let g = p.total_linear_loss();
    let rows = linspace(0.0, 4.0 * g, cfg.solver.sweep_points)
        .into_iter()
        .filter_map(|mag| {
            let det = -p.kerr.signum() * mag;
            let f = folds_at(&p, det)?;
            let fp = hertz(p.omega_r - det);
            let lo = DriveTone::from_flux(fp, f.low_branch_end_flux).ok()?.dbm();
            let hi = DriveTone::from_flux(fp, f.high_branch_end_flux).ok()?.dbm();
            Some(vec![fp, hertz(det), lo, hi])
        })
        .collect();
    let a = table(
        cfg,
        "bifurcation",
        &["pump_hz", "detuning_hz", "low_fold_dbm", "high_fold_dbm"],
        rows,
    )?;
    let s = summary(
        cfg,
        "bifurcation_point",
        &json!({
            "params": params_hz(&p),
            "critical_frequency_hz": f_c,
            "critical_detuning_hz": hertz(b.critical_detuning),
            "critical_photons": b.critical_n,
            "critical_flux": b.critical_flux,
            "critical_power_dbm": DriveTone::from_flux(f_c, b.critical_flux)?.dbm(),
        }),
    )?;
    Ok(Outcome::done(vec![a, s]))
}

/// Gain against signal power from the three-tone balance.
pub fn cmd_compression(cfg: &RunConfig, o: &Overrides) -> Result<Outcome> {
    let op = operating_point(cfg, o)?;
    let c = cfg
        .compression
        .ok_or_else(|| Error::Config("compression needs a [compression] section".into()))?;
    let offset = o.signal_offset.unwrap_or(c.signal_offset_hz);
    let powers = linspace(c.start_dbm, c.stop_dbm, c.points);
    let opts = HarmonicBalanceOptions {
        tolerance: cfg.solver.hb_tolerance,
        max_iterations: cfg.solver.hb_max_iterations,
    };
    let curve = compression_curve_with(&op, op.pump.frequency + offset, &powers, &opts)?;
    let rows = curve
        .signal_powers_dbm
        .iter()
        .zip(&curve.gain_db)
        .map(|(p, g)| vec![*p, *g])
        .collect();
    let a = table(cfg, "compression", &["signal_power_dbm", "gain_db"], rows)?;
    let b = summary(
        cfg,
        "compression_summary",
        &json!({
            "signal_hz": curve.signal_frequency,
            "pump_hz": op.pump.frequency,
            "pump_dbm": op.pump.dbm(),
            "small_signal_db": curve.small_signal_db,
            "p1db_dbm": curve.p1db,
        }),
    )?;
    Ok(Outcome::done(vec![a, b]))
}

/// Input-referred noise across the band and the two-stage budget at the gain peak.
pub fn cmd_noise(cfg: &RunConfig, o: &Overrides) -> Result<Outcome> {
    let op = operating_point(cfg, o)?;
    let sec = cfg
        .noise
        .ok_or_else(|| Error::Config("noise needs a [noise] section".into()))?;
    let hemt = o.hemt_quanta.unwrap_or(sec.hemt_quanta);
    let span = sec.span_hz.unwrap_or_else(|| suggested_span(&op));
    let fp = op.pump.frequency;
    let grid = linspace(fp - span / 2.0, fp + span / 2.0, sec.points.max(3));
    let spec = noise_spectrum(&op, hemt, &grid)?;
    let rows = (0..grid.len())
        .map(|k| {
            vec![
                grid[k],
                spec.gain_db[k],
                spec.paramp_quanta[k],
                spec.system_quanta[k],
            ]
        })
        .collect();
    let a = table(
        cfg,
        "noise",
        &["freq_hz", "gain_db", "paramp_quanta", "system_quanta"],
        rows,
    )?;
    let loss = loss_degraded_added_noise(&op.params, op.photon_number())?;
    let k = spec
        .gain_db
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let peak_gain = 10f64.powf(spec.gain_db[k] / 10.0);
    let budget = friis_cascade(&[
        Stage {
            gain: peak_gain,
            added_quanta: loss,
        },
        Stage {
            gain: 1.0,
            added_quanta: hemt,
        },
    ])?;
    let b = summary(
        cfg,
        "noise_budget",
        &json!({
            "sql_quanta": sql_quanta(),
            "sql_temperature_k": sql_temperature(fp)?,
            "loss_degraded_quanta": loss,
            "peak_gain_db": spec.gain_db[k],
            "second_stage_quanta": hemt,
            "system_quanta_at_peak": budget.total_added_quanta,
        }),
    )?;
    Ok(Outcome::done(vec![a, b]))
}

/// Shot-noise junction fit of system gain and added noise.
pub fn cmd_calibrate(cfg: &RunConfig, o: &Overrides) -> Result<Outcome> {
    let sec = cfg
        .calibrate
        .as_ref()
        .ok_or_else(|| Error::Config("calibrate needs a [calibrate] section".into()))?;
    let path = o.psd_table.clone().unwrap_or_else(|| sec.psd_table.clone());
    let data = read_psd_table(&path)?;
    let p = SntjParams::new(sec.temperature_k, sec.frequency_hz, sec.bandwidth_hz)?;
    let r = fit_calibration(&data, &p)?;
    Ok(Outcome::done(vec![summary(cfg, "calibration", &r)?]))
}

/// Seeded synthetic dataset: one CSV per trace plus a manifest.
pub fn cmd_synth(cfg: &RunConfig, o: &Overrides) -> Result<Outcome> {
    let p = cfg.resonator_params(o.gate)?;
    let sec = cfg
        .synth
        .as_ref()
        .ok_or_else(|| Error::Config("synth needs a [synth] section".into()))?;
    let f_r = hertz(p.omega_r);
    let powers = match (&sec.powers_dbm, &sec.fractions_of_critical) {
        (Some(p), _) => p.clone(),
        (None, Some(fr)) => {
            let fc = critical_flux_at(&p, 0.0)?;
            fr.iter()
                .map(|x| {
                    DriveTone::from_flux(f_r, x * fc).map(|d| d.dbm() - sec.attenuation_offset_db)
                })
                .collect::<Result<_>>()?
        }
        (None, None) => unreachable!("validated at load"),
    };
    let snr = o.snr_db.or(sec.snr_db);
    let data = synthesize(
        &p,
        &powers,
        &sweep_grid(cfg, &p),
        sec.direction,
        snr,
        cfg.seed,
        sec.attenuation_offset_db,
    )?;
    let dir = cfg.output.directory.join("synth");
    data.write(&dir)?;
    let truth = summary(
        cfg,
        "synth_truth",
        &json!({ "params": params_hz(&p), "seed": cfg.seed, "snr_db": snr, "attenuation_offset_db": sec.attenuation_offset_db }),
    )?;
    Ok(Outcome::done(vec![dir.join("manifest.json"), truth]))
}

/// Multi-power fit of a manifest dataset.
pub fn cmd_fit(cfg: &RunConfig, o: &Overrides) -> Result<Outcome> {
    let (manifest, offset) = match (&o.manifest, &cfg.fit) {
        (Some(m), sec) => (
            m.clone(),
            sec.as_ref().map_or(0.0, |s| s.attenuation_offset_db),
        ),
        (None, Some(sec)) => (sec.manifest.clone(), sec.attenuation_offset_db),
        (None, None) => {
            return Err(Error::Config(
                "fit needs a [fit] section or --manifest".into(),
            ))
        }
    };
    if !manifest.exists() {
        return Err(Error::Config(format!(
            "manifest '{}' does not exist",
            manifest.display()
        )));
    }
    let data = S11Dataset::from_manifest(&manifest, offset)?;
    let init = initial_guess(&data)?;
    let opts = FitOptions {
        lm: LmOptions {
            max_iterations: cfg.solver.fit_max_iterations,
            step_tolerance: cfg.solver.fit_step_tolerance,
            cost_tolerance: cfg.solver.fit_cost_tolerance,
            ..LmOptions::default()
        },
        ..FitOptions::default()
    };
    let r = nonlinear_fit_with(&data, &init, &opts)?;
    let path = summary(
        cfg,
        "fit_report",
        &json!({
            "params": params_hz(&r.params),
            "std_errors_hz": r.std_errors.map(|v| v / TWO_PI),
            "initial": params_hz(&init),
            "covariance_rad2_per_s2": r.covariance,
            "residual_rms": r.residual_rms,
            "per_trace_residuals": r.per_trace_residuals,
            "converged": r.converged,
            "iterations": r.iterations,
            "gamma3_at_bound": r.gamma3_at_bound,
        }),
    )?;
    Ok(Outcome {
        written: vec![path],
        converged: r.converged,
    })
}

/// Gate voltage and pump settings for a target band centre and gain.
pub fn cmd_tune(cfg: &RunConfig, o: &Overrides) -> Result<Outcome> {
    let device = cfg.device_model()?;
    let sec = cfg.tune;
    let target_f = o
        .target_frequency
        .or(sec.map(|s| s.target_freq_hz))
        .ok_or_else(|| Error::Config("tune needs a [tune] section or --target-freq".into()))?;
    let target_g = o
        .target_gain
        .or(sec.map(|s| s.target_gain_db))
        .ok_or_else(|| Error::Config("tune needs a [tune] section or --target-gain".into()))?;
    let t = tune_operating_point(&device, target_f, target_g)?;
    let op = &t.operating_point;
    let path = summary(
        cfg,
        "tune",
        &json!({
            "gate_volt": t.gate_voltage,
            "params": params_hz(&op.params),
            "pump_hz": op.pump.frequency,
            "pump_dbm": op.pump.dbm(),
            "fraction_of_critical": op.fraction_of_critical,
            "peak_gain_db": t.peak_gain_db,
            "bandwidth_3db_hz": t.bandwidth_3db,
        }),
    )?;
    Ok(Outcome::done(vec![path]))
}
