//! Strict TOML run configuration. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::constants::TWO_PI;
use crate::device::{calibrate_embedding, DeviceModel, JunctionModel, KerrLaw};
use crate::dynamics::{Direction, KerrResonatorParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for commands that draw synthetic noise.
    #[serde(default)]
    pub seed: u64,
    pub device: Option<DeviceSection>,
    pub resonator: Option<ResonatorSection>,
    pub pump: Option<PumpSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    pub s11: Option<S11Section>,
    pub compression: Option<CompressionSection>,
    pub noise: Option<NoiseSection>,
    pub calibrate: Option<CalibrateSection>,
    pub synth: Option<SynthSection>,
    pub fit: Option<FitSection>,
    pub tune: Option<TuneSection>,
}

/// Gate-tunable device: junction table plus embedding calibration.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    /// CSV `vg_volt,ic_ampere`.
    pub ic_table: PathBuf,
    pub normal_resistance_ohm: f64,
    pub f0_hz: f64,
    pub ref_freq_hz: f64,
    pub ref_ic_ampere: f64,
    pub kerr_ref_gate_volt: f64,
    pub kerr_ref_hz: f64,
    pub gamma1_hz: f64,
    pub gamma2_hz: f64,
    pub gamma3_hz: f64,
    /// Gate used when no `[resonator]` section is given.
    pub gate_volt: Option<f64>,
}

/// Explicit resonator parameters, all in Hz.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSection {
    pub f_r_hz: f64,
    pub gamma1_hz: f64,
    pub gamma2_hz: f64,
    pub gamma3_hz: f64,
    pub kerr_hz: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSection {
    pub frequency_hz: f64,
    /// Pump power over the critical power at the pump detuning.
    pub fraction: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub gain_ceiling_db: f64,
    pub gain_points: usize,
    pub gain_span_hz: Option<f64>,
    pub sweep_points: usize,
    pub sweep_span_hz: Option<f64>,
    pub freqmap_points: usize,
    pub hb_tolerance: f64,
    pub hb_max_iterations: usize,
    pub fit_max_iterations: usize,
    pub fit_step_tolerance: f64,
    pub fit_cost_tolerance: f64,
    pub threads: Option<usize>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            gain_ceiling_db: 60.0,
            gain_points: 2001,
            gain_span_hz: None,
            sweep_points: 401,
            sweep_span_hz: None,
            freqmap_points: 301,
            hb_tolerance: 1e-10,
            hb_max_iterations: 200,
            fit_max_iterations: 200,
            fit_step_tolerance: 1e-8,
            fit_cost_tolerance: 1e-10,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct S11Section {
    pub powers_dbm: Vec<f64>,
    #[serde(default = "default_direction")]
    pub direction: Direction,
}

fn default_direction() -> Direction {
    Direction::Up
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionSection {
    /// Signal frequency minus pump frequency.
    pub signal_offset_hz: f64,
    pub start_dbm: f64,
    pub stop_dbm: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub hemt_quanta: f64,
    pub span_hz: Option<f64>,
    #[serde(default = "default_noise_points")]
    pub points: usize,
}

fn default_noise_points() -> usize {
    801
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    /// CSV `bias_volt,psd_watt`.
    pub psd_table: PathBuf,
    pub temperature_k: f64,
    pub frequency_hz: f64,
    pub bandwidth_hz: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub powers_dbm: Option<Vec<f64>>,
    /// Alternative to `powers_dbm`: fractions of the global critical flux.
    pub fractions_of_critical: Option<Vec<f64>>,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub attenuation_offset_db: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// JSON list of `{power_dbm, direction, path}`.
    pub manifest: PathBuf,
    #[serde(default)]
    pub attenuation_offset_db: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneSection {
    pub target_freq_hz: f64,
    pub target_gain_db: f64,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn must_exist(p: &Path, what: &str) -> Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{what} '{}' does not exist",
            p.display()
        )))
    }
}

impl RunConfig {
    /// Parse and validate; relative paths resolve against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read '{}': {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output.directory);
        if let Some(d) = &mut self.device {
            resolve(base, &mut d.ic_table);
        }
        if let Some(c) = &mut self.calibrate {
            resolve(base, &mut c.psd_table);
        }
        if let Some(f) = &mut self.fit {
            resolve(base, &mut f.manifest);
        }
    }

    /// Input files are checked here; the fit manifest is checked when the fit
    /// command runs, since `synth` may produce it.
    pub fn validate(&self) -> Result<()> {
        let s = &self.solver;
        let positive = [
            ("solver.hb_tolerance", s.hb_tolerance),
            ("solver.fit_step_tolerance", s.fit_step_tolerance),
            ("solver.fit_cost_tolerance", s.fit_cost_tolerance),
            ("solver.gain_ceiling_db", s.gain_ceiling_db),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, n) in [
            ("solver.gain_points", s.gain_points),
            ("solver.sweep_points", s.sweep_points),
            ("solver.freqmap_points", s.freqmap_points),
        ] {
            if n < 3 {
                return Err(Error::Config(format!("{name} must be >= 3, got {n}")));
            }
        }
        if s.hb_max_iterations == 0 || s.fit_max_iterations == 0 || s.threads == Some(0) {
            return Err(Error::Config(
                "iteration limits and thread count must be >= 1".into(),
            ));
        }
        for span in [s.gain_span_hz, s.sweep_span_hz].into_iter().flatten() {
            if !(span > 0.0) {
                return Err(Error::Config(format!("spans must be > 0, got {span}")));
            }
        }
        if let Some(d) = &self.device {
            must_exist(&d.ic_table, "device.ic_table")?;
        }
        if let Some(c) = &self.calibrate {
            must_exist(&c.psd_table, "calibrate.psd_table")?;
        }
        if let Some(c) = &self.compression {
            if c.points < 2 || !(c.stop_dbm > c.start_dbm) {
                return Err(Error::Config(
                    "compression needs points >= 2 and stop_dbm > start_dbm".into(),
                ));
            }
        }
        if let Some(syn) = &self.synth {
            if syn.powers_dbm.is_some() == syn.fractions_of_critical.is_some() {
                return Err(Error::Config(
                    "synth needs exactly one of powers_dbm and fractions_of_critical".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn device_model(&self) -> Result<DeviceModel> {
        let d = self
            .device
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a [device] section".into()))?;
        let junction = JunctionModel::from_csv(&d.ic_table, d.normal_resistance_ohm, None)?;
        let embedding = calibrate_embedding(d.f0_hz, d.ref_freq_hz, d.ref_ic_ampere)?
            .with_rates(TWO_PI * d.gamma1_hz, TWO_PI * d.gamma2_hz)?;
        let kerr = KerrLaw::ParticipationCubic {
            reference_gate: d.kerr_ref_gate_volt,
            reference_kerr: TWO_PI * d.kerr_ref_hz,
        };
        Ok(DeviceModel::new(
            junction,
            embedding,
            kerr,
            TWO_PI * d.gamma3_hz,
        ))
    }

    /// `[resonator]` if present, otherwise the device at `gate` (or `device.gate_volt`).
    pub fn resonator_params(&self, gate: Option<f64>) -> Result<KerrResonatorParams> {
        if let (Some(r), None) = (&self.resonator, gate) {
            return KerrResonatorParams::from_hz(
                r.f_r_hz,
                r.gamma1_hz,
                r.gamma2_hz,
                r.gamma3_hz,
                r.kerr_hz,
            );
        }
        let gate = gate
            .or(self.device.as_ref().and_then(|d| d.gate_volt))
            .ok_or_else(|| Error::Config("need a [resonator] section or a gate voltage".into()))?;
        self.device_model()?.resonator_params(gate)
    }

    pub fn pump(&self) -> Result<PumpSection> {
        self.pump
            .ok_or_else(|| Error::Config("this command needs a [pump] section".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<RunConfig> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        fs::write(&p, text).unwrap();
        RunConfig::load(&p)
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = load("seed = 3\n[resonator]\nf_r_hz = 5.885e9\ngamma1_hz = 11e6\ngamma2_hz = 0.95e6\ngamma3_hz = 11e3\nkerr_hz = -111e3\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.solver.gain_points, 2001);
        assert_eq!(c.output.format, OutputFormat::Csv);
        let p = c.resonator_params(None).unwrap();
        assert!((p.kerr / TWO_PI + 111e3).abs() < 1e-6);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(load("sed = 3\n"), Err(Error::Config(_))));
        assert!(matches!(
            load("[solver]\ngain_point = 5\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn bad_tolerance_and_missing_files() {
        assert!(load("[solver]\nhb_tolerance = 0.0\n").is_err());
        let dev = "[device]\nic_table = \"missing.csv\"\nnormal_resistance_ohm = 1e3\nf0_hz = 6.44e9\nref_freq_hz = 5.849e9\nref_ic_ampere = 1.3e-6\nkerr_ref_gate_volt = 15.0\nkerr_ref_hz = -135e3\ngamma1_hz = 11e6\ngamma2_hz = 0.95e6\ngamma3_hz = 11e3\n";
        assert!(matches!(load(dev), Err(Error::Config(_))));
    }
}
