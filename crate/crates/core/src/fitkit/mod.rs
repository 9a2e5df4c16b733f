//! Extraction of `(ω_r, γ1, γ2, γ3, K)` from complex reflection traces taken
//! at several drive powers.
//!
//! The pipeline is [`linear_prefit`] on the weakest trace, [`kerr_seed`] from
//! the power dependence of the dip, then [`nonlinear_fit`] over all traces at
//! once with the hysteresis-aware forward model of [`crate::dynamics::sweep_trace`].

mod fit;
pub mod lm;
mod prefit;
#[cfg(test)]
mod properties;
mod synth;

pub use fit::{initial_guess, nonlinear_fit, nonlinear_fit_with, FitOptions, FitReport};
pub use prefit::{kerr_seed, linear_prefit, LinearEstimate};
pub use synth::synthesize;

use std::path::Path;

use num_complex::Complex64;

use crate::dynamics::Direction;
use crate::error::{Error, Result};
use crate::io::{
    read_manifest, read_s11_trace, s11_csv, write_manifest, write_text, ManifestEntry,
};

/// One measured trace at fixed drive power.
#[derive(Debug, Clone, PartialEq)]
pub struct S11Trace {
    pub power_dbm: f64,
    pub direction: Direction,
    /// Hz, strictly ascending.
    pub frequencies: Vec<f64>,
    pub s11: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct S11Dataset {
    pub traces: Vec<S11Trace>,
    /// Added to every trace power to obtain the power at the sample.
    pub attenuation_offset_db: f64,
}

impl S11Dataset {
    pub fn new(traces: Vec<S11Trace>, attenuation_offset_db: f64) -> Result<Self> {
        let d = Self {
            traces,
            attenuation_offset_db,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.traces.is_empty() {
            return Err(Error::Arity {
                expected: 1,
                got: 0,
            });
        }
        if !self.attenuation_offset_db.is_finite() {
            return Err(Error::Precondition(
                "attenuation offset must be finite".into(),
            ));
        }
        for (k, t) in self.traces.iter().enumerate() {
            if t.frequencies.len() != t.s11.len() || t.frequencies.len() < 3 {
                return Err(Error::Precondition(format!(
                    "trace {k}: need at least 3 points and matching frequency/S11 lengths"
                )));
            }
            if t.frequencies.windows(2).any(|w| !(w[1] > w[0])) || !(t.frequencies[0] > 0.0) {
                return Err(Error::Precondition(format!(
                    "trace {k}: frequency grid must be positive and strictly ascending"
                )));
            }
            if !t.power_dbm.is_finite() || t.s11.iter().any(|s| !s.is_finite()) {
                return Err(Error::Precondition(format!("trace {k}: non-finite value")));
            }
        }
        Ok(())
    }

    /// Number of distinct drive powers.
    pub fn distinct_powers(&self) -> usize {
        let mut p: Vec<f64> = self.traces.iter().map(|t| t.power_dbm).collect();
        p.sort_by(f64::total_cmp);
        p.dedup();
        p.len()
    }

    /// The trace with the lowest drive power.
    pub fn weakest(&self) -> &S11Trace {
        self.traces
            .iter()
            .min_by(|a, b| a.power_dbm.total_cmp(&b.power_dbm))
            .expect("validated dataset is non-empty")
    }

    pub fn sample_power_dbm(&self, trace: &S11Trace) -> f64 {
        trace.power_dbm + self.attenuation_offset_db
    }

    pub fn point_count(&self) -> usize {
        self.traces.iter().map(|t| t.s11.len()).sum()
    }

    /// Load every trace listed in a manifest.
    pub fn from_manifest(path: impl AsRef<Path>, attenuation_offset_db: f64) -> Result<Self> {
        let traces = read_manifest(path)?
            .into_iter()
            .map(|e| {
                let (frequencies, s11) = read_s11_trace(&e.path)?;
                Ok(S11Trace {
                    power_dbm: e.power_dbm,
                    direction: e.direction,
                    frequencies,
                    s11,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(traces, attenuation_offset_db)
    }

    /// Write `trace_NNN.csv` files plus `manifest.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let mut entries = Vec::with_capacity(self.traces.len());
        for (k, t) in self.traces.iter().enumerate() {
            let name = format!("trace_{k:03}.csv");
            write_text(dir.join(&name), &s11_csv(&t.frequencies, &t.s11))?;
            entries.push(ManifestEntry {
                power_dbm: t.power_dbm,
                direction: t.direction,
                path: name.into(),
            });
        }
        write_manifest(dir.join("manifest.json"), &entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::KerrResonatorParams;

    #[test]
    fn manifest_round_trip() {
        let p = KerrResonatorParams::from_hz(5.849e9, 11e6, 0.95e6, 11e3, -135e3).unwrap();
        let freqs: Vec<f64> = (0..51).map(|k| 5.80e9 + k as f64 * 2e6).collect();
        let d = synthesize(&p, &[-130.0, -120.0], &freqs, Direction::Up, None, 0, 0.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.write(dir.path()).unwrap();
        let back = S11Dataset::from_manifest(dir.path().join("manifest.json"), 0.0).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn rejects_mismatched_lengths() {
        let t = S11Trace {
            power_dbm: -120.0,
            direction: Direction::Up,
            frequencies: vec![1.0, 2.0, 3.0],
            s11: vec![Complex64::new(1.0, 0.0); 2],
        };
        assert!(S11Dataset::new(vec![t], 0.0).is_err());
        assert!(S11Dataset::new(vec![], 0.0).is_err());
    }
}
