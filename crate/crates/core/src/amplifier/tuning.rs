use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{peak_response, PumpOperatingPoint};
use crate::constants::TWO_PI;
use crate::device::DeviceModel;
use crate::dynamics::KerrResonatorParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningOptions {
    pub grid: usize,
    pub refine_iterations: usize,
    /// Upper end of the pump detuning search, in units of γ.
    pub max_detuning: f64,
    pub min_fraction: f64,
    pub max_fraction: f64,
}

impl Default for TuningOptions {
    fn default() -> Self {
        Self {
            grid: 32,
            refine_iterations: 20,
            max_detuning: 3.0,
            min_fraction: 0.5,
            max_fraction: 0.99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunedOperatingPoint {
    pub gate_voltage: f64,
    pub operating_point: PumpOperatingPoint,
    pub peak_gain_db: f64,
    /// Hz.
    pub bandwidth_3db: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    detuning: f64,
    fraction: f64,
    gain: f64,
    bandwidth: f64,
}

fn evaluate(params: &KerrResonatorParams, detuning: f64, fraction: f64) -> Option<Candidate> {
    let fp = (params.omega_r - detuning) / TWO_PI;
    let op = PumpOperatingPoint::build(*params, fp, fraction).ok()?;
    let peak = peak_response(&op);
    Some(Candidate {
        detuning,
        fraction,
        gain: peak.gain_db,
        bandwidth: peak.bandwidth_3db.unwrap_or(0.0),
    })
}

// feasible beats infeasible; among feasible the wider band wins, otherwise the higher gain
fn better(a: &Candidate, b: &Candidate, target: f64) -> bool {
    match (a.gain >= target, b.gain >= target) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.bandwidth > b.bandwidth,
        (false, false) => a.gain > b.gain,
    }
}

/// Choose the gate voltage that puts the resonance at `target_freq` (Hz),
/// then the pump detuning and power that maximize the −3 dB bandwidth while
/// reaching `target_gain` dB.
pub fn tune_operating_point(
    device: &DeviceModel,
    target_freq: f64,
    target_gain: f64,
) -> Result<TunedOperatingPoint> {
    tune_operating_point_with(device, target_freq, target_gain, &TuningOptions::default())
}

pub fn tune_operating_point_with(
    device: &DeviceModel,
    target_freq: f64,
    target_gain: f64,
    opts: &TuningOptions,
) -> Result<TunedOperatingPoint> {
    let f0 = device.embedding.bare_frequency;
    if target_freq > f0 {
        return Err(Error::Infeasible(format!(
            "target {target_freq:.6e} Hz lies above the bare resonance {f0:.6e} Hz"
        )));
    }
    let gates = device.gates_for_frequency(target_freq)?;
    if gates.is_empty() {
        return Err(Error::Infeasible(format!(
            "no gate voltage in range tunes the resonance to {target_freq:.6e} Hz"
        )));
    }
    // flattest df/dV_g is least sensitive to gate noise
    let (lo, hi) = device.junction.gate_range();
    let h = 1e-4 * (hi - lo);
    let slope = |v: f64| -> Result<f64> {
        let a = (v - h).max(lo);
        let b = (v + h).min(hi);
        Ok(((device.resonance_frequency(b)? - device.resonance_frequency(a)?) / (b - a)).abs())
    };
    let mut gate = gates[0];
    let mut best_slope = slope(gate)?;
    for &v in &gates[1..] {
        let s = slope(v)?;
        if s < best_slope {
            gate = v;
            best_slope = s;
        }
    }
    let params = device.resonator_params(gate)?;
    if params.kerr == 0.0 {
        return Err(Error::Infeasible(
            "Kerr coefficient is zero; no parametric gain".into(),
        ));
    }
    let side = -params.kerr.signum();
    let g = params.total_linear_loss();
    let n = opts.grid.max(2);
    let det_at = |k: usize| side * opts.max_detuning * g * k as f64 / (n - 1) as f64;
    let frac_at = |k: usize| {
        opts.min_fraction + (opts.max_fraction - opts.min_fraction) * k as f64 / (n - 1) as f64
    };
    let grid: Vec<Candidate> = (0..n * n)
        .into_par_iter()
        .filter_map(|idx| evaluate(&params, det_at(idx / n), frac_at(idx % n)))
        .collect();
    let mut best = *grid
        .iter()
        .reduce(|a, b| if better(b, a, target_gain) { b } else { a })
        .ok_or_else(|| Error::Infeasible("no valid pump settings on the search grid".into()))?;

    let mut step_det = opts.max_detuning * g / (n - 1) as f64;
    let mut step_frac = (opts.max_fraction - opts.min_fraction) / (n - 1) as f64;
    for _ in 0..opts.refine_iterations {
        let mut improved = false;
        for (dd, df) in [
            (step_det, 0.0),
            (-step_det, 0.0),
            (0.0, step_frac),
            (0.0, -step_frac),
        ] {
            let det = best.detuning + side * dd;
            let frac = best.fraction + df;
            if side * det < 0.0 || side * det > opts.max_detuning * g {
                continue;
            }
            if frac < opts.min_fraction || frac > opts.max_fraction {
                continue;
            }
            if let Some(c) = evaluate(&params, det, frac) {
                if better(&c, &best, target_gain) {
                    best = c;
                    improved = true;
                }
            }
        }
        if !improved {
            step_det /= 2.0;
            step_frac /= 2.0;
        }
    }
    if best.gain < target_gain {
        return Err(Error::GainUnreachable {
            target_db: target_gain,
            best_db: best.gain,
        });
    }
    let fp = (params.omega_r - best.detuning) / TWO_PI;
    Ok(TunedOperatingPoint {
        gate_voltage: gate,
        operating_point: PumpOperatingPoint::new(params, fp, best.fraction)?,
        peak_gain_db: best.gain,
        bandwidth_3db: best.bandwidth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplifier::{gain_curve, suggested_span};
    use crate::device::{calibrate_embedding, JunctionModel, KerrLaw};

    fn device() -> DeviceModel {
        let table = vec![
            (-10.0, 0.40e-6),
            (-6.0, 0.25e-6),
            (-3.0, 0.10e-6),
            (0.0, 0.35e-6),
            (3.0, 0.60e-6),
            (6.0, 0.85e-6),
            (9.0, 1.05e-6),
            (12.0, 1.20e-6),
            (15.0, 1.30e-6),
            (18.0, 1.55e-6),
            (20.0, 1.75e-6),
        ];
        let junction = JunctionModel::new(table, 1.0e3, None).unwrap();
        let emb = calibrate_embedding(6.44e9, 5.849e9, 1.3e-6)
            .unwrap()
            .with_rates(TWO_PI * 11.0e6, TWO_PI * 0.95e6)
            .unwrap();
        let kerr = KerrLaw::ParticipationCubic {
            reference_gate: 15.0,
            reference_kerr: -TWO_PI * 135e3,
        };
        DeviceModel::new(junction, emb, kerr, TWO_PI * 11e3)
    }

    #[test]
    fn reaches_target_gain_inside_band() {
        let d = device();
        let t = tune_operating_point(&d, 5.7e9, 15.0).unwrap();
        assert!((d.resonance_frequency(t.gate_voltage).unwrap() - 5.7e9).abs() < 1.0);
        let op = t.operating_point;
        let c = gain_curve(&op, suggested_span(&op), 4001).unwrap();
        assert!(c.peak_gain >= 15.0 - 0.01, "{}", c.peak_gain);
        assert!(t.peak_gain_db >= 15.0);
    }

    #[test]
    fn above_bare_frequency_is_infeasible() {
        assert!(matches!(
            tune_operating_point(&device(), 6.5e9, 15.0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn unreachable_gain_reports_best() {
        let opts = TuningOptions {
            grid: 6,
            refine_iterations: 2,
            max_fraction: 0.6,
            ..TuningOptions::default()
        };
        match tune_operating_point_with(&device(), 5.7e9, 40.0, &opts) {
            Err(Error::GainUnreachable { best_db, .. }) => assert!(best_db < 40.0 && best_db > 0.0),
            other => panic!("{other:?}"),
        }
    }
}
