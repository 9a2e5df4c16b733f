//! Four-wave-mixing gain around a pumped steady state.
//!
//! A pump at `f_p` holds the resonator in a stable steady state `α`. A weak
//! signal at `f_s = f_p + δ/2π` then produces an idler at `2f_p − f_s`; both
//! follow from the fluctuation matrix `M(δ)` shared with [`crate::dynamics`].

mod compression;
mod gain;
mod tuning;

pub use compression::{
    compression_curve, compression_curve_with, CompressionCurve, HarmonicBalanceOptions, ThreeTone,
};
pub use gain::{
    gain_bandwidth_product, gain_curve, gain_curve_with, operating_point_for_gain, peak_response,
    suggested_span, GainCurve, GainOptions, PeakResponse,
};
pub use tuning::{
    tune_operating_point, tune_operating_point_with, TunedOperatingPoint, TuningOptions,
};

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::TWO_PI;
use crate::dynamics::{
    critical_flux_at, fluctuation_matrix, select_state, steady_states_at, BranchRule, DriveTone,
    KerrResonatorParams, Mat2, SteadyState,
};
use crate::error::{Error, Result};

/// Number of geometric steps in the pump-on power ramp.
const RAMP_STEPS: usize = 64;

/// A pumped, stable steady state used as the amplifier bias point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpOperatingPoint {
    pub params: KerrResonatorParams,
    pub pump: DriveTone,
    pub state: SteadyState,
    /// Pump flux over the flux at which the pumped branch stops existing.
    pub fraction_of_critical: f64,
}

impl PumpOperatingPoint {
    /// Pump at `pump_frequency` (Hz) with flux `fraction` × critical.
    ///
    /// The critical flux is where the branch reached by ramping the pump up
    /// from zero ends: the low-branch fold past the cusp, otherwise the
    /// global bifurcation flux.
    pub fn new(params: KerrResonatorParams, pump_frequency: f64, fraction: f64) -> Result<Self> {
        if fraction > 0.99 && fraction < 1.0 {
            warn!(
                "pump at {:.4} of critical power; gain is extremely sensitive here",
                fraction
            );
        }
        Self::build(params, pump_frequency, fraction)
    }

    /// Operating point for an explicit pump tone.
    pub fn with_pump(params: KerrResonatorParams, pump: DriveTone) -> Result<Self> {
        let crit = critical_flux_at(&params, params.detuning(pump.frequency))?;
        Self::new(params, pump.frequency, pump.photon_flux() / crit)
    }

    pub(crate) fn build(
        params: KerrResonatorParams,
        pump_frequency: f64,
        fraction: f64,
    ) -> Result<Self> {
        params.validate()?;
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::Precondition(format!(
                "fraction of critical power must lie in [0, 1), got {fraction}"
            )));
        }
        let detuning = params.detuning(pump_frequency);
        let flux = fraction * critical_flux_at(&params, detuning)?;
        let state = ramp_up(&params, detuning, flux);
        if !state.stable {
            return Err(Error::Precondition("pumped state is not stable".into()));
        }
        Ok(Self {
            params,
            pump: DriveTone::from_flux(pump_frequency, flux)?,
            state,
            fraction_of_critical: fraction,
        })
    }

    /// `Δ_p = ω_r − ω_p`.
    pub fn pump_detuning(&self) -> f64 {
        self.params.detuning(self.pump.frequency)
    }

    pub fn photon_number(&self) -> f64 {
        self.state.photon_number
    }

    /// Signal and idler reflection amplitudes at signal offset `δ` (rad/s),
    /// or `None` exactly at a singular point.
    pub fn response(&self, delta: f64) -> Option<(Complex64, Complex64)> {
        let m = linear_response_matrix(self, delta);
        let det = m.det();
        if det == Complex64::new(0.0, 0.0) || !det.is_finite() {
            return None;
        }
        let g1 = self.params.gamma1;
        let s = Complex64::new(1.0, 0.0) - g1 * m.0[1][1] / det;
        let i = g1 * m.0[1][0] / det;
        Some((s, i))
    }

    /// Signal frequency (Hz) at offset `δ`.
    pub fn signal_frequency(&self, delta: f64) -> f64 {
        self.pump.frequency + delta / TWO_PI
    }

    /// Idler frequency `2f_p − f_s`.
    pub fn idler_frequency(&self, signal_frequency: f64) -> f64 {
        2.0 * self.pump.frequency - signal_frequency
    }
}

fn ramp_up(params: &KerrResonatorParams, detuning: f64, flux: f64) -> SteadyState {
    let mut state = steady_states_at(params, detuning, 0.0)[0];
    if flux <= 0.0 {
        return state;
    }
    for k in 1..=RAMP_STEPS {
        let step_flux = flux * 1e-4f64.powf(1.0 - k as f64 / RAMP_STEPS as f64);
        let step_flux = if k == RAMP_STEPS { flux } else { step_flux };
        state = select_state(
            &steady_states_at(params, detuning, step_flux),
            BranchRule::NearestStable(state.photon_number),
        );
    }
    state
}

/// `M(δ)` about the pump state; see [`fluctuation_matrix`].
pub fn linear_response_matrix(op: &PumpOperatingPoint, delta: f64) -> Mat2 {
    fluctuation_matrix(&op.params, op.pump_detuning(), op.state.amplitude, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{bifurcation_point, folds_at};

    pub(crate) fn amp_device() -> KerrResonatorParams {
        KerrResonatorParams::from_hz(5.885e9, 11.0e6, 0.95e6, 11e3, -111e3).unwrap()
    }

    #[test]
    fn fraction_is_relative_to_low_branch_fold() {
        let p = amp_device();
        let op = PumpOperatingPoint::new(p, 5.860e9, 0.95).unwrap();
        let fold = folds_at(&p, op.pump_detuning()).unwrap();
        let ratio = op.pump.photon_flux() / fold.low_branch_end_flux;
        assert!((ratio - 0.95).abs() < 1e-12);
        assert!(op.state.stable);
        assert!(op.photon_number() < fold.low_branch_end_n);
        // near the quoted at-sample pump level
        assert!((op.pump.dbm() + 103.0).abs() < 1.0, "{}", op.pump.dbm());
    }

    #[test]
    fn rejects_fraction_at_or_above_one() {
        let p = amp_device();
        assert!(PumpOperatingPoint::new(p, 5.860e9, 1.0).is_err());
        assert!(PumpOperatingPoint::new(p, 5.860e9, -0.1).is_err());
    }

    #[test]
    fn explicit_pump_round_trip() {
        let p = amp_device();
        let a = PumpOperatingPoint::new(p, 5.860e9, 0.8).unwrap();
        let b = PumpOperatingPoint::with_pump(p, a.pump).unwrap();
        assert!((a.fraction_of_critical - b.fraction_of_critical).abs() < 1e-12);
        assert!((a.state.amplitude - b.state.amplitude).norm() < 1e-9 * a.state.amplitude.norm());
    }

    #[test]
    fn determinant_vanishes_toward_the_fold() {
        let p = amp_device();
        let dets: Vec<f64> = [0.9, 0.99, 0.999, 0.99999]
            .iter()
            .map(|&f| {
                linear_response_matrix(&PumpOperatingPoint::build(p, 5.860e9, f).unwrap(), 0.0)
                    .det()
                    .norm()
            })
            .collect();
        assert!(dets.windows(2).all(|w| w[1] < w[0]));
        // det M(0) at n = 0 is Δ² + γ²/4
        let det_p = p.detuning(5.860e9);
        let scale = det_p * det_p + p.total_linear_loss().powi(2) / 4.0;
        assert!(dets[3] < 1e-2 * scale);
        // same limit at the cusp
        let b = bifurcation_point(&p).unwrap();
        let f_cusp = (p.omega_r - b.critical_detuning) / TWO_PI;
        let op = PumpOperatingPoint::build(p, f_cusp, 0.999_999).unwrap();
        let d = b.critical_detuning;
        let scale = d * d + p.total_linear_loss().powi(2) / 4.0;
        assert!(linear_response_matrix(&op, 0.0).det().norm() < 1e-2 * scale);
    }

    #[test]
    fn pump_off_recovers_linear_reflection() {
        let p = amp_device();
        let op = PumpOperatingPoint::new(p, 5.860e9, 0.0).unwrap();
        for delta in [-3e7, 0.0, 1e7, 1e8] {
            let (s, i) = op.response(delta).unwrap();
            let lin = crate::dynamics::linear_s11(&p, op.pump_detuning() - delta);
            assert!((s - lin).norm() < 1e-12);
            assert_eq!(i, Complex64::new(0.0, 0.0));
        }
    }
}
