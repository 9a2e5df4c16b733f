//! Gate-tunable junction and its lumped-element embedding in the resonator.
//!
//! The junction is described by a tabulated critical current `I_c(V_g)`; a
//! sinusoidal current-phase relation at zero phase bias gives the Josephson
//! inductance `L_J = Φ0 / (2π I_c)`, which adds in series with the bare
//! resonator inductance `L0` and lowers the resonance to
//! `f = 1 / (2π √((L0 + L_J) C))`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constants::{ELEMENTARY_CHARGE, FLUX_QUANTUM, TWO_PI};
use crate::dynamics::KerrResonatorParams;
use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;

/// Relative tolerance on the stored `(f0, L0, C)` triple.
const EMBEDDING_CONSISTENCY: f64 = 1e-9;
/// Below this value of `(f0/f_ref)^2 - 1` the calibration is reported infeasible.
const CALIBRATION_CONDITIONING: f64 = 1e-9;

/// `L_J = Φ0 / (2π I_c)`.
pub fn josephson_inductance(critical_current: f64) -> Result<f64> {
    if !(critical_current > 0.0) || !critical_current.is_finite() {
        return Err(Error::Domain(format!(
            "critical current must be positive and finite, got {critical_current}"
        )));
    }
    Ok(FLUX_QUANTUM / (TWO_PI * critical_current))
}

/// Gate-voltage dependent junction.
#[derive(Debug, Clone)]
pub struct JunctionModel {
    ic: MonotoneCubic,
    /// Normal-state resistance, ohm.
    pub normal_resistance: f64,
    /// Induced superconducting gap, joule.
    pub induced_gap: Option<f64>,
}

impl JunctionModel {
    /// `table` holds `(gate_voltage [V], critical_current [A])` pairs with
    /// strictly increasing gate voltage.
    pub fn new(
        table: Vec<(f64, f64)>,
        normal_resistance: f64,
        induced_gap: Option<f64>,
    ) -> Result<Self> {
        if let Some(&(v, i)) = table.iter().find(|(_, i)| !(*i > 0.0)) {
            return Err(Error::InvalidParams(format!(
                "critical current must be positive (got {i} A at {v} V)"
            )));
        }
        if !(normal_resistance >= 0.0) {
            return Err(Error::InvalidParams(
                "normal resistance must be >= 0".into(),
            ));
        }
        if let Some(gap) = induced_gap {
            if !(gap > 0.0) {
                return Err(Error::InvalidParams("induced gap must be > 0".into()));
            }
        }
        let (vs, is): (Vec<f64>, Vec<f64>) = table.into_iter().unzip();
        Ok(Self {
            ic: MonotoneCubic::new(vs, is)?,
            normal_resistance,
            induced_gap,
        })
    }

    /// Load an `vg_volt,ic_ampere` CSV table.
    pub fn from_csv(
        path: impl AsRef<Path>,
        normal_resistance: f64,
        induced_gap: Option<f64>,
    ) -> Result<Self> {
        let table = crate::io::read_ic_table(path)?;
        Self::new(table, normal_resistance, induced_gap)
    }

    pub fn gate_range(&self) -> (f64, f64) {
        self.ic.domain()
    }

    pub fn table(&self) -> Vec<(f64, f64)> {
        self.ic.knots().collect()
    }

    pub fn max_critical_current(&self) -> f64 {
        self.ic.knots().map(|(_, i)| i).fold(f64::MIN, f64::max)
    }

    pub fn min_critical_current(&self) -> f64 {
        self.ic.knots().map(|(_, i)| i).fold(f64::MAX, f64::min)
    }

    /// Interpolated critical current; no extrapolation outside the table.
    pub fn critical_current_at(&self, gate_voltage: f64) -> Result<f64> {
        self.ic.eval(gate_voltage)
    }

    /// `e R_n I_c / Δ`.
    pub fn rn_ic_quality(&self, gate_voltage: f64) -> Result<f64> {
        let gap = self
            .induced_gap
            .ok_or_else(|| Error::Unavailable("induced gap not provided".into()))?;
        let ic = self.critical_current_at(gate_voltage)?;
        Ok(rn_ic_ratio(self.normal_resistance, ic, gap))
    }
}

pub fn rn_ic_ratio(normal_resistance: f64, critical_current: f64, induced_gap: f64) -> f64 {
    ELEMENTARY_CHARGE * normal_resistance * critical_current / induced_gap
}

/// Bare resonator plus its coupling and internal loss rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorEmbedding {
    /// f0, Hz.
    pub bare_frequency: f64,
    /// L0, H.
    pub bare_inductance: f64,
    /// C, F.
    pub shunt_capacitance: f64,
    /// γ1, rad/s.
    pub coupling_rate: f64,
    /// γ2, rad/s.
    pub internal_rate: f64,
}

impl ResonatorEmbedding {
    pub fn new(
        bare_frequency: f64,
        bare_inductance: f64,
        shunt_capacitance: f64,
        coupling_rate: f64,
        internal_rate: f64,
    ) -> Result<Self> {
        let e = Self {
            bare_frequency,
            bare_inductance,
            shunt_capacitance,
            coupling_rate,
            internal_rate,
        };
        e.validate()?;
        Ok(e)
    }

    fn validate(&self) -> Result<()> {
        if !(self.bare_inductance > 0.0
            && self.shunt_capacitance > 0.0
            && self.bare_frequency > 0.0)
        {
            return Err(Error::InvalidParams("L0, C and f0 must be positive".into()));
        }
        let f = 1.0 / (TWO_PI * (self.bare_inductance * self.shunt_capacitance).sqrt());
        if ((f - self.bare_frequency) / self.bare_frequency).abs() > EMBEDDING_CONSISTENCY {
            return Err(Error::InvalidParams(format!(
                "1/(2π√(L0·C)) = {f} Hz disagrees with f0 = {} Hz",
                self.bare_frequency
            )));
        }
        if !(self.coupling_rate >= 0.0 && self.internal_rate >= 0.0) {
            return Err(Error::InvalidParams("γ1, γ2 must be >= 0".into()));
        }
        Ok(())
    }

    pub fn with_rates(mut self, coupling_rate: f64, internal_rate: f64) -> Result<Self> {
        self.coupling_rate = coupling_rate;
        self.internal_rate = internal_rate;
        self.validate()?;
        Ok(self)
    }

    /// Resonance with a Josephson inductance in series with `L0`.
    pub fn frequency_with(&self, josephson_inductance: f64) -> f64 {
        1.0 / (TWO_PI
            * ((self.bare_inductance + josephson_inductance) * self.shunt_capacitance).sqrt())
    }

    /// `L_J / (L0 + L_J)`.
    pub fn participation(&self, josephson_inductance: f64) -> f64 {
        josephson_inductance / (self.bare_inductance + josephson_inductance)
    }
}

/// Fix `(L0, C)` from the bare frequency and one measured `(f_ref, I_c,ref)` point.
///
/// Uses `L0 = L_J / ((f0/f_ref)^2 - 1)` and `C = 1 / ((2π f0)^2 L0)`. Rates are
/// left at zero; set them with [`ResonatorEmbedding::with_rates`].
pub fn calibrate_embedding(f0: f64, f_ref: f64, ic_ref: f64) -> Result<ResonatorEmbedding> {
    if !(f_ref > 0.0) || !(f0 > 0.0) {
        return Err(Error::Domain("frequencies must be positive".into()));
    }
    if f_ref >= f0 {
        return Err(Error::Infeasible(format!(
            "reference frequency {f_ref} Hz must lie below the bare frequency {f0} Hz"
        )));
    }
    let lj = josephson_inductance(ic_ref)?;
    let excess = (f0 / f_ref).powi(2) - 1.0;
    if excess < CALIBRATION_CONDITIONING {
        return Err(Error::Infeasible(format!(
            "f_ref/f0 = {} too close to 1 to resolve L0",
            f_ref / f0
        )));
    }
    let l0 = lj / excess;
    let c = 1.0 / ((TWO_PI * f0).powi(2) * l0);
    ResonatorEmbedding::new(f0, l0, c, 0.0, 0.0)
}

/// How the Kerr coefficient follows the gate voltage.
#[derive(Debug, Clone)]
pub enum KerrLaw {
    /// `K(V_g) = K_ref · (p(V_g)/p_ref)^3` with `p = L_J/(L0+L_J)`.
    ParticipationCubic {
        reference_gate: f64,
        reference_kerr: f64,
    },
    /// User-supplied `(V_g, K)` table, interpolated shape-preservingly.
    Table(MonotoneCubic),
}

#[derive(Debug, Clone)]
pub struct DeviceModel {
    pub junction: JunctionModel,
    pub embedding: ResonatorEmbedding,
    pub kerr: KerrLaw,
    /// γ3, rad/s; not gate dependent in this model.
    pub two_photon_loss: f64,
}

impl DeviceModel {
    pub fn new(
        junction: JunctionModel,
        embedding: ResonatorEmbedding,
        kerr: KerrLaw,
        two_photon_loss: f64,
    ) -> Self {
        Self {
            junction,
            embedding,
            kerr,
            two_photon_loss,
        }
    }

    pub fn josephson_inductance_at(&self, gate_voltage: f64) -> Result<f64> {
        josephson_inductance(self.junction.critical_current_at(gate_voltage)?)
    }

    /// Resonance frequency (Hz) at a gate voltage.
    pub fn resonance_frequency(&self, gate_voltage: f64) -> Result<f64> {
        Ok(self
            .embedding
            .frequency_with(self.josephson_inductance_at(gate_voltage)?))
    }

    pub fn participation_at(&self, gate_voltage: f64) -> Result<f64> {
        Ok(self
            .embedding
            .participation(self.josephson_inductance_at(gate_voltage)?))
    }

    /// Kerr coefficient (rad/s) at a gate voltage.
    pub fn kerr_at_gate(&self, gate_voltage: f64) -> Result<f64> {
        match &self.kerr {
            KerrLaw::ParticipationCubic {
                reference_gate,
                reference_kerr,
            } => {
                let p = self.participation_at(gate_voltage)?;
                let p_ref = self.participation_at(*reference_gate)?;
                Ok(reference_kerr * (p / p_ref).powi(3))
            }
            KerrLaw::Table(table) => table.eval(gate_voltage),
        }
    }

    /// Lower bound `f0 (1 + L_J,max/L0)^(-1/2)` on the tunable band.
    pub fn frequency_floor(&self) -> f64 {
        let lj_max = FLUX_QUANTUM / (TWO_PI * self.junction.min_critical_current());
        self.embedding.bare_frequency / (1.0 + lj_max / self.embedding.bare_inductance).sqrt()
    }

    /// Full Kerr-resonator parameter set at a gate voltage.
    pub fn resonator_params(&self, gate_voltage: f64) -> Result<KerrResonatorParams> {
        KerrResonatorParams::new(
            TWO_PI * self.resonance_frequency(gate_voltage)?,
            self.embedding.coupling_rate,
            self.embedding.internal_rate,
            self.two_photon_loss,
            self.kerr_at_gate(gate_voltage)?,
        )
    }

    /// Gate voltages where the resonance equals `target` (Hz), found by
    /// scanning the table and bisecting each bracket.
    pub fn gates_for_frequency(&self, target: f64) -> Result<Vec<f64>> {
        let (lo, hi) = self.junction.gate_range();
        const SCAN: usize = 2000;
        let grid: Vec<f64> = (0..=SCAN)
            .map(|i| lo + (hi - lo) * i as f64 / SCAN as f64)
            .collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&v| self.resonance_frequency(v).map(|f| f - target))
            .collect::<Result<_>>()?;
        let mut out = Vec::new();
        for i in 0..SCAN {
            let (a, b) = (vals[i], vals[i + 1]);
            if a == 0.0 {
                out.push(grid[i]);
            } else if a * b < 0.0 {
                let (mut x0, mut x1, mut f0) = (grid[i], grid[i + 1], a);
                for _ in 0..100 {
                    let xm = 0.5 * (x0 + x1);
                    let fm = self.resonance_frequency(xm)? - target;
                    if fm == 0.0 || (x1 - x0) < 1e-12 * (1.0 + xm.abs()) {
                        x0 = xm;
                        x1 = xm;
                        break;
                    }
                    if fm * f0 < 0.0 {
                        x1 = xm;
                    } else {
                        x0 = xm;
                        f0 = fm;
                    }
                }
                out.push(0.5 * (x0 + x1));
            }
        }
        if vals[SCAN] == 0.0 {
            out.push(grid[SCAN]);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle_lj(i: f64) -> f64 {
        // independent route: h/(2e) / (2π I)
        let h = 6.626_070_15e-34;
        let e = 1.602_176_634e-19;
        h / (2.0 * e) / (2.0 * std::f64::consts::PI * i)
    }

    #[test]
    fn josephson_inductance_values() {
        let l = josephson_inductance(1.3e-6).unwrap();
        assert!((l - 2.531e-10).abs() < 0.001e-10);
        assert!(((l - oracle_lj(1.3e-6)) / l).abs() < 1e-12);
        let l = josephson_inductance(100e-9).unwrap();
        assert!((l - 3.291e-9).abs() < 0.001e-9);
    }

    #[test]
    fn josephson_inductance_rejects_non_positive() {
        assert!(matches!(josephson_inductance(0.0), Err(Error::Domain(_))));
        assert!(matches!(josephson_inductance(-1e-6), Err(Error::Domain(_))));
        assert!(josephson_inductance(1e3).unwrap() < 1e-18);
    }

    #[test]
    fn product_invariant() {
        for i in [1e-9, 1e-7, 1.3e-6, 3e-5] {
            let prod = josephson_inductance(i).unwrap() * i;
            assert!(((prod - FLUX_QUANTUM / TWO_PI) / prod).abs() < 1e-15);
        }
    }

    #[test]
    fn interpolation_at_dirac_point() {
        let j = JunctionModel::new(vec![(-3.0, 100e-9), (15.0, 1.3e-6)], 100.0, None).unwrap();
        assert_eq!(j.critical_current_at(-3.0).unwrap(), 100e-9);
        let mid = j.critical_current_at(6.0).unwrap();
        assert!(mid > 100e-9 && mid < 1.3e-6);
        assert!(matches!(
            j.critical_current_at(16.0),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn junction_rejects_non_positive_current() {
        assert!(JunctionModel::new(vec![(0.0, 0.0), (1.0, 1e-6)], 1.0, None).is_err());
    }

    #[test]
    fn calibration_closed_form() {
        let e = calibrate_embedding(6.44e9, 5.849e9, 1.3e-6).unwrap();
        assert!((e.bare_inductance - 1.19e-9).abs() < 0.01e-9);
        let f = e.frequency_with(josephson_inductance(1.3e-6).unwrap());
        assert!(((f - 5.849e9) / 5.849e9).abs() < 1e-9);
        assert_eq!(e.frequency_with(0.0), e.bare_frequency);
        assert!(((e.frequency_with(0.0) - 6.44e9) / 6.44e9).abs() < 1e-9);
    }

    #[test]
    fn calibration_infeasible() {
        assert!(matches!(
            calibrate_embedding(6.0e9, 6.0e9, 1e-6),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            calibrate_embedding(6.0e9, 6.1e9, 1e-6),
            Err(Error::Infeasible(_))
        ));
        let eps = 1e-12;
        assert!(matches!(
            calibrate_embedding(6.0e9, 6.0e9 * (1.0 - eps), 1e-6),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn embedding_consistency_is_enforced() {
        let e = calibrate_embedding(6.44e9, 5.849e9, 1.3e-6).unwrap();
        assert!(ResonatorEmbedding::new(
            6.44e9,
            e.bare_inductance * 1.001,
            e.shunt_capacitance,
            0.0,
            0.0
        )
        .is_err());
        assert!(e.with_rates(-1.0, 0.0).is_err());
    }

    #[test]
    fn rn_ic_ratio_values() {
        let gap = 1.0e-23;
        let rn = 1.4 * gap / (ELEMENTARY_CHARGE * 1.0e-6);
        assert!((rn_ic_ratio(rn, 1.0e-6, gap) - 1.4).abs() < 1e-12);
        assert_eq!(rn_ic_ratio(rn, 0.0, gap), 0.0);
        assert!((rn_ic_ratio(2.0 * rn, 1.0e-6, gap) - 2.8).abs() < 1e-12);
        let j = JunctionModel::new(vec![(0.0, 1e-6), (1.0, 2e-6)], rn, None).unwrap();
        assert!(matches!(j.rn_ic_quality(0.5), Err(Error::Unavailable(_))));
    }
}
