//! Driven Kerr resonator with linear and two-photon losses in steady state.
//!
//! Conventions: `Δ = ω_r − ω_d`, a negative Kerr coefficient pulls the
//! resonance down with increasing photon number, the input amplitude is real
//! and positive, and the reflection is `S11 = 1 − √γ1 α / α_in`. The
//! intracavity photon number `n` solves
//!
//! ```text
//! n [(Δ + K n)² + (γ/2 + γ3 n)²] = γ1 Φ_in,      γ = γ1 + γ2
//! ```
//!
//! and the amplitude is `α = √γ1 α_in / (i(Δ + K n) + γ/2 + γ3 n)`.

mod cubic;
pub mod linearize;
mod sweep;

pub use cubic::real_roots;
pub use linearize::{fluctuation_matrix, is_stable, jacobian_eigenvalues, Mat2};
pub use sweep::{sweep_trace, sweep_trace_single, Direction, Trace};

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{dbm_to_watt, watt_to_dbm, PLANCK, TWO_PI};
use crate::error::{Error, Result};

/// `(ω_r, γ1, γ2, γ3, K)`, all in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KerrResonatorParams {
    pub omega_r: f64,
    /// External coupling rate.
    pub gamma1: f64,
    /// Internal linear loss rate.
    pub gamma2: f64,
    /// Two-photon loss rate.
    pub gamma3: f64,
    /// Signed Kerr coefficient.
    pub kerr: f64,
}

impl KerrResonatorParams {
    pub fn new(omega_r: f64, gamma1: f64, gamma2: f64, gamma3: f64, kerr: f64) -> Result<Self> {
        let p = Self {
            omega_r,
            gamma1,
            gamma2,
            gamma3,
            kerr,
        };
        p.validate()?;
        let ratio = p.kerr.abs() / p.omega_r;
        if p.kerr != 0.0 && !(1e-6..=1e-2).contains(&ratio) {
            warn!("|K|/ω_r = {ratio:.3e} lies outside the typical range [1e-6, 1e-2]");
        }
        Ok(p)
    }

    /// Build from ordinary frequencies in Hz (each value is multiplied by 2π).
    pub fn from_hz(f_r: f64, gamma1: f64, gamma2: f64, gamma3: f64, kerr: f64) -> Result<Self> {
        Self::new(
            TWO_PI * f_r,
            TWO_PI * gamma1,
            TWO_PI * gamma2,
            TWO_PI * gamma3,
            TWO_PI * kerr,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.omega_r,
            self.gamma1,
            self.gamma2,
            self.gamma3,
            self.kerr,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(
                "non-finite resonator parameter".into(),
            ));
        }
        if !(self.omega_r > 0.0) {
            return Err(Error::InvalidParams("ω_r must be > 0".into()));
        }
        if !(self.gamma1 > 0.0) {
            return Err(Error::InvalidParams("γ1 must be > 0".into()));
        }
        if self.gamma2 < 0.0 || self.gamma3 < 0.0 {
            return Err(Error::InvalidParams("γ2 and γ3 must be >= 0".into()));
        }
        Ok(())
    }

    /// `γ = γ1 + γ2`.
    pub fn total_linear_loss(&self) -> f64 {
        self.gamma1 + self.gamma2
    }

    /// `|K| / ω_r`.
    pub fn kerr_ratio(&self) -> f64 {
        self.kerr.abs() / self.omega_r
    }

    /// Detuning `ω_r − ω_d` of a drive at `frequency` Hz.
    pub fn detuning(&self, frequency: f64) -> f64 {
        self.omega_r - TWO_PI * frequency
    }

    /// Coefficients `(c3, c2, c1)` of `n[(Δ+Kn)² + (γ/2+γ3n)²] = c3 n³ + c2 n² + c1 n`.
    pub fn response_coefficients(&self, detuning: f64) -> (f64, f64, f64) {
        let g = self.total_linear_loss();
        (
            self.kerr * self.kerr + self.gamma3 * self.gamma3,
            2.0 * detuning * self.kerr + g * self.gamma3,
            detuning * detuning + g * g / 4.0,
        )
    }

    /// `n[(Δ+Kn)² + (γ/2+γ3n)²] / γ1`, the input flux that sustains `n` photons.
    pub fn flux_for_photons(&self, detuning: f64, n: f64) -> f64 {
        let g = self.total_linear_loss();
        n * ((detuning + self.kerr * n).powi(2) + (g / 2.0 + self.gamma3 * n).powi(2)) / self.gamma1
    }
}

/// A coherent drive tone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveTone {
    /// Hz.
    pub frequency: f64,
    /// W.
    pub power: f64,
}

impl DriveTone {
    pub fn new(frequency: f64, power: f64) -> Result<Self> {
        if !(frequency > 0.0) || !(power >= 0.0) || !power.is_finite() {
            return Err(Error::InvalidParams(format!(
                "drive needs frequency > 0 and power >= 0 (got {frequency} Hz, {power} W)"
            )));
        }
        Ok(Self { frequency, power })
    }

    pub fn from_dbm(frequency: f64, dbm: f64) -> Result<Self> {
        Self::new(frequency, dbm_to_watt(dbm))
    }

    /// Tone carrying `flux` photons per second.
    pub fn from_flux(frequency: f64, flux: f64) -> Result<Self> {
        Self::new(frequency, flux * PLANCK * frequency)
    }

    /// Photons per second, `P / (ħ ω)`.
    pub fn photon_flux(&self) -> f64 {
        self.power / (PLANCK * self.frequency)
    }

    pub fn dbm(&self) -> f64 {
        watt_to_dbm(self.power)
    }

    pub fn angular_frequency(&self) -> f64 {
        TWO_PI * self.frequency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Low,
    Middle,
    High,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Low => "low",
            Branch::Middle => "middle",
            Branch::High => "high",
        }
    }
}

/// One steady-state solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    /// Intracavity amplitude α, √photons.
    pub amplitude: Complex64,
    /// `|α|²`.
    pub photon_number: f64,
    pub stable: bool,
    pub branch: Branch,
}

impl SteadyState {
    fn new(p: &KerrResonatorParams, detuning: f64, flux: f64, n: f64, branch: Branch) -> Self {
        let denom = Complex64::new(
            p.total_linear_loss() / 2.0 + p.gamma3 * n,
            detuning + p.kerr * n,
        );
        let amplitude = (p.gamma1 * flux).sqrt() / denom;
        Self {
            amplitude,
            photon_number: amplitude.norm_sqr(),
            stable: is_stable(p, detuning, amplitude),
            branch,
        }
    }
}

/// Photon-number roots of the steady-state cubic, ascending.
pub fn photon_roots(p: &KerrResonatorParams, detuning: f64, flux: f64) -> Vec<f64> {
    if flux <= 0.0 {
        return vec![0.0];
    }
    let (c3, c2, c1) = p.response_coefficients(detuning);
    let c0 = -p.gamma1 * flux;
    if c3 == 0.0 {
        return vec![-c0 / c1];
    }
    // n = scale·y keeps the monic coefficients O(1) around the bistable region
    let scale = p.total_linear_loss() / c3.sqrt();
    let ys = real_roots(
        1.0,
        c2 / (c3 * scale),
        c1 / (c3 * scale * scale),
        c0 / (c3 * scale.powi(3)),
    );
    let mut ns: Vec<f64> = ys
        .into_iter()
        .map(|y| y * scale)
        .filter(|n| *n >= 0.0)
        .collect();
    if ns.is_empty() {
        // only possible through roundoff on a vanishing root
        ns.push(0.0);
    }
    ns
}

/// All steady states for a drive, ascending in photon number.
pub fn steady_states(p: &KerrResonatorParams, drive: &DriveTone) -> Vec<SteadyState> {
    steady_states_at(p, p.detuning(drive.frequency), drive.photon_flux())
}

/// Same as [`steady_states`] with an explicit detuning (rad/s) and flux (1/s).
pub fn steady_states_at(p: &KerrResonatorParams, detuning: f64, flux: f64) -> Vec<SteadyState> {
    let ns = photon_roots(p, detuning, flux);
    let labels: &[Branch] = match ns.len() {
        1 => &[Branch::Low],
        2 => &[Branch::Low, Branch::High],
        _ => &[Branch::Low, Branch::Middle, Branch::High],
    };
    ns.iter()
        .zip(labels)
        .map(|(&n, &b)| SteadyState::new(p, detuning, flux.max(0.0), n, b))
        .collect()
}

/// Which stable solution to report when several coexist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchRule {
    LowestStable,
    HighestStable,
    /// Stable solution closest in photon number to the given value.
    NearestStable(f64),
}

pub fn select_state(states: &[SteadyState], rule: BranchRule) -> SteadyState {
    let stable: Vec<&SteadyState> = states.iter().filter(|s| s.stable).collect();
    // a drive always admits a stable state; fall back to all roots at an exact fold
    let pool: Vec<&SteadyState> = if stable.is_empty() {
        states.iter().collect()
    } else {
        stable
    };
    let chosen = match rule {
        BranchRule::LowestStable => pool[0],
        BranchRule::HighestStable => pool[pool.len() - 1],
        BranchRule::NearestStable(n) => pool
            .iter()
            .copied()
            .min_by(|a, b| {
                (a.photon_number - n)
                    .abs()
                    .total_cmp(&(b.photon_number - n).abs())
            })
            .unwrap(),
    };
    *chosen
}

/// `S11 = 1 − √γ1 α / α_in` for a given steady state.
pub fn s11_of(p: &KerrResonatorParams, flux: f64, state: &SteadyState) -> Complex64 {
    if flux <= 0.0 {
        // undriven: the linear response applies
        return Complex64::new(1.0, 0.0);
    }
    Complex64::new(1.0, 0.0) - p.gamma1.sqrt() * state.amplitude / flux.sqrt()
}

/// Linear (zero-photon) reflection at detuning `Δ`.
pub fn linear_s11(p: &KerrResonatorParams, detuning: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) - p.gamma1 / Complex64::new(p.total_linear_loss() / 2.0, detuning)
}

/// Reflection coefficient on the branch picked by `rule`.
pub fn reflection(p: &KerrResonatorParams, drive: &DriveTone, rule: BranchRule) -> Complex64 {
    let detuning = p.detuning(drive.frequency);
    let flux = drive.photon_flux();
    if flux <= 0.0 {
        return linear_s11(p, detuning);
    }
    let state = select_state(&steady_states_at(p, detuning, flux), rule);
    s11_of(p, flux, &state)
}

/// Onset of bistability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bifurcation {
    /// Photons/s.
    pub critical_flux: f64,
    /// `ω_r − ω_d` at the onset, rad/s.
    pub critical_detuning: f64,
    pub critical_n: f64,
}

// c2² − 3 c3 c1: positive exactly when the response has two folds
fn fold_discriminant(p: &KerrResonatorParams, detuning: f64) -> f64 {
    let (c3, c2, c1) = p.response_coefficients(detuning);
    c2 * c2 - 3.0 * c3 * c1
}

/// Locate the cusp where the steady-state cubic first becomes multi-valued.
///
/// Scans the detuning outward on the side of the Kerr shift until two folds
/// appear, then bisects the fold discriminant to machine precision.
pub fn bifurcation_point(p: &KerrResonatorParams) -> Result<Bifurcation> {
    if p.kerr == 0.0 {
        return Err(Error::NoBifurcation("K = 0".into()));
    }
    if p.kerr.abs() <= 3f64.sqrt() * p.gamma3 {
        return Err(Error::NoBifurcation(format!(
            "two-photon loss γ3 = {:.3e} suppresses bistability (needs |K| > √3 γ3)",
            p.gamma3
        )));
    }
    let side = -p.kerr.signum();
    let step = p.total_linear_loss() / 64.0;
    let mut lo = 0.0;
    let mut hi = step;
    let mut iters = 0;
    while fold_discriminant(p, side * hi) <= 0.0 {
        lo = hi;
        hi += step;
        iters += 1;
        if iters > 1_000_000 {
            return Err(Error::NoBifurcation(
                "no fold found within 10^4 linewidths".into(),
            ));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fold_discriminant(p, side * mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let detuning = side * 0.5 * (lo + hi);
    let (c3, c2, _) = p.response_coefficients(detuning);
    let n = -c2 / (3.0 * c3);
    if !(n > 0.0) {
        return Err(Error::NoBifurcation(
            "fold at negative photon number".into(),
        ));
    }
    Ok(Bifurcation {
        critical_flux: p.flux_for_photons(detuning, n),
        critical_detuning: detuning,
        critical_n: n,
    })
}

/// Saddle-node points of the response at a fixed detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Folds {
    /// Where the low branch ends (larger flux).
    pub low_branch_end_n: f64,
    pub low_branch_end_flux: f64,
    /// Where the high branch ends (smaller flux).
    pub high_branch_end_n: f64,
    pub high_branch_end_flux: f64,
}

/// The two folds at `detuning`, if the response is bistable there.
pub fn folds_at(p: &KerrResonatorParams, detuning: f64) -> Option<Folds> {
    let (c3, c2, c1) = p.response_coefficients(detuning);
    let disc = c2 * c2 - 3.0 * c3 * c1;
    if c3 == 0.0 || disc <= 0.0 || c2 >= 0.0 {
        return None;
    }
    let n_hi = (-c2 + disc.sqrt()) / (3.0 * c3);
    let n_lo = c1 / (3.0 * c3 * n_hi);
    Some(Folds {
        low_branch_end_n: n_lo,
        low_branch_end_flux: p.flux_for_photons(detuning, n_lo),
        high_branch_end_n: n_hi,
        high_branch_end_flux: p.flux_for_photons(detuning, n_hi),
    })
}

/// Pump flux at which the upward-ramped state loses stability at `detuning`.
///
/// Past the cusp this is the low-branch fold; closer to resonance (no fold)
/// it is the global critical flux of [`bifurcation_point`].
pub fn critical_flux_at(p: &KerrResonatorParams, detuning: f64) -> Result<f64> {
    if let Some(f) = folds_at(p, detuning) {
        return Ok(f.low_branch_end_flux);
    }
    Ok(bifurcation_point(p)?.critical_flux)
}
