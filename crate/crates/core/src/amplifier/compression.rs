//! Gain compression from a three-tone harmonic balance.
//!
//! The intracavity field is truncated to `p e^{-iω_p t} + s e^{-iω_s t} + i e^{-iω_i t}`
//! with `ω_i = 2ω_p − ω_s`. Keeping every cubic mixing product that lands
//! back on one of the three tones gives, for each tone `x`,
//!
//! ```text
//! (iΔ_x + γ/2) a_x + (iK + γ3) N_x = √γ1 b_x
//! N_p = (|p|² + 2|s|² + 2|i|²) p + 2 s i p*
//! N_s = (|s|² + 2|p|² + 2|i|²) s + p² i*
//! N_i = (|i|² + 2|p|² + 2|s|²) i + p² s*
//! ```
//!
//! solved by damped Newton iteration in six real unknowns.

use log::warn;
use nalgebra::{Matrix6, Vector6};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::PumpOperatingPoint;
use crate::constants::{dbm_to_watt, linear_to_db, PLANCK, TWO_PI};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicBalanceOptions {
    /// Per-tone residual relative to the tone's drive scale.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for HarmonicBalanceOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

/// Solved intracavity amplitudes of the three tones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeTone {
    pub pump: Complex64,
    pub signal: Complex64,
    pub idler: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionCurve {
    pub signal_frequency: f64,
    pub signal_powers_dbm: Vec<f64>,
    pub gain_db: Vec<f64>,
    /// Linearized gain at the same signal frequency.
    pub small_signal_db: f64,
    /// First input power past the gain maximum where the gain falls 1 dB
    /// below `small_signal_db`; `None` if the grid never gets there.
    pub p1db: Option<f64>,
    pub states: Vec<ThreeTone>,
}

struct Balance {
    det: [f64; 3],
    half_gamma: f64,
    coupling: Complex64,
    drive: [Complex64; 3],
    scale: [f64; 3],
}

impl Balance {
    fn residual(&self, a: &[Complex64; 3]) -> [Complex64; 3] {
        let n = nonlinear_terms(a);
        std::array::from_fn(|k| {
            Complex64::new(self.half_gamma, self.det[k]) * a[k] + self.coupling * n[k]
                - self.drive[k]
        })
    }

    fn norm(&self, r: &[Complex64; 3]) -> f64 {
        (0..3)
            .map(|k| r[k].norm() / self.scale[k])
            .fold(0.0, f64::max)
    }

    // Wirtinger derivatives ∂r/∂a and ∂r/∂a*
    fn jacobian(&self, a: &[Complex64; 3]) -> ([[Complex64; 3]; 3], [[Complex64; 3]; 3]) {
        let [p, s, i] = *a;
        let (pp, ss, ii) = (p.norm_sqr(), s.norm_sqr(), i.norm_sqr());
        let two = Complex64::new(2.0, 0.0);
        let dn = [
            [
                two * (pp + ss + ii),
                two * (s.conj() * p + i * p.conj()),
                two * (i.conj() * p + s * p.conj()),
            ],
            [
                two * (p.conj() * s + p * i.conj()),
                two * (ss + pp + ii),
                two * i.conj() * s,
            ],
            [
                two * (p.conj() * i + p * s.conj()),
                two * s.conj() * i,
                two * (ii + pp + ss),
            ],
        ];
        let dnc = [
            [p * p + two * s * i, two * s * p, two * i * p],
            [two * p * s, s * s, two * i * s + p * p],
            [two * p * i, two * s * i + p * p, i * i],
        ];
        let mut da = [[Complex64::new(0.0, 0.0); 3]; 3];
        let mut dac = [[Complex64::new(0.0, 0.0); 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                da[r][c] = self.coupling * dn[r][c];
                dac[r][c] = self.coupling * dnc[r][c];
            }
            da[r][r] += Complex64::new(self.half_gamma, self.det[r]);
        }
        (da, dac)
    }

    // real 6×6 Jacobian in (Re, Im) pairs, rows divided by `weights`
    fn real_jacobian(&self, a: &[Complex64; 3], weights: [f64; 3]) -> Matrix6<f64> {
        let (da, dac) = self.jacobian(a);
        let mut jac = Matrix6::<f64>::zeros();
        for row in 0..3 {
            let w = 1.0 / weights[row];
            for col in 0..3 {
                let dx = (da[row][col] + dac[row][col]) * w;
                let dy = Complex64::i() * (da[row][col] - dac[row][col]) * w;
                jac[(2 * row, 2 * col)] = dx.re;
                jac[(2 * row + 1, 2 * col)] = dx.im;
                jac[(2 * row, 2 * col + 1)] = dy.re;
                jac[(2 * row + 1, 2 * col + 1)] = dy.im;
            }
        }
        jac
    }

    /// Linear stability under the slow-envelope flow `da/dt = −r(a)`.
    fn is_stable(&self, a: &[Complex64; 3]) -> bool {
        self.real_jacobian(a, [1.0; 3])
            .complex_eigenvalues()
            .iter()
            .all(|l| l.re > 0.0)
    }

    /// Integrate `da/dt = −r(a)` (RK4) until the residual is below `target`;
    /// this follows the physical relaxation into an attractor. The target must
    /// be tight: near a vanished fold the flow lingers at small residual.
    fn relax(&self, start: [Complex64; 3], target: f64) -> [Complex64; 3] {
        let mut a = start;
        let f = |a: &[Complex64; 3]| self.residual(a).map(|r| -r);
        for _ in 0..2_000_000 {
            let n_total: f64 = a.iter().map(|x| x.norm_sqr()).sum();
            let rate = (0..3)
                .map(|k| Complex64::new(self.half_gamma, self.det[k]).norm())
                .fold(0.0, f64::max)
                + 3.0 * self.coupling.norm() * n_total;
            let dt = 0.2 / rate;
            let add = |a: &[Complex64; 3], k: &[Complex64; 3], h: f64| -> [Complex64; 3] {
                std::array::from_fn(|j| a[j] + h * k[j])
            };
            let k1 = f(&a);
            let k2 = f(&add(&a, &k1, dt / 2.0));
            let k3 = f(&add(&a, &k2, dt / 2.0));
            let k4 = f(&add(&a, &k3, dt));
            a = std::array::from_fn(|j| {
                a[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            });
            if self.norm(&self.residual(&a)) < target {
                break;
            }
        }
        a
    }

    fn solve(
        &self,
        start: [Complex64; 3],
        opts: &HarmonicBalanceOptions,
    ) -> Result<[Complex64; 3]> {
        let mut a = start;
        let mut r = self.residual(&a);
        let mut err = self.norm(&r);
        for _ in 0..opts.max_iterations {
            if err < opts.tolerance {
                return Ok(a);
            }
            let jac = self.real_jacobian(&a, self.scale);
            let mut rhs = Vector6::<f64>::zeros();
            for row in 0..3 {
                rhs[2 * row] = -r[row].re / self.scale[row];
                rhs[2 * row + 1] = -r[row].im / self.scale[row];
            }
            let step = jac.lu().solve(&rhs).ok_or(Error::Convergence {
                iterations: 0,
                residual: err,
            })?;
            let mut lambda = 1.0;
            loop {
                let trial: [Complex64; 3] = std::array::from_fn(|k| {
                    a[k] + lambda * Complex64::new(step[2 * k], step[2 * k + 1])
                });
                let tr = self.residual(&trial);
                let terr = self.norm(&tr);
                if terr < err || lambda < 1e-6 {
                    a = trial;
                    r = tr;
                    err = terr;
                    break;
                }
                lambda *= 0.5;
            }
        }
        if err < opts.tolerance {
            Ok(a)
        } else {
            Err(Error::Convergence {
                iterations: opts.max_iterations,
                residual: err,
            })
        }
    }
}

fn nonlinear_terms(a: &[Complex64; 3]) -> [Complex64; 3] {
    let [p, s, i] = *a;
    let (pp, ss, ii) = (p.norm_sqr(), s.norm_sqr(), i.norm_sqr());
    [
        (pp + 2.0 * ss + 2.0 * ii) * p + 2.0 * s * i * p.conj(),
        (ss + 2.0 * pp + 2.0 * ii) * s + p * p * i.conj(),
        (ii + 2.0 * pp + 2.0 * ss) * i + p * p * s.conj(),
    ]
}

pub fn compression_curve(
    op: &PumpOperatingPoint,
    signal_freq: f64,
    signal_powers_dbm: &[f64],
) -> Result<CompressionCurve> {
    compression_curve_with(
        op,
        signal_freq,
        signal_powers_dbm,
        &HarmonicBalanceOptions::default(),
    )
}

/// Signal gain versus input signal power at a fixed signal frequency (Hz).
pub fn compression_curve_with(
    op: &PumpOperatingPoint,
    signal_freq: f64,
    signal_powers_dbm: &[f64],
    opts: &HarmonicBalanceOptions,
) -> Result<CompressionCurve> {
    if signal_freq == op.pump.frequency {
        return Err(Error::Precondition(
            "signal frequency must differ from the pump frequency".into(),
        ));
    }
    if signal_powers_dbm.is_empty() || signal_powers_dbm.iter().any(|p| !p.is_finite()) {
        return Err(Error::Precondition(
            "signal powers must be a non-empty list of finite dBm values".into(),
        ));
    }
    let p = &op.params;
    let delta = TWO_PI * (signal_freq - op.pump.frequency);
    let det_p = op.pump_detuning();
    let (s_lin, i_lin) = op.response(delta).ok_or_else(|| {
        Error::Precondition("linear response is singular at this signal frequency".into())
    })?;
    let small_signal_db = linear_to_db(s_lin.norm_sqr());
    let sqrt_g1 = p.gamma1.sqrt();
    let b_p = op.pump.photon_flux().sqrt();

    // process powers in ascending order so each solve starts from its neighbour
    let mut order: Vec<usize> = (0..signal_powers_dbm.len()).collect();
    order.sort_by(|&x, &y| signal_powers_dbm[x].total_cmp(&signal_powers_dbm[y]));
    let mut gains = vec![0.0; order.len()];
    let mut states = vec![
        ThreeTone {
            pump: op.state.amplitude,
            signal: Complex64::new(0.0, 0.0),
            idler: Complex64::new(0.0, 0.0),
        };
        order.len()
    ];
    let signal_drive = |dbm: f64| (dbm_to_watt(dbm) / (PLANCK * signal_freq)).sqrt();
    let balance_for = |b_s: f64| Balance {
        det: [det_p, det_p - delta, det_p + delta],
        half_gamma: p.total_linear_loss() / 2.0,
        coupling: Complex64::new(p.gamma3, p.kerr),
        drive: [
            Complex64::new(sqrt_g1 * b_p, 0.0),
            Complex64::new(sqrt_g1 * b_s, 0.0),
            Complex64::new(0.0, 0.0),
        ],
        scale: [
            (sqrt_g1 * b_p).max(f64::MIN_POSITIVE),
            (sqrt_g1 * b_s).max(f64::MIN_POSITIVE),
            (sqrt_g1 * b_s).max(f64::MIN_POSITIVE),
        ],
    };
    let rescale =
        |a: [Complex64; 3], from: f64, to: f64| [a[0], a[1] * (to / from), a[2] * (to / from)];

    // anchor the continuation where the sidebands hold a negligible share of
    // the pump photons, so the linearized start is accurate
    let lin_photons_per_flux = ((Complex64::new(1.0, 0.0) - s_lin) / sqrt_g1).norm_sqr();
    let anchor_flux =
        1e-8 * op.state.photon_number.max(1e-12) / lin_photons_per_flux.max(f64::MIN_POSITIVE);
    let anchor_dbm = crate::constants::watt_to_dbm(anchor_flux * PLANCK * signal_freq)
        .min(signal_powers_dbm[order[0]]);
    let b_anchor = signal_drive(anchor_dbm);
    let linear_start = [
        op.state.amplitude,
        (Complex64::new(1.0, 0.0) - s_lin) * b_anchor / sqrt_g1,
        -i_lin.conj() * b_anchor / sqrt_g1,
    ];
    let mut current = (balance_for(b_anchor).solve(linear_start, opts)?, anchor_dbm);

    const MAX_STEP_DB: f64 = 1.0;
    const MIN_STEP_DB: f64 = 1e-4;
    const JUMP_DB: f64 = 0.1;
    const BACK_STEP_DB: f64 = 0.01;
    for &k in &order {
        let target = signal_powers_dbm[k];
        let mut h = MAX_STEP_DB;
        while current.1 < target {
            let next = (current.1 + h).min(target);
            let (b_from, b_to) = (signal_drive(current.1), signal_drive(next));
            let balance = balance_for(b_to);
            let guess = rescale(current.0, b_from, b_to);
            match balance.solve(guess, opts) {
                Ok(a) if balance.is_stable(&a) => {
                    current = (a, next);
                    h = (2.0 * h).min(MAX_STEP_DB);
                }
                outcome => {
                    h /= 4.0;
                    if h < MIN_STEP_DB {
                        // past a turning point of the solution curve: let the
                        // state relax onto the attractor it would jump to. Just
                        // beyond the fold the flow crawls through its ghost, so
                        // relax a little further out and walk back.
                        let beyond = (current.1 + JUMP_DB).max(next);
                        let b_beyond = signal_drive(beyond);
                        let far = balance_for(b_beyond);
                        let relaxed = far.relax(
                            rescale(current.0, b_from, b_beyond),
                            1e-3 * opts.tolerance.max(1e-9),
                        );
                        let mut a = far.solve(relaxed, opts).or(outcome)?;
                        let unstable = |bal: &Balance, a: &[Complex64; 3]| Error::Convergence {
                            iterations: opts.max_iterations,
                            residual: bal.norm(&bal.residual(a)),
                        };
                        if !far.is_stable(&a) {
                            return Err(unstable(&far, &a));
                        }
                        let back = ((beyond - next) / BACK_STEP_DB).ceil() as usize;
                        let mut at = beyond;
                        for j in 1..=back {
                            let pw = beyond - (beyond - next) * j as f64 / back as f64;
                            let bal = balance_for(signal_drive(pw));
                            a = bal.solve(rescale(a, signal_drive(at), signal_drive(pw)), opts)?;
                            if !bal.is_stable(&a) {
                                return Err(unstable(&bal, &a));
                            }
                            at = pw;
                        }
                        current = (a, next);
                        h = MAX_STEP_DB;
                    }
                }
            }
        }
        let a = current.0;
        let b_s = signal_drive(target);
        let s11 = Complex64::new(1.0, 0.0) - sqrt_g1 * a[1] / b_s;
        gains[k] = linear_to_db(s11.norm_sqr());
        states[k] = ThreeTone {
            pump: a[0],
            signal: a[1],
            idler: a[2],
        };
    }

    let sorted_p: Vec<f64> = order.iter().map(|&k| signal_powers_dbm[k]).collect();
    let sorted_g: Vec<f64> = order.iter().map(|&k| gains[k]).collect();
    let p1db = one_db_point(&sorted_p, &sorted_g, small_signal_db);
    if p1db.is_none() {
        warn!("gain never dropped 1 dB below the small-signal value on the supplied power grid");
    }
    Ok(CompressionCurve {
        signal_frequency: signal_freq,
        signal_powers_dbm: signal_powers_dbm.to_vec(),
        gain_db: gains,
        small_signal_db,
        p1db,
        states,
    })
}

// first downward crossing of (small − 1 dB) after the gain maximum; linear in
// dB against dBm
fn one_db_point(powers: &[f64], gains: &[f64], small: f64) -> Option<f64> {
    let level = small - 1.0;
    let peak = gains
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)?;
    for k in peak + 1..gains.len() {
        if gains[k] <= level && gains[k - 1] > level {
            let t = (gains[k - 1] - level) / (gains[k - 1] - gains[k]);
            return Some(powers[k - 1] + t * (powers[k] - powers[k - 1]));
        }
    }
    None
}
