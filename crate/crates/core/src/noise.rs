//! Added-noise budget: quantum limit, loss degradation, shot-noise
//! thermometry calibration and Friis cascading.

use log::warn;
use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::amplifier::PumpOperatingPoint;
use crate::constants::{linear_to_db, BOLTZMANN, ELEMENTARY_CHARGE, PLANCK, TWO_PI};
use crate::dynamics::KerrResonatorParams;
use crate::error::{Error, Result};

/// Minimum added noise of a phase-preserving amplifier, in photons.
pub fn sql_quanta() -> f64 {
    0.5
}

/// `h f / 2k_B`, kelvin.
pub fn sql_temperature(frequency: f64) -> Result<f64> {
    if !(frequency > 0.0) {
        return Err(Error::Domain(format!(
            "frequency must be > 0, got {frequency}"
        )));
    }
    Ok(PLANCK * frequency / (2.0 * BOLTZMANN))
}

/// `0.5 (γ1 + γ_tot)/γ1` with `γ_tot = γ2 + 2γ3 n` at the pump photon number.
pub fn loss_degraded_added_noise(params: &KerrResonatorParams, pump_n: f64) -> Result<f64> {
    if !(pump_n >= 0.0) {
        return Err(Error::Domain(format!(
            "pump photon number must be >= 0, got {pump_n}"
        )));
    }
    let internal = params.gamma2 + 2.0 * params.gamma3 * pump_n;
    Ok(0.5 * (params.gamma1 + internal) / params.gamma1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SntjParams {
    /// Electron temperature, K.
    pub temperature: f64,
    /// Hz.
    pub frequency: f64,
    /// Hz.
    pub resolution_bandwidth: f64,
}

impl SntjParams {
    pub fn new(temperature: f64, frequency: f64, resolution_bandwidth: f64) -> Result<Self> {
        let p = Self {
            temperature,
            frequency,
            resolution_bandwidth,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.frequency > 0.0 && self.resolution_bandwidth > 0.0) {
            return Err(Error::InvalidParams(
                "SNTJ temperature, frequency and bandwidth must all be > 0".into(),
            ));
        }
        Ok(())
    }
}

// x coth x, even and smooth through 0
fn x_coth_x(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-4 {
        1.0 + ax * ax / 3.0
    } else if ax > 20.0 {
        ax
    } else {
        ax / ax.tanh()
    }
}

/// Noise temperature of a biased tunnel junction,
/// `(1/2k_B) Σ± [(hf ± eV)/2] coth[(hf ± eV)/(2k_BT)]`.
pub fn sntj_noise_temperature(p: &SntjParams, bias: f64) -> f64 {
    let hf = PLANCK * p.frequency;
    let ev = ELEMENTARY_CHARGE * bias;
    let kt2 = 2.0 * BOLTZMANN * p.temperature;
    // each term is k_B T · x coth x with x = (hf ± eV)/(2k_BT)
    0.5 * p.temperature * (x_coth_x((hf + ev) / kt2) + x_coth_x((hf - ev) / kt2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub system_gain_db: f64,
    pub added_quanta: f64,
    pub added_quanta_ci: (f64, f64),
    /// RMS of residuals relative to the fitted model.
    pub residual_rms: f64,
    /// The fitted added noise was negative and has been clipped to 0.
    pub clipped: bool,
}

/// Fit `P(V) = G k_B B (T_N(V) + T_add)` to `(bias, psd)` points, uniformly weighted.
pub fn fit_calibration(psd_vs_bias: &[(f64, f64)], p: &SntjParams) -> Result<CalibrationResult> {
    fit_calibration_weighted(psd_vs_bias, p, None)
}

/// As [`fit_calibration`] with optional per-point variances.
pub fn fit_calibration_weighted(
    psd_vs_bias: &[(f64, f64)],
    p: &SntjParams,
    variances: Option<&[f64]>,
) -> Result<CalibrationResult> {
    p.validate()?;
    let n = psd_vs_bias.len();
    if n < 7 {
        return Err(Error::Conditioning(format!(
            "calibration needs at least 7 bias points, got {n}"
        )));
    }
    if let Some(v) = variances {
        if v.len() != n || v.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::Precondition(
                "variances must be positive, one per point".into(),
            ));
        }
    }
    if psd_vs_bias
        .iter()
        .any(|(v, w)| !v.is_finite() || !w.is_finite())
    {
        return Err(Error::Precondition("non-finite calibration data".into()));
    }
    let scale_v = (PLANCK * p.frequency).max(2.0 * BOLTZMANN * p.temperature) / ELEMENTARY_CHARGE;
    let has = |pred: &dyn Fn(f64) -> bool| psd_vs_bias.iter().any(|(v, _)| pred(*v));
    if !has(&|v| v >= 3.0 * scale_v)
        || !has(&|v| v <= -3.0 * scale_v)
        || !has(&|v| v.abs() <= scale_v)
    {
        return Err(Error::Conditioning(format!(
            "bias points must reach beyond ±{:.3e} V on both sides and include |V| <= {:.3e} V",
            3.0 * scale_v,
            scale_v
        )));
    }

    let tn: Vec<f64> = psd_vs_bias
        .iter()
        .map(|(v, _)| sntj_noise_temperature(p, *v))
        .collect();
    let w: Vec<f64> = match variances {
        Some(v) => v.iter().map(|x| 1.0 / x.sqrt()).collect(),
        None => vec![1.0; n],
    };
    // columns scaled to unit magnitude before the solve
    let t_scale = tn.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let p_scale = psd_vs_bias.iter().fold(0.0f64, |m, (_, y)| m.max(y.abs()));
    if !(p_scale > 0.0) {
        return Err(Error::Conditioning("all PSD values are zero".into()));
    }
    let x = DMatrix::from_fn(n, 2, |i, j| {
        w[i] * if j == 0 { tn[i] / t_scale } else { 1.0 }
    });
    let y = DVector::from_fn(n, |i, _| w[i] * psd_vs_bias[i].1 / p_scale);
    let svd = x.clone().svd(true, true);
    let sv = &svd.singular_values;
    if sv.min() <= 1e-12 * sv.max() {
        return Err(Error::Conditioning("design matrix is singular".into()));
    }
    let beta = svd
        .solve(&y, 1e-15)
        .map_err(|e| Error::Conditioning(e.to_string()))?;
    let a = beta[0] * p_scale / t_scale;
    let b = beta[1] * p_scale;
    if !(a > 0.0) {
        return Err(Error::Conditioning("fitted gain is not positive".into()));
    }

    let resid = &y - &x * &beta;
    let dof = (n - 2) as f64;
    let s2 = resid.norm_squared() / dof;
    let xtx = Matrix2::new(
        x.column(0).dot(&x.column(0)),
        x.column(0).dot(&x.column(1)),
        x.column(1).dot(&x.column(0)),
        x.column(1).dot(&x.column(1)),
    );
    let cov_scaled = xtx
        .try_inverse()
        .ok_or_else(|| Error::Conditioning("normal matrix is singular".into()))?
        * s2;
    // back to physical units: a = β0 p/t, b = β1 p
    let (ja, jb) = (p_scale / t_scale, p_scale);
    let var_a = cov_scaled[(0, 0)] * ja * ja;
    let var_b = cov_scaled[(1, 1)] * jb * jb;
    let cov_ab = cov_scaled[(0, 1)] * ja * jb;

    let hf_over_k = PLANCK * p.frequency / BOLTZMANN;
    let t_add = b / a;
    let quanta = t_add / hf_over_k;
    // delta method for b/a
    let var_q = (var_b / (a * a) - 2.0 * b * cov_ab / a.powi(3) + b * b * var_a / a.powi(4))
        .max(0.0)
        / hf_over_k.powi(2);
    let t_q = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Conditioning(e.to_string()))?
        .inverse_cdf(0.975);
    let half = t_q * var_q.sqrt();

    let residual_rms = (psd_vs_bias
        .iter()
        .zip(&tn)
        .map(|((_, y), t)| {
            let model = a * (t + t_add);
            ((y - model) / model).powi(2)
        })
        .sum::<f64>()
        / n as f64)
        .sqrt();

    let gain = a / (BOLTZMANN * p.resolution_bandwidth);
    let clipped = quanta < 0.0;
    if clipped {
        warn!("fitted added noise {quanta:.3} quanta is negative; clipped to 0");
    }
    let point = quanta.max(0.0);
    Ok(CalibrationResult {
        system_gain_db: linear_to_db(gain),
        added_quanta: point,
        added_quanta_ci: (
            (quanta - half).max(0.0).min(point),
            (quanta + half).max(point),
        ),
        residual_rms,
        clipped,
    })
}

/// Noiseless PSD predicted by the calibration model.
pub fn calibration_psd(p: &SntjParams, gain_db: f64, added_quanta: f64, bias: f64) -> f64 {
    let g = crate::constants::db_to_linear(gain_db);
    let t_add = added_quanta * PLANCK * p.frequency / BOLTZMANN;
    g * BOLTZMANN * p.resolution_bandwidth * (sntj_noise_temperature(p, bias) + t_add)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    /// Linear power gain.
    pub gain: f64,
    /// Input-referred added photons.
    pub added_quanta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub stages: Vec<Stage>,
    pub total_added_quanta: f64,
}

impl NoiseBudget {
    pub fn total_gain(&self) -> f64 {
        self.stages.iter().map(|s| s.gain).product()
    }

    /// The whole chain as one equivalent stage.
    pub fn as_stage(&self) -> Stage {
        Stage {
            gain: self.total_gain(),
            added_quanta: self.total_added_quanta,
        }
    }
}

/// `n1 + n2/G1 + n3/(G1 G2) + …`.
pub fn friis_cascade(stages: &[Stage]) -> Result<NoiseBudget> {
    if stages.is_empty() {
        return Err(Error::Arity {
            expected: 1,
            got: 0,
        });
    }
    if let Some(s) = stages
        .iter()
        .find(|s| !(s.gain > 0.0) || !(s.added_quanta >= 0.0))
    {
        return Err(Error::Domain(format!(
            "stage gain must be > 0 and added noise >= 0, got ({}, {})",
            s.gain, s.added_quanta
        )));
    }
    let mut total = 0.0;
    let mut gain_before = 1.0;
    for s in stages {
        total += s.added_quanta / gain_before;
        gain_before *= s.gain;
    }
    Ok(NoiseBudget {
        stages: stages.to_vec(),
        total_added_quanta: total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpectrum {
    pub freqs: Vec<f64>,
    pub gain_db: Vec<f64>,
    pub paramp_quanta: Vec<f64>,
    pub system_quanta: Vec<f64>,
}

/// Input-referred system noise across frequency for a paramp followed by a
/// second stage adding `hemt_quanta`.
///
/// The paramp contributes the idler's vacuum noise, degraded by internal
/// loss: `n_paramp = n_loss |S_i|²/|S_s|²`.
pub fn noise_spectrum(
    op: &PumpOperatingPoint,
    hemt_quanta: f64,
    freq_grid: &[f64],
) -> Result<NoiseSpectrum> {
    if !(hemt_quanta >= 0.0) {
        return Err(Error::Domain("second-stage noise must be >= 0".into()));
    }
    let loss_factor = loss_degraded_added_noise(&op.params, op.photon_number())?;
    let mut out = NoiseSpectrum {
        freqs: freq_grid.to_vec(),
        gain_db: Vec::with_capacity(freq_grid.len()),
        paramp_quanta: Vec::with_capacity(freq_grid.len()),
        system_quanta: Vec::with_capacity(freq_grid.len()),
    };
    for &f in freq_grid {
        let (s, i) = op
            .response(TWO_PI * (f - op.pump.frequency))
            .ok_or_else(|| Error::Precondition("singular response on the frequency grid".into()))?;
        let g = s.norm_sqr();
        let n_p = loss_factor * i.norm_sqr() / g;
        let budget = friis_cascade(&[
            Stage {
                gain: g,
                added_quanta: n_p,
            },
            Stage {
                gain: 1.0,
                added_quanta: hemt_quanta,
            },
        ])?;
        out.gain_db.push(linear_to_db(g));
        out.paramp_quanta.push(n_p);
        out.system_quanta.push(budget.total_added_quanta);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sql_values() {
        assert_eq!(sql_quanta(), 0.5);
        let t = sql_temperature(6e9).unwrap();
        assert!((t - 0.1440).abs() < 5e-5, "{t}");
        assert!((sql_temperature(12e9).unwrap() - 2.0 * t).abs() < 1e-15);
        assert!(sql_temperature(0.0).is_err());
        let f = 7.3e9;
        assert!((sql_temperature(f).unwrap() * 2.0 * BOLTZMANN / PLANCK - f).abs() <= 1e-6);
    }

    #[test]
    fn loss_degradation() {
        let p = KerrResonatorParams::from_hz(6e9, 10e6, 0.0, 0.0, -1e5).unwrap();
        assert_eq!(loss_degraded_added_noise(&p, 50.0).unwrap(), 0.5);
        let p = KerrResonatorParams::from_hz(6e9, 10e6, 1e6, 0.0, -1e5).unwrap();
        let q = KerrResonatorParams::from_hz(6e9, 10e6, 2e6, 0.0, -1e5).unwrap();
        let (a, b) = (
            loss_degraded_added_noise(&p, 0.0).unwrap(),
            loss_degraded_added_noise(&q, 0.0).unwrap(),
        );
        assert!(((b - 0.5) - 2.0 * (a - 0.5)).abs() < 1e-15);
        assert!(loss_degraded_added_noise(&p, -1.0).is_err());
    }

    #[test]
    fn sntj_limits() {
        let p = SntjParams::new(1e-6, 6e9, 1e6).unwrap();
        let hf = PLANCK * 6e9;
        assert!((sntj_noise_temperature(&p, 0.0) - hf / (2.0 * BOLTZMANN)).abs() < 1e-12);
        let warm = SntjParams::new(0.03, 6e9, 1e6).unwrap();
        let v = 5e-3;
        let t = sntj_noise_temperature(&warm, v);
        assert!((t - ELEMENTARY_CHARGE * v / (2.0 * BOLTZMANN)).abs() / t < 1e-9);
    }

    proptest! {
        #[test]
        fn sntj_even_and_monotone(t in 0.005f64..1.0, f in 1e9f64..12e9, v in 0.0f64..1e-3, dv in 1e-9f64..1e-4) {
            let p = SntjParams::new(t, f, 1e6).unwrap();
            prop_assert_eq!(sntj_noise_temperature(&p, v), sntj_noise_temperature(&p, -v));
            prop_assert!(sntj_noise_temperature(&p, v + dv) >= sntj_noise_temperature(&p, v));
        }

        #[test]
        fn friis_associative(
            g in proptest::collection::vec(0.5f64..1e4, 3),
            n in proptest::collection::vec(0.0f64..30.0, 3),
        ) {
            let s: Vec<Stage> = g.iter().zip(&n).map(|(&gain, &added_quanta)| Stage { gain, added_quanta }).collect();
            let ab = friis_cascade(&s[..2]).unwrap().as_stage();
            let left = friis_cascade(&[ab, s[2]]).unwrap().total_added_quanta;
            let bc = friis_cascade(&s[1..]).unwrap().as_stage();
            let right = friis_cascade(&[s[0], bc]).unwrap().total_added_quanta;
            prop_assert!((left - right).abs() <= 1e-12 * left.max(1.0));
        }
    }

    fn sweep(n: usize, vmax: f64) -> Vec<f64> {
        (0..n)
            .map(|k| -vmax + 2.0 * vmax * k as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn noiseless_round_trip() {
        let p = SntjParams::new(0.03, 6e9, 1e6).unwrap();
        let data: Vec<(f64, f64)> = sweep(41, 1e-3)
            .into_iter()
            .map(|v| (v, calibration_psd(&p, 96.0, 15.0, v)))
            .collect();
        let r = fit_calibration(&data, &p).unwrap();
        assert!((r.system_gain_db - 96.0).abs() / 96.0 < 1e-9);
        assert!((r.added_quanta - 15.0).abs() / 15.0 < 1e-9);
        assert!(r.residual_rms < 1e-12);
        assert!(r.added_quanta_ci.0 <= r.added_quanta && r.added_quanta <= r.added_quanta_ci.1);
    }

    #[test]
    fn spanning_and_arity_checks() {
        let p = SntjParams::new(0.03, 6e9, 1e6).unwrap();
        let one_sided: Vec<(f64, f64)> = (0..20)
            .map(|k| 1e-5 * k as f64)
            .map(|v| (v, calibration_psd(&p, 90.0, 10.0, v)))
            .collect();
        assert!(matches!(
            fit_calibration(&one_sided, &p),
            Err(Error::Conditioning(_))
        ));
        let few: Vec<(f64, f64)> = sweep(5, 1e-3)
            .into_iter()
            .map(|v| (v, calibration_psd(&p, 90.0, 10.0, v)))
            .collect();
        assert!(matches!(
            fit_calibration(&few, &p),
            Err(Error::Conditioning(_))
        ));
    }

    #[test]
    fn negative_added_noise_is_clipped() {
        let p = SntjParams::new(0.03, 6e9, 1e6).unwrap();
        let data: Vec<(f64, f64)> = sweep(21, 1e-3)
            .into_iter()
            .map(|v| (v, 1e-12 * sntj_noise_temperature(&p, v) - 1e-13))
            .collect();
        let r = fit_calibration(&data, &p).unwrap();
        assert!(r.clipped);
        assert_eq!(r.added_quanta, 0.0);
    }

    #[test]
    fn friis_examples() {
        let b = friis_cascade(&[
            Stage {
                gain: 100.0,
                added_quanta: 0.6,
            },
            Stage {
                gain: 1e4,
                added_quanta: 15.0,
            },
        ])
        .unwrap();
        assert!((b.total_added_quanta - 0.75).abs() < 1e-12);
        let single = friis_cascade(&[Stage {
            gain: 3.0,
            added_quanta: 2.5,
        }])
        .unwrap();
        assert_eq!(single.total_added_quanta, 2.5);
        let huge = friis_cascade(&[
            Stage {
                gain: 1e15,
                added_quanta: 0.6,
            },
            Stage {
                gain: 1.0,
                added_quanta: 15.0,
            },
        ])
        .unwrap();
        assert!((huge.total_added_quanta - 0.6).abs() < 1e-13);
        assert!(matches!(friis_cascade(&[]), Err(Error::Arity { .. })));
        assert!(friis_cascade(&[Stage {
            gain: 0.0,
            added_quanta: 1.0
        }])
        .is_err());
    }
}
