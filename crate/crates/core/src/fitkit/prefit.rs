use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use super::lm::{levenberg_marquardt, LmOptions};
use super::{S11Dataset, S11Trace};
use crate::constants::TWO_PI;
use crate::dynamics::{DriveTone, KerrResonatorParams};
use crate::error::{Error, Result};

/// Linear-regime resonator estimate from a single trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearEstimate {
    pub omega_r: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Whether the circle encloses the origin (a full 2π phase winding of S11).
    pub overcoupled: bool,
    /// Angle swept about the circle centre across the grid, rad.
    pub winding: f64,
    pub center: Complex64,
    pub radius: f64,
}

impl LinearEstimate {
    pub fn total_linear_loss(&self) -> f64 {
        self.gamma1 + self.gamma2
    }

    pub fn with_nonlinear(&self, gamma3: f64, kerr: f64) -> Result<KerrResonatorParams> {
        let p = KerrResonatorParams {
            omega_r: self.omega_r,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            gamma3,
            kerr,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Algebraic (Kåsa) circle fit: centre and radius.
fn fit_circle(points: &[Complex64]) -> Result<(Complex64, f64)> {
    let n = points.len();
    let a = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => points[i].re,
        1 => points[i].im,
        _ => 1.0,
    });
    let b = DVector::from_fn(n, |i, _| -points[i].norm_sqr());
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Conditioning(e.to_string()))?;
    let center = Complex64::new(-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = center.norm_sqr() - sol[2];
    if !(r2 > 0.0) {
        return Err(Error::NotFound("degenerate circle fit".into()));
    }
    Ok((center, r2.sqrt()))
}

fn unwrap(angles: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for a in angles {
        match out.last() {
            None => out.push(a),
            Some(&prev) => {
                let mut d = (a - prev).rem_euclid(TWO_PI);
                if d > PI {
                    d -= TWO_PI;
                }
                out.push(prev + d);
            }
        }
    }
    out
}

// frequency where the unwrapped angle first crosses `level`, walking from `start` by `dir`
fn crossing(omega: &[f64], theta: &[f64], start: usize, level: f64, up: bool) -> Option<f64> {
    let s = (theta[start] - level).signum();
    let mut idx: Box<dyn Iterator<Item = usize>> = if up {
        Box::new(start..omega.len() - 1)
    } else {
        Box::new((1..=start).rev())
    };
    idx.find_map(|i| {
        let j = if up { i + 1 } else { i - 1 };
        ((theta[j] - level).signum() != s).then(|| {
            let t = (level - theta[i]) / (theta[j] - theta[i]);
            omega[i] + t * (omega[j] - omega[i])
        })
    })
}

/// Circle fit in the complex plane followed by a fit of the phase about the
/// circle centre, `θ(ω) = θ₀ ± 2 atan(2(ω − ω_r)/γ)`.
///
/// The diameter of the reflection circle is `2γ1/γ`, which splits `γ` into
/// `γ1` and `γ2`. The trace should be taken in the linear regime.
pub fn linear_prefit(trace: &S11Trace) -> Result<LinearEstimate> {
    if trace.s11.len() < 5 || trace.frequencies.len() != trace.s11.len() {
        return Err(Error::Precondition(
            "linear prefit needs at least 5 points".into(),
        ));
    }
    let (center, radius) = fit_circle(&trace.s11)?;
    let theta = unwrap(trace.s11.iter().map(|s| (s - center).arg()));
    let winding = theta[theta.len() - 1] - theta[0];
    if winding.abs() < FRAC_PI_2 {
        return Err(Error::NotFound(format!(
            "phase winds by only {winding:.3} rad about the fitted circle; no resonance in the grid"
        )));
    }
    let orient = winding.signum();
    let omega: Vec<f64> = trace.frequencies.iter().map(|f| TWO_PI * f).collect();

    // resonance is the point farthest from the off-resonant reflection
    let far = center + (center - Complex64::new(1.0, 0.0)) / (center - 1.0).norm() * radius;
    let k0 = (0..omega.len())
        .min_by(|&a, &b| {
            (trace.s11[a] - far)
                .norm()
                .total_cmp(&(trace.s11[b] - far).norm())
        })
        .unwrap_or(0);
    let w0 = omega[k0];
    let span = omega[omega.len() - 1] - omega[0];
    let g0 = match (
        crossing(&omega, &theta, k0, theta[k0] - orient * FRAC_PI_2, false),
        crossing(&omega, &theta, k0, theta[k0] + orient * FRAC_PI_2, true),
    ) {
        (Some(lo), Some(hi)) if hi > lo => hi - lo,
        _ => span / 4.0,
    };

    let model = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let wr = w0 + x[0] * g0;
        let g = g0 * x[1].exp();
        Ok(DVector::from_iterator(
            omega.len(),
            omega
                .iter()
                .zip(&theta)
                .map(|(w, t)| x[2] + orient * 2.0 * (2.0 * (w - wr) / g).atan() - t),
        ))
    };
    let fit = levenberg_marquardt(
        model,
        DVector::from_vec(vec![0.0, 0.0, theta[k0]]),
        None,
        &LmOptions {
            step_tolerance: 1e-12,
            cost_tolerance: 1e-14,
            ..LmOptions::default()
        },
    )?;
    let omega_r = w0 + fit.x[0] * g0;
    let gamma = g0 * fit.x[1].exp();
    let gamma1 = (radius * gamma).min(gamma);
    Ok(LinearEstimate {
        omega_r,
        gamma1,
        gamma2: gamma - gamma1,
        overcoupled: center.norm() < radius,
        winding,
        center,
        radius,
    })
}

// centroid of the response peak |S11 − 1|², which sits at ω_r + K n for a Kerr line
fn peak_frequency(trace: &S11Trace) -> f64 {
    let w: Vec<f64> = trace.s11.iter().map(|s| (s - 1.0).norm_sqr()).collect();
    let max = w.iter().cloned().fold(0.0, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (f, v) in trace.frequencies.iter().zip(&w) {
        let excess = v - 0.5 * max;
        if excess > 0.0 {
            num += excess * f;
            den += excess;
        }
    }
    TWO_PI * num / den
}

/// Kerr coefficient from the slope of the resonance position against the
/// intracavity photon number `4γ1Φ/γ²` predicted by the linear estimate.
pub fn kerr_seed(data: &S11Dataset) -> Result<f64> {
    data.validate()?;
    let powers = data.distinct_powers();
    if powers < 2 {
        return Err(Error::Arity {
            expected: 2,
            got: powers,
        });
    }
    let weak = data.weakest();
    let lin = linear_prefit(weak)?;
    kerr_seed_from(data, &lin)
}

pub(crate) fn kerr_seed_from(data: &S11Dataset, lin: &LinearEstimate) -> Result<f64> {
    let g = lin.total_linear_loss();
    let mut pts = Vec::with_capacity(data.traces.len());
    for t in &data.traces {
        let w = peak_frequency(t);
        let flux = DriveTone::from_dbm(w / TWO_PI, data.sample_power_dbm(t))?.photon_flux();
        pts.push((4.0 * lin.gamma1 * flux / (g * g), w));
    }
    let spacing = data
        .weakest()
        .frequencies
        .windows(2)
        .map(|p| p[1] - p[0])
        .fold(0.0, f64::max)
        * TWO_PI;
    let w_ref = pts
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|p| p.1)
        .unwrap_or(0.0);
    if pts.iter().all(|p| (p.1 - w_ref).abs() < spacing) {
        warn!("resonance does not move by more than a grid step across powers; Kerr seed set to 0");
        return Ok(0.0);
    }
    let m = pts.len() as f64;
    let nbar = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let wbar = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - nbar) * (p.1 - wbar)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - nbar).powi(2)).sum();
    if !(sxx > 0.0) {
        return Ok(0.0);
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{critical_flux_at, Direction};
    use crate::fitkit::synthesize;

    fn grid(f0: f64, half: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| f0 - half + 2.0 * half * k as f64 / (n - 1) as f64)
            .collect()
    }

    fn linear_trace(p: &KerrResonatorParams, snr: Option<f64>, seed: u64) -> S11Trace {
        let freqs = grid(
            p.omega_r / TWO_PI,
            4.0 * p.total_linear_loss() / TWO_PI,
            401,
        );
        synthesize(p, &[-180.0], &freqs, Direction::Up, snr, seed, 0.0)
            .unwrap()
            .traces
            .remove(0)
    }

    #[test]
    fn noiseless_round_trip() {
        let p = KerrResonatorParams::from_hz(5.849e9, 11e6, 0.95e6, 0.0, 0.0).unwrap();
        let e = linear_prefit(&linear_trace(&p, None, 0)).unwrap();
        assert!((e.omega_r / p.omega_r - 1.0).abs() < 1e-6 * 1e-3);
        assert!(
            (e.gamma1 / p.gamma1 - 1.0).abs() < 1e-6,
            "{}",
            e.gamma1 / p.gamma1
        );
        assert!(
            (e.gamma2 / p.gamma2 - 1.0).abs() < 1e-6,
            "{}",
            e.gamma2 / p.gamma2
        );
        assert!(e.overcoupled);
        assert!(e.winding.abs() > 1.5 * PI);
    }

    #[test]
    fn noisy_recovery() {
        let p = KerrResonatorParams::from_hz(5.849e9, 11e6, 0.95e6, 0.0, 0.0).unwrap();
        for seed in 0..10 {
            let e = linear_prefit(&linear_trace(&p, Some(40.0), seed)).unwrap();
            assert!((e.omega_r / p.omega_r - 1.0).abs() < 1e-5);
            assert!(
                (e.gamma1 / p.gamma1 - 1.0).abs() < 0.02,
                "{seed}: {}",
                e.gamma1 / p.gamma1
            );
            assert!(
                (e.gamma2 / p.gamma2 - 1.0).abs() < 0.02,
                "{seed}: {}",
                e.gamma2 / p.gamma2
            );
        }
    }

    #[test]
    fn undercoupled_is_reported() {
        let p = KerrResonatorParams::from_hz(6.0e9, 1e6, 3e6, 0.0, 0.0).unwrap();
        let e = linear_prefit(&linear_trace(&p, None, 0)).unwrap();
        assert!(!e.overcoupled);
        assert!((e.gamma1 / p.gamma1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn no_resonance_in_grid() {
        let p = KerrResonatorParams::from_hz(6.0e9, 1e6, 0.1e6, 0.0, 0.0).unwrap();
        let freqs = grid(6.2e9, 10e6, 101);
        let t = synthesize(&p, &[-150.0], &freqs, Direction::Up, None, 0, 0.0)
            .unwrap()
            .traces
            .remove(0);
        assert!(matches!(linear_prefit(&t), Err(Error::NotFound(_))));
    }

    fn kerr_dataset(kerr_hz: f64, snr: Option<f64>) -> (KerrResonatorParams, S11Dataset) {
        let p = KerrResonatorParams::from_hz(5.849e9, 11e6, 0.95e6, 11e3, kerr_hz).unwrap();
        let fc = critical_flux_at(&p, 0.0).unwrap();
        let powers: Vec<f64> = [0.01, 0.25, 0.5, 0.75, 0.95]
            .iter()
            .map(|r| DriveTone::from_flux(5.849e9, r * fc).unwrap().dbm())
            .collect();
        let freqs = grid(5.849e9, 40e6, 401);
        let d = synthesize(&p, &powers, &freqs, Direction::Up, snr, 11, 0.0).unwrap();
        (p, d)
    }

    #[test]
    fn seed_sign_and_magnitude() {
        for snr in [None, Some(40.0)] {
            let (p, d) = kerr_dataset(-135e3, snr);
            let k = kerr_seed(&d).unwrap();
            assert!(k < 0.0);
            let ratio = k / p.kerr;
            assert!(ratio > 1.0 / 3.0 && ratio < 3.0, "{ratio}");
        }
    }

    #[test]
    fn identical_traces_seed_zero() {
        let (_, d) = kerr_dataset(-135e3, None);
        let mut d2 = d.clone();
        let weak = d.weakest().clone();
        for (k, t) in d2.traces.iter_mut().enumerate() {
            *t = S11Trace {
                power_dbm: weak.power_dbm + k as f64,
                ..weak.clone()
            };
        }
        assert_eq!(kerr_seed(&d2).unwrap(), 0.0);
    }

    #[test]
    fn single_power_is_rejected() {
        let (_, mut d) = kerr_dataset(-135e3, None);
        d.traces.truncate(1);
        assert!(matches!(kerr_seed(&d), Err(Error::Arity { .. })));
    }
}
