use log::warn;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions};
use super::prefit::{kerr_seed_from, linear_prefit};
use super::S11Dataset;
use crate::constants::TWO_PI;
use crate::dynamics::{bifurcation_point, sweep_trace_single, DriveTone, KerrResonatorParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub lm: LmOptions,
    /// Lower bound on `γ2` and `γ3` as a fraction of the initial `γ1 + γ2`.
    pub rate_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            lm: LmOptions::default(),
            rate_floor: 1e-9,
        }
    }
}

/// Result of [`nonlinear_fit`].
///
/// `covariance` is ordered `(ω_r, γ1, γ2, γ3, K)` in (rad/s)².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: KerrResonatorParams,
    pub covariance: [[f64; 5]; 5],
    pub std_errors: [f64; 5],
    /// RMS of `|S11_model − S11_data|` over all points.
    pub residual_rms: f64,
    /// The same, per trace in dataset order.
    pub per_trace_residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub gamma3_at_bound: bool,
}

/// Starting point for [`nonlinear_fit`]: the linear prefit of the weakest
/// trace, the Kerr seed, and `γ3 = γ2/10`.
pub fn initial_guess(data: &S11Dataset) -> Result<KerrResonatorParams> {
    data.validate()?;
    let weak = data.weakest();
    let lin = linear_prefit(weak)?;
    let kerr = if data.distinct_powers() >= 2 {
        kerr_seed_from(data, &lin)?
    } else {
        0.0
    };
    let g = lin.total_linear_loss();
    let center = weak.frequencies[weak.frequencies.len() / 2];
    let flux = DriveTone::from_dbm(center, data.sample_power_dbm(weak))?.photon_flux();
    let shift = (kerr * 4.0 * lin.gamma1 * flux / (g * g)).abs();
    if shift > g / 10.0 {
        warn!(
            "weakest trace is not linear: Kerr shift {:.3e} rad/s exceeds a tenth of the linewidth",
            shift
        );
    }
    let gamma2 = lin.gamma2.max(1e-3 * g);
    lin.with_nonlinear(gamma2 / 10.0, kerr)
        .map(|p| KerrResonatorParams { gamma2, ..p })
}

pub fn nonlinear_fit(data: &S11Dataset, init: &KerrResonatorParams) -> Result<FitReport> {
    nonlinear_fit_with(data, init, &FitOptions::default())
}

// x = [(ω_r − ω₀)/g₀, ln(γ1/g₀), ln(γ2/g₀), ln(γ3/g₀), K/k₀]
struct Transform {
    omega0: f64,
    g0: f64,
    k0: f64,
}

impl Transform {
    fn params(&self, x: &DVector<f64>) -> KerrResonatorParams {
        KerrResonatorParams {
            omega_r: self.omega0 + x[0] * self.g0,
            gamma1: self.g0 * x[1].exp(),
            gamma2: self.g0 * x[2].exp(),
            gamma3: self.g0 * x[3].exp(),
            kerr: x[4] * self.k0,
        }
    }

    fn coords(&self, p: &KerrResonatorParams) -> DVector<f64> {
        DVector::from_vec(vec![
            (p.omega_r - self.omega0) / self.g0,
            (p.gamma1 / self.g0).ln(),
            (p.gamma2 / self.g0).ln(),
            (p.gamma3 / self.g0).ln(),
            p.kerr / self.k0,
        ])
    }

    // d(physical)/dx at x
    fn scales(&self, p: &KerrResonatorParams) -> [f64; 5] {
        [self.g0, p.gamma1, p.gamma2, p.gamma3, self.k0]
    }
}

fn residuals(data: &S11Dataset, p: &KerrResonatorParams) -> Result<Vec<Vec<f64>>> {
    data.traces
        .par_iter()
        .map(|t| {
            let m = sweep_trace_single(p, data.sample_power_dbm(t), &t.frequencies, t.direction)?;
            Ok(m.s11
                .iter()
                .zip(&t.s11)
                .flat_map(|(a, b)| {
                    let d = a - b;
                    [d.re, d.im]
                })
                .collect())
        })
        .collect()
}

/// Damped least-squares fit of one parameter set to every trace at once.
///
/// Rates are fitted in log space and `ω_r`, `K` in scaled affine coordinates.
/// A fit that runs out of iterations is still returned, with
/// `converged = false`.
///
/// When `init` puts some traces above the bistability threshold, the jump
/// positions make the cost piecewise smooth with many local minima. The
/// sub-critical traces are then fitted first, `K` is scanned over ±20% on the
/// full data, and the final fit starts from the best scan point.
pub fn nonlinear_fit_with(
    data: &S11Dataset,
    init: &KerrResonatorParams,
    opts: &FitOptions,
) -> Result<FitReport> {
    data.validate()?;
    init.validate()?;
    let powers = data.distinct_powers();
    if powers < 2 {
        return Err(Error::Arity {
            expected: 2,
            got: powers,
        });
    }
    let Some(below) = subcritical(data, init)? else {
        return refine(data, init, opts);
    };
    let (stage, spent) = if below.distinct_powers() >= 2 {
        let r = refine(&below, init, opts)?;
        (r.params, r.iterations)
    } else {
        (*init, 0)
    };
    let start = scan_kerr(data, &stage)?;
    let mut report = refine(data, &start, opts)?;
    report.iterations += spent;
    Ok(report)
}

// Traces `p` predicts below the bistability threshold, or `None` when all are.
fn subcritical(data: &S11Dataset, p: &KerrResonatorParams) -> Result<Option<S11Dataset>> {
    let critical = match bifurcation_point(p) {
        Ok(b) => b.critical_flux,
        Err(Error::NoBifurcation(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let f_r = p.omega_r / TWO_PI;
    let mut below = Vec::new();
    for t in &data.traces {
        if DriveTone::from_dbm(f_r, data.sample_power_dbm(t))?.photon_flux() < critical {
            below.push(t.clone());
        }
    }
    if below.len() == data.traces.len() {
        return Ok(None);
    }
    Ok(Some(S11Dataset {
        traces: below,
        attenuation_offset_db: data.attenuation_offset_db,
    }))
}

fn scan_kerr(data: &S11Dataset, p: &KerrResonatorParams) -> Result<KerrResonatorParams> {
    const STEPS: usize = 80;
    let costs = (0..=STEPS)
        .into_par_iter()
        .map(|i| {
            let q = KerrResonatorParams {
                kerr: p.kerr * (0.8 + 0.4 * i as f64 / STEPS as f64),
                ..*p
            };
            let c: f64 = residuals(data, &q)?.iter().flatten().map(|v| v * v).sum();
            Ok((c, q))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(costs
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, q)| q)
        .unwrap_or(*p))
}

fn refine(data: &S11Dataset, init: &KerrResonatorParams, opts: &FitOptions) -> Result<FitReport> {
    let g0 = init.total_linear_loss();
    let tf = Transform {
        omega0: init.omega_r,
        g0,
        k0: if init.kerr != 0.0 {
            init.kerr.abs()
        } else {
            1e-3 * g0
        },
    };
    let floor = (opts.rate_floor * g0).max(f64::MIN_POSITIVE);
    let start = KerrResonatorParams {
        gamma2: init.gamma2.max(floor),
        gamma3: init.gamma3.max(floor),
        ..*init
    };
    let ln_floor = (floor / g0).ln();
    let lower = DVector::from_vec(vec![
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
        ln_floor,
        ln_floor,
        f64::NEG_INFINITY,
    ]);

    let f = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let r = residuals(data, &tf.params(x))?;
        Ok(DVector::from_vec(r.concat()))
    };
    let fit = levenberg_marquardt(f, tf.coords(&start), Some(&lower), &opts.lm)?;
    let params = tf.params(&fit.x);

    let m = fit.residuals.len();
    let dof = m.saturating_sub(5).max(1) as f64;
    let s2 = fit.residuals.norm_squared() / dof;
    let jtj = fit.jacobian.transpose() * &fit.jacobian;
    let inv = jtj
        .clone()
        .pseudo_inverse(1e-12 * jtj.diagonal().max())
        .map_err(|e| Error::Conditioning(e.to_string()))?;
    let sc = tf.scales(&params);
    let mut covariance = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            covariance[i][j] = s2 * v * (sc[i] * sc[j]);
        }
    }
    let std_errors = std::array::from_fn(|i| covariance[i][i].max(0.0).sqrt());

    let per: Vec<Vec<f64>> = residuals(data, &params)?;
    let per_trace_residuals = per
        .iter()
        .map(|r| (r.iter().map(|v| v * v).sum::<f64>() / (r.len() / 2) as f64).sqrt())
        .collect();
    let residual_rms = (fit.residuals.norm_squared() / (m / 2) as f64).sqrt();
    let gamma3_at_bound = fit.x[3] <= ln_floor + 1e-9;
    if gamma3_at_bound {
        warn!("two-photon loss rate reached its lower bound");
    }
    if !fit.converged {
        warn!("fit did not converge in {} iterations", fit.iterations);
    }
    Ok(FitReport {
        params,
        covariance,
        std_errors,
        residual_rms,
        per_trace_residuals,
        converged: fit.converged,
        iterations: fit.iterations,
        gamma3_at_bound,
    })
}

impl FitReport {
    /// Parameters in Hz (each rate divided by 2π), ordered `(f_r, γ1, γ2, γ3, K)`.
    pub fn params_hz(&self) -> [f64; 5] {
        let p = &self.params;
        [p.omega_r, p.gamma1, p.gamma2, p.gamma3, p.kerr].map(|v| v / TWO_PI)
    }
}
