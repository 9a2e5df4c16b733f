//! Levenberg-Marquardt damped least squares with a central-difference Jacobian.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when `‖δx‖ ≤ step_tolerance (‖x‖ + step_tolerance)`.
    pub step_tolerance: f64,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub cost_tolerance: f64,
    pub initial_damping: f64,
    /// Relative central-difference step.
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            step_tolerance: 1e-8,
            cost_tolerance: 1e-10,
            initial_damping: 1e-3,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub x: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Jacobian at `x`.
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LmResult {
    pub fn cost(&self) -> f64 {
        0.5 * self.residuals.norm_squared()
    }
}

/// Numerical Jacobian of `f` at `x`, columns evaluated in parallel.
pub fn jacobian<F>(f: &F, x: &DVector<f64>, rel_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    let cols: Vec<DVector<f64>> = (0..x.len())
        .into_par_iter()
        .map(|j| {
            let h = rel_step * x[j].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            Ok((f(&xp)? - f(&xm)?) / (2.0 * h))
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&cols))
}

/// Minimize `½‖f(x)‖²`, keeping each coordinate at or above `lower` when given.
pub fn levenberg_marquardt<F>(
    f: F,
    x0: DVector<f64>,
    lower: Option<&DVector<f64>>,
    opts: &LmOptions,
) -> Result<LmResult>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
{
    let clamp = |mut x: DVector<f64>| {
        if let Some(lo) = lower {
            for (v, l) in x.iter_mut().zip(lo.iter()) {
                *v = v.max(*l);
            }
        }
        x
    };
    let mut x = clamp(x0);
    let mut r = f(&x)?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams(
            "non-finite residuals at the starting point".into(),
        ));
    }
    let mut cost = 0.5 * r.norm_squared();
    let mut jac = jacobian(&f, &x, opts.fd_step)?;
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let trial = clamp(&x + &step);
            let actual = &trial - &x;
            let tr = f(&trial)?;
            let tcost = 0.5 * tr.norm_squared();
            if tcost.is_finite() && tcost <= cost {
                let small_step =
                    actual.norm() <= opts.step_tolerance * (x.norm() + opts.step_tolerance);
                let small_gain = cost - tcost <= opts.cost_tolerance * cost;
                x = trial;
                r = tr;
                cost = tcost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if actual.norm() <= opts.step_tolerance * (x.norm() + opts.step_tolerance) {
                // damping has shrunk the step below resolution: a minimum
                converged = true;
                break;
            }
        }
        if converged || !accepted {
            converged = converged || cost == 0.0;
            break;
        }
        jac = jacobian(&f, &x, opts.fd_step)?;
        if cost == 0.0 {
            converged = true;
            break;
        }
    }
    let jac = jacobian(&f, &x, opts.fd_step)?;
    Ok(LmResult {
        x,
        residuals: r,
        jacobian: jac,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_minimum() {
        let f = |x: &DVector<f64>| {
            Ok(DVector::from_vec(vec![
                10.0 * (x[1] - x[0] * x[0]),
                1.0 - x[0],
            ]))
        };
        let r = levenberg_marquardt(
            f,
            DVector::from_vec(vec![-1.2, 1.0]),
            None,
            &LmOptions::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!(
            (r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6,
            "{}",
            r.x
        );
    }

    #[test]
    fn exponential_fit_recovers_parameters() {
        let ts: Vec<f64> = (0..30).map(|k| k as f64 * 0.1).collect();
        let data: Vec<f64> = ts.iter().map(|t| 2.5 * (-1.3 * t).exp() + 0.2).collect();
        let f = |x: &DVector<f64>| {
            Ok(DVector::from_iterator(
                ts.len(),
                ts.iter()
                    .zip(&data)
                    .map(|(t, y)| x[0] * (-x[1] * t).exp() + x[2] - y),
            ))
        };
        let r = levenberg_marquardt(
            f,
            DVector::from_vec(vec![1.0, 0.5, 0.0]),
            None,
            &LmOptions::default(),
        )
        .unwrap();
        assert!(
            (r.x[0] - 2.5).abs() < 1e-7
                && (r.x[1] - 1.3).abs() < 1e-7
                && (r.x[2] - 0.2).abs() < 1e-7
        );
    }

    #[test]
    fn lower_bound_is_respected() {
        // unconstrained minimum at x = -2
        let f = |x: &DVector<f64>| Ok(DVector::from_vec(vec![x[0] + 2.0]));
        let lo = DVector::from_vec(vec![0.5]);
        let r = levenberg_marquardt(
            f,
            DVector::from_vec(vec![3.0]),
            Some(&lo),
            &LmOptions::default(),
        )
        .unwrap();
        assert!((r.x[0] - 0.5).abs() < 1e-12);
    }
}
