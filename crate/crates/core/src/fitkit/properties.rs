//! Whole-pipeline properties of the fit: round trips, sweep direction and
//! interval coverage.

use crate::constants::TWO_PI;
use crate::dynamics::{critical_flux_at, Direction, DriveTone, KerrResonatorParams};
use crate::fitkit::{initial_guess, nonlinear_fit, synthesize, S11Dataset};
use proptest::prelude::*;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn dataset(
    p: &KerrResonatorParams,
    fractions: &[f64],
    points: usize,
    snr: Option<f64>,
    seed: u64,
) -> S11Dataset {
    let f_r = p.omega_r / TWO_PI;
    let fc = critical_flux_at(p, 0.0).unwrap();
    let powers: Vec<f64> = fractions
        .iter()
        .map(|x| DriveTone::from_flux(f_r, x * fc).unwrap().dbm())
        .collect();
    let g = p.total_linear_loss() / TWO_PI;
    let grid = linspace(f_r - 5.0 * g, f_r + 5.0 * g, points);
    synthesize(p, &powers, &grid, Direction::Up, snr, seed, 0.0).unwrap()
}

fn sweep_device() -> KerrResonatorParams {
    KerrResonatorParams::from_hz(5.849e9, 11.0e6, 0.95e6, 11e3, -135e3).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn as_array(p: &KerrResonatorParams) -> [f64; 5] {
    [p.omega_r, p.gamma1, p.gamma2, p.gamma3, p.kerr]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn noiseless_round_trip(
        f_r in 4.0e9..7.0e9,
        g1 in 3.0e6..20.0e6,
        ratio2 in 0.03..0.4,
        ratio3 in 0.02..0.2,
        kerr in -300e3f64..-30e3,
    ) {
        let p = KerrResonatorParams::from_hz(f_r, g1, ratio2 * g1, ratio3 * kerr.abs(), kerr).unwrap();
        let data = dataset(&p, &[0.01, 0.25, 0.5, 0.75, 0.95], 201, None, 0);
        let r = nonlinear_fit(&data, &initial_guess(&data).unwrap()).unwrap();
        prop_assert!(r.converged);
        for (got, want) in as_array(&r.params).iter().zip(as_array(&p)) {
            prop_assert!(rel(*got, want) < 1e-6, "{got} vs {want}");
        }
    }
}

#[test]
fn sweep_direction_matters_above_critical() {
    let p = sweep_device();
    let data = dataset(&p, &[0.01, 0.5, 2.0, 4.0, 8.0], 401, Some(40.0), 7);
    let init = initial_guess(&data).unwrap();
    let matched = nonlinear_fit(&data, &init).unwrap();
    let mut flipped = data.clone();
    for t in &mut flipped.traces {
        t.direction = Direction::Down;
    }
    let mismatched = nonlinear_fit(&flipped, &init).unwrap();
    assert!(
        mismatched.residual_rms >= 10.0 * matched.residual_rms,
        "matched {:.3e}, mismatched {:.3e}",
        matched.residual_rms,
        mismatched.residual_rms
    );
}

#[test]
fn one_sigma_intervals_cover_truth() {
    let p = sweep_device();
    let truth = as_array(&p);
    let reps = 100;
    let mut hits = [0usize; 5];
    for seed in 0..reps {
        let data = dataset(
            &p,
            &[0.01, 0.25, 0.5, 0.75, 0.95],
            201,
            Some(40.0),
            1000 + seed,
        );
        let r = nonlinear_fit(&data, &initial_guess(&data).unwrap()).unwrap();
        for (k, (got, want)) in as_array(&r.params).iter().zip(truth).enumerate() {
            if (got - want).abs() <= r.std_errors[k] {
                hits[k] += 1;
            }
        }
    }
    for (k, h) in hits.iter().enumerate() {
        assert!(
            *h as f64 >= 0.6 * reps as f64,
            "parameter {k}: {h}/{reps} covered ({hits:?})"
        );
    }
}
