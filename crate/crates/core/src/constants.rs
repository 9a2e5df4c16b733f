//! Physical constants (CODATA 2018 exact/recommended values) and unit helpers.

use std::f64::consts::PI;

/// Planck constant, J·s (exact).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Elementary charge, C (exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Boltzmann constant, J/K (exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Magnetic flux quantum h/2e, Wb.
pub const FLUX_QUANTUM: f64 = 2.067_833_848_461_929e-15;

pub const TWO_PI: f64 = 2.0 * PI;

/// Power in dBm to watts.
pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

/// Power in watts to dBm.
pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * (watt / 1e-3).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Hz to rad/s.
#[inline]
pub fn angular(hz: f64) -> f64 {
    TWO_PI * hz
}

/// rad/s to Hz.
#[inline]
pub fn hertz(rad_per_s: f64) -> f64 {
    rad_per_s / TWO_PI
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_quantum_is_h_over_2e() {
        let derived = PLANCK / (2.0 * ELEMENTARY_CHARGE);
        assert!((derived - FLUX_QUANTUM).abs() / FLUX_QUANTUM < 1e-15);
    }

    #[test]
    fn dbm_round_trip() {
        for dbm in [-150.0, -103.0, 0.0, 13.0] {
            assert!((watt_to_dbm(dbm_to_watt(dbm)) - dbm).abs() < 1e-12);
        }
        assert_eq!(dbm_to_watt(0.0), 1e-3);
    }
}
