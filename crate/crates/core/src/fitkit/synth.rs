use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{S11Dataset, S11Trace};
use crate::dynamics::{sweep_trace, Direction, KerrResonatorParams};
use crate::error::{Error, Result};

/// Simulated traces at `powers_dbm` (as reported; the sample sees
/// `power + attenuation_offset_db`), with complex Gaussian noise of power
/// `10^(−snr/10)` per point when `snr_db` is given.
///
/// Noise is drawn trace by trace in the order given, so a seed fixes the
/// dataset exactly.
pub fn synthesize(
    params: &KerrResonatorParams,
    powers_dbm: &[f64],
    freq_grid: &[f64],
    direction: Direction,
    snr_db: Option<f64>,
    seed: u64,
    attenuation_offset_db: f64,
) -> Result<S11Dataset> {
    params.validate()?;
    if powers_dbm.is_empty() {
        return Err(Error::Arity {
            expected: 1,
            got: 0,
        });
    }
    let sample: Vec<f64> = powers_dbm
        .iter()
        .map(|p| p + attenuation_offset_db)
        .collect();
    let clean = sweep_trace(params, &sample, freq_grid, direction)?;
    let noise = match snr_db {
        Some(snr) if snr.is_finite() => {
            // split evenly between quadratures
            let sigma = 10f64.powf(-snr / 20.0) / 2f64.sqrt();
            Some(Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?)
        }
        Some(snr) => return Err(Error::Domain(format!("SNR must be finite, got {snr}"))),
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traces = clean
        .into_iter()
        .zip(powers_dbm)
        .map(|(t, &power_dbm)| {
            let s11 = match &noise {
                Some(n) => t
                    .s11
                    .iter()
                    .map(|s| s + Complex64::new(n.sample(&mut rng), n.sample(&mut rng)))
                    .collect(),
                None => t.s11,
            };
            S11Trace {
                power_dbm,
                direction,
                frequencies: t.frequencies,
                s11,
            }
        })
        .collect();
    S11Dataset::new(traces, attenuation_offset_db)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> KerrResonatorParams {
        KerrResonatorParams::from_hz(5.849e9, 11e6, 0.95e6, 11e3, -135e3).unwrap()
    }

    fn grid() -> Vec<f64> {
        (0..201).map(|k| 5.78e9 + k as f64 * 0.6e6).collect()
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let a = synthesize(
            &params(),
            &[-125.0, -115.0],
            &grid(),
            Direction::Up,
            Some(40.0),
            7,
            0.0,
        )
        .unwrap();
        let b = synthesize(
            &params(),
            &[-125.0, -115.0],
            &grid(),
            Direction::Up,
            Some(40.0),
            7,
            0.0,
        )
        .unwrap();
        let c = synthesize(
            &params(),
            &[-125.0, -115.0],
            &grid(),
            Direction::Up,
            Some(40.0),
            8,
            0.0,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_power_matches_snr() {
        let clean = synthesize(
            &params(),
            &[-125.0; 20],
            &grid(),
            Direction::Up,
            None,
            0,
            0.0,
        )
        .unwrap();
        let noisy = synthesize(
            &params(),
            &[-125.0; 20],
            &grid(),
            Direction::Up,
            Some(30.0),
            3,
            0.0,
        )
        .unwrap();
        let mut acc = 0.0;
        let mut count = 0.0;
        for (c, n) in clean.traces.iter().zip(&noisy.traces) {
            for (a, b) in c.s11.iter().zip(&n.s11) {
                acc += (a - b).norm_sqr();
                count += 1.0;
            }
        }
        let measured = acc / count;
        assert!((measured / 1e-3 - 1.0).abs() < 0.05, "{measured}");
    }

    #[test]
    fn offset_shifts_sample_power_only() {
        let a = synthesize(&params(), &[-120.0], &grid(), Direction::Up, None, 0, -5.0).unwrap();
        let b = synthesize(&params(), &[-125.0], &grid(), Direction::Up, None, 0, 0.0).unwrap();
        assert_eq!(a.traces[0].power_dbm, -120.0);
        assert_eq!(a.traces[0].s11, b.traces[0].s11);
    }
}
