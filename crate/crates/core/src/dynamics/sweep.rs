//! Frequency sweeps that follow one physical branch through the bistable window.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    s11_of, select_state, steady_states_at, Branch, BranchRule, DriveTone, KerrResonatorParams,
    SteadyState,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "up" => Ok(Direction::Up),
            "down" => Ok(Direction::Down),
            other => Err(Error::Config(format!(
                "direction must be 'up' or 'down', got '{other}'"
            ))),
        }
    }
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

/// One swept trace at fixed drive power, stored in ascending frequency order
/// whatever the sweep direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub power_dbm: f64,
    pub direction: Direction,
    pub frequencies: Vec<f64>,
    pub s11: Vec<Complex64>,
    pub states: Vec<SteadyState>,
}

/// Hysteresis-aware traces for every power, in the order given.
pub fn sweep_trace(
    p: &KerrResonatorParams,
    powers_dbm: &[f64],
    freq_grid: &[f64],
    direction: Direction,
) -> Result<Vec<Trace>> {
    check_grid(freq_grid)?;
    powers_dbm
        .par_iter()
        .map(|&dbm| sweep_trace_single(p, dbm, freq_grid, direction))
        .collect()
}

/// A single trace; see [`sweep_trace`].
pub fn sweep_trace_single(
    p: &KerrResonatorParams,
    power_dbm: f64,
    freq_grid: &[f64],
    direction: Direction,
) -> Result<Trace> {
    check_grid(freq_grid)?;
    let n = freq_grid.len();
    let order: Vec<usize> = match direction {
        Direction::Up => (0..n).collect(),
        Direction::Down => (0..n).rev().collect(),
    };
    let mut states = vec![None; n];
    let mut s11 = vec![Complex64::new(0.0, 0.0); n];
    let mut prev: Option<(SteadyState, usize)> = None;
    for idx in order {
        let drive = DriveTone::from_dbm(freq_grid[idx], power_dbm)?;
        let flux = drive.photon_flux();
        let candidates = steady_states_at(p, p.detuning(drive.frequency), flux);
        let chosen = match prev {
            None => select_state(&candidates, BranchRule::LowestStable),
            Some((last, count)) => {
                let same_label = (count == 3 && candidates.len() == 3)
                    .then(|| {
                        candidates
                            .iter()
                            .find(|s| s.branch == last.branch && s.stable)
                    })
                    .flatten();
                match same_label {
                    Some(s) => *s,
                    None => {
                        select_state(&candidates, BranchRule::NearestStable(last.photon_number))
                    }
                }
            }
        };
        s11[idx] = if flux > 0.0 {
            s11_of(p, flux, &chosen)
        } else {
            super::linear_s11(p, p.detuning(drive.frequency))
        };
        states[idx] = Some(chosen);
        prev = Some((chosen, candidates.len()));
    }
    Ok(Trace {
        power_dbm,
        direction,
        frequencies: freq_grid.to_vec(),
        s11,
        states: states
            .into_iter()
            .map(|s| s.expect("every grid point visited"))
            .collect(),
    })
}

fn check_grid(freq_grid: &[f64]) -> Result<()> {
    if freq_grid.is_empty() {
        return Err(Error::Precondition("empty frequency grid".into()));
    }
    if freq_grid.windows(2).any(|w| !(w[1] > w[0])) || freq_grid.iter().any(|f| !(*f > 0.0)) {
        return Err(Error::Precondition(
            "frequency grid must be positive and strictly ascending".into(),
        ));
    }
    Ok(())
}

impl Trace {
    /// Index of the minimum `|S11|`.
    pub fn dip_index(&self) -> usize {
        self.s11
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn branches(&self) -> impl Iterator<Item = Branch> + '_ {
        self.states.iter().map(|s| s.branch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::watt_to_dbm;
    use crate::constants::PLANCK;
    use crate::dynamics::{bifurcation_point, photon_roots};

    fn sweep_device() -> KerrResonatorParams {
        KerrResonatorParams::from_hz(5.849e9, 11.0e6, 0.95e6, 11e3, -135e3).unwrap()
    }

    fn grid() -> Vec<f64> {
        (0..801)
            .map(|i| 5.78e9 + 0.1e9 * i as f64 / 800.0)
            .collect()
    }

    fn crit_dbm(p: &KerrResonatorParams, scale: f64) -> f64 {
        let b = bifurcation_point(p).unwrap();
        watt_to_dbm(scale * b.critical_flux * PLANCK * p.omega_r / crate::constants::TWO_PI)
    }

    #[test]
    fn below_critical_directions_agree() {
        let p = sweep_device();
        let dbm = crit_dbm(&p, 0.5);
        let up = sweep_trace_single(&p, dbm, &grid(), Direction::Up).unwrap();
        let down = sweep_trace_single(&p, dbm, &grid(), Direction::Down).unwrap();
        for (a, b) in up.s11.iter().zip(&down.s11) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn above_critical_hysteresis_window() {
        let p = sweep_device();
        let dbm = crit_dbm(&p, 4.0);
        let g = grid();
        let up = sweep_trace_single(&p, dbm, &g, Direction::Up).unwrap();
        let down = sweep_trace_single(&p, dbm, &g, Direction::Down).unwrap();
        let differ: Vec<usize> = (0..g.len())
            .filter(|&i| (up.s11[i] - down.s11[i]).norm() > 1e-6)
            .collect();
        assert!(!differ.is_empty());
        // every differing point lies where three roots coexist
        for &i in &differ {
            let flux = crate::constants::dbm_to_watt(dbm) / (PLANCK * g[i]);
            assert_eq!(photon_roots(&p, p.detuning(g[i]), flux).len(), 3);
        }
        assert!(up.states.iter().chain(&down.states).all(|s| s.stable));
    }

    #[test]
    fn traces_keep_input_order() {
        let p = sweep_device();
        let powers = [-130.0, -120.0, -110.0];
        let t = sweep_trace(&p, &powers, &grid(), Direction::Up).unwrap();
        assert_eq!(t.iter().map(|t| t.power_dbm).collect::<Vec<_>>(), powers);
    }

    #[test]
    fn rejects_unsorted_grid() {
        let p = sweep_device();
        assert!(sweep_trace(&p, &[-120.0], &[5.9e9, 5.8e9], Direction::Up).is_err());
    }

    #[test]
    fn linear_traces_power_independent() {
        let p = KerrResonatorParams::from_hz(5.849e9, 11.0e6, 0.95e6, 0.0, 0.0).unwrap();
        let a = sweep_trace_single(&p, -140.0, &grid(), Direction::Up).unwrap();
        let b = sweep_trace_single(&p, -100.0, &grid(), Direction::Down).unwrap();
        for (x, y) in a.s11.iter().zip(&b.s11) {
            assert!((x - y).norm() < 1e-9);
        }
    }
}
