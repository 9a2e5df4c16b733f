use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PumpOperatingPoint;
use crate::constants::{linear_to_db, TWO_PI};
use crate::dynamics::KerrResonatorParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainOptions {
    /// Gains above this are clipped and the curve flagged as diverged.
    pub ceiling_db: f64,
    /// Reported idler gain when the idler vanishes.
    pub idler_floor_db: f64,
}

impl Default for GainOptions {
    fn default() -> Self {
        Self {
            ceiling_db: 60.0,
            idler_floor_db: -200.0,
        }
    }
}

/// Signal and idler gain versus signal frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurve {
    pub pump_frequency: f64,
    pub signal_freqs: Vec<f64>,
    pub idler_freqs: Vec<f64>,
    pub signal_gain: Vec<f64>,
    pub idler_gain: Vec<f64>,
    pub peak_gain: f64,
    /// Width of the region around the peak within 3 dB of it; `None` when
    /// that region reaches the edge of the span.
    pub bandwidth_3db: Option<f64>,
    /// `√G_peak × bandwidth` with `G_peak` the linear power gain.
    pub gbw: Option<f64>,
    /// Set when any point hit the gain ceiling or a singular matrix.
    pub diverged: bool,
}

impl GainCurve {
    pub fn peak_index(&self) -> usize {
        self.signal_gain
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

pub fn gain_curve(op: &PumpOperatingPoint, span: f64, npoints: usize) -> Result<GainCurve> {
    gain_curve_with(op, span, npoints, &GainOptions::default())
}

/// Gain on `npoints` signal frequencies spread over `span` Hz centred on the pump.
pub fn gain_curve_with(
    op: &PumpOperatingPoint,
    span: f64,
    npoints: usize,
    opts: &GainOptions,
) -> Result<GainCurve> {
    if npoints < 3 {
        return Err(Error::Precondition(
            "gain curve needs at least 3 points".into(),
        ));
    }
    if !(span > 0.0) || !span.is_finite() {
        return Err(Error::Precondition("gain curve span must be > 0".into()));
    }
    let offsets: Vec<f64> = (0..npoints)
        .map(|k| -span / 2.0 + span * k as f64 / (npoints - 1) as f64)
        .collect();
    let points: Vec<(f64, f64, bool)> = offsets
        .par_iter()
        .map(|&df| {
            let (sg, ig, diverged) = gains_db(op, TWO_PI * df, opts);
            (sg, ig, diverged)
        })
        .collect();
    let diverged = points.iter().any(|p| p.2);
    if diverged {
        warn!(
            "gain reached the {} dB ceiling; operating point is at or past the instability",
            opts.ceiling_db
        );
    }
    let signal_freqs: Vec<f64> = offsets.iter().map(|df| op.pump.frequency + df).collect();
    let idler_freqs = signal_freqs
        .iter()
        .map(|&f| op.idler_frequency(f))
        .collect();
    let signal_gain: Vec<f64> = points.iter().map(|p| p.0).collect();
    let idler_gain = points.iter().map(|p| p.1).collect();
    let (peak_idx, peak_gain) = signal_gain
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let bandwidth_3db = bandwidth_on_grid(&signal_freqs, &signal_gain, peak_idx);
    let gbw = bandwidth_3db.map(|bw| 10f64.powf(peak_gain / 20.0) * bw);
    Ok(GainCurve {
        pump_frequency: op.pump.frequency,
        signal_freqs,
        idler_freqs,
        signal_gain,
        idler_gain,
        peak_gain,
        bandwidth_3db,
        gbw,
        diverged,
    })
}

fn gains_db(op: &PumpOperatingPoint, delta: f64, opts: &GainOptions) -> (f64, f64, bool) {
    match op.response(delta) {
        None => (opts.ceiling_db, opts.ceiling_db, true),
        Some((s, i)) => {
            let sg = linear_to_db(s.norm_sqr());
            let ig = if i.norm_sqr() > 0.0 {
                linear_to_db(i.norm_sqr()).max(opts.idler_floor_db)
            } else {
                opts.idler_floor_db
            };
            if sg > opts.ceiling_db || !sg.is_finite() {
                (opts.ceiling_db, ig.min(opts.ceiling_db), true)
            } else {
                (sg, ig.min(opts.ceiling_db), false)
            }
        }
    }
}

// walk out from the peak to the −3 dB crossings, interpolating linearly in dB
fn bandwidth_on_grid(freqs: &[f64], gain: &[f64], peak: usize) -> Option<f64> {
    let level = gain[peak] - 3.0;
    let cross = |a: usize, b: usize| {
        freqs[a] + (level - gain[a]) / (gain[b] - gain[a]) * (freqs[b] - freqs[a])
    };
    let mut lo = None;
    for k in (0..peak).rev() {
        if gain[k] < level {
            lo = Some(cross(k, k + 1));
            break;
        }
    }
    let hi = (peak + 1..gain.len())
        .find(|&k| gain[k] < level)
        .map(|k| cross(k - 1, k));
    Some(hi? - lo?)
}

/// Location, height and −3 dB width of the signal-gain maximum, found off-grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakResponse {
    /// Signal offset from the pump at the maximum, rad/s.
    pub delta: f64,
    pub gain_db: f64,
    /// Hz; `None` if a −3 dB edge lies beyond ±20 linewidths.
    pub bandwidth_3db: Option<f64>,
}

fn signal_gain_db(op: &PumpOperatingPoint, delta: f64) -> f64 {
    match op.response(delta) {
        Some((s, _)) => linear_to_db(s.norm_sqr()),
        None => f64::INFINITY,
    }
}

/// Maximum of the signal gain over `δ`, refined by golden-section search.
pub fn peak_response(op: &PumpOperatingPoint) -> PeakResponse {
    let g = op.params.total_linear_loss();
    const COARSE: usize = 1600;
    let reach = 4.0 * g;
    let step = 2.0 * reach / COARSE as f64;
    let (best_k, _) = (0..=COARSE)
        .map(|k| (k, signal_gain_db(op, -reach + step * k as f64)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let x0 = -reach + step * best_k as f64;
    let (mut a, mut b) = (x0 - step, x0 + step);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (signal_gain_db(op, c), signal_gain_db(op, d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = signal_gain_db(op, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = signal_gain_db(op, d);
        }
        if (b - a).abs() < 1e-12 * g {
            break;
        }
    }
    let candidates = [(x0, signal_gain_db(op, x0)), (c, fc), (d, fd)];
    let (delta, gain_db) = candidates
        .into_iter()
        .max_by(|p, q| p.1.total_cmp(&q.1))
        .unwrap();

    let level = gain_db - 3.0;
    let edge = |dir: f64| -> Option<f64> {
        // march outward to the first point below the level, then bisect
        let limit = 20.0 * g;
        let mut inner = delta;
        let mut h = step / 8.0;
        let mut outer = delta + dir * h;
        while signal_gain_db(op, outer) >= level {
            inner = outer;
            h *= 1.5;
            outer = delta + dir * h;
            if h > limit {
                return None;
            }
        }
        for _ in 0..100 {
            let mid = 0.5 * (inner + outer);
            if signal_gain_db(op, mid) >= level {
                inner = mid;
            } else {
                outer = mid;
            }
            if (outer - inner).abs() < 1e-12 * g {
                break;
            }
        }
        Some(0.5 * (inner + outer))
    };
    let bandwidth_3db = match (edge(-1.0), edge(1.0)) {
        (Some(lo), Some(hi)) => Some((hi - lo) / TWO_PI),
        _ => None,
    };
    PeakResponse {
        delta,
        gain_db,
        bandwidth_3db,
    }
}

/// A span (Hz) centred on the pump that contains the whole −3 dB band with margin.
pub fn suggested_span(op: &PumpOperatingPoint) -> f64 {
    let peak = peak_response(op);
    let g = op.params.total_linear_loss() / TWO_PI;
    match peak.bandwidth_3db {
        Some(bw) => 2.0 * (peak.delta.abs() / TWO_PI + 2.0 * bw).max(0.5 * g),
        None => 8.0 * g,
    }
}

/// Mean and relative spread `(max − min)/mean` of the gain-bandwidth products.
pub fn gain_bandwidth_product(curves: &[GainCurve]) -> Result<(f64, f64)> {
    if curves.len() < 2 {
        return Err(Error::Arity {
            expected: 2,
            got: curves.len(),
        });
    }
    let mut values = Vec::with_capacity(curves.len());
    for c in curves {
        if c.peak_gain < 10.0 {
            return Err(Error::Precondition(format!(
                "gain-bandwidth product needs peak gains >= 10 dB, got {:.2} dB",
                c.peak_gain
            )));
        }
        values.push(c.gbw.ok_or_else(|| {
            Error::Precondition("a curve's −3 dB band extends past its frequency span".into())
        })?);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((mean, (max - min) / mean))
}

/// Fraction of critical power at which the peak signal gain equals `target_db`.
pub fn operating_point_for_gain(
    params: KerrResonatorParams,
    pump_frequency: f64,
    target_db: f64,
) -> Result<PumpOperatingPoint> {
    let peak_at = |fraction: f64| -> Result<(PumpOperatingPoint, f64)> {
        let op = PumpOperatingPoint::build(params, pump_frequency, fraction)?;
        let g = peak_response(&op).gain_db;
        Ok((op, g))
    };
    let (mut lo, mut hi) = (0.0, 1.0 - 1e-9);
    let (top, best) = peak_at(hi)?;
    if best < target_db {
        return Err(Error::GainUnreachable {
            target_db,
            best_db: best,
        });
    }
    let (bottom, g0) = peak_at(lo)?;
    if g0 >= target_db {
        return Ok(bottom);
    }
    let mut chosen = top;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (op, g) = peak_at(mid)?;
        if (g - target_db).abs() < 1e-9 || hi - lo < 1e-15 {
            chosen = op;
            break;
        }
        if g < target_db {
            lo = mid;
        } else {
            hi = mid;
            chosen = op;
        }
    }
    Ok(chosen)
}
