//! Real roots of a cubic with real coefficients.
//!
//! One root comes from the trigonometric/Cardano resolvent; the cubic is then
//! deflated to a quadratic solved with the cancellation-free formula. Every
//! root is Newton-polished on the undeflated polynomial.

/// Real roots of `a y^3 + b y^2 + c y + d`, ascending, `a != 0`.
pub fn real_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    debug_assert!(a != 0.0);
    let (p, q, r) = (b / a, c / a, d / a);
    let poly = |y: f64| ((y + p) * y + q) * y + r;
    let dpoly = |y: f64| (3.0 * y + 2.0 * p) * y + q;
    let scale = |y: f64| {
        (y.abs().powi(3) + (p * y * y).abs() + (q * y).abs() + r.abs()).max(f64::MIN_POSITIVE)
    };

    let polish = |mut y: f64| {
        for _ in 0..50 {
            let f = poly(y);
            if f.abs() <= 1e-15 * scale(y) {
                break;
            }
            let df = dpoly(y);
            if df == 0.0 {
                break;
            }
            let step = f / df;
            let next = y - step;
            // accept only if the residual does not grow
            if poly(next).abs() > f.abs() {
                break;
            }
            y = next;
            if step.abs() <= 1e-16 * y.abs() {
                break;
            }
        }
        y
    };

    let y1 = polish(resolvent_root(p, q, r));

    // deflate: y^3 + p y^2 + q y + r = (y - y1)(y^2 + e y + f); pick the
    // forward or backward recurrence, whichever reproduces the dropped
    // coefficient better
    let (e_fwd, f_fwd) = (p + y1, q + y1 * (p + y1));
    let (e, f) = if y1 != 0.0 {
        let f_bwd = -r / y1;
        let e_bwd = (f_bwd - q) / y1;
        let err_fwd =
            (-y1 * f_fwd - r).abs() / (r.abs() + (y1 * f_fwd).abs()).max(f64::MIN_POSITIVE);
        let err_bwd =
            (e_bwd - y1 - p).abs() / (p.abs() + y1.abs() + e_bwd.abs()).max(f64::MIN_POSITIVE);
        if err_bwd < err_fwd {
            (e_bwd, f_bwd)
        } else {
            (e_fwd, f_fwd)
        }
    } else {
        (e_fwd, f_fwd)
    };
    let mut roots = vec![y1];
    let disc = e * e - 4.0 * f;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let t = -0.5 * (e + if e >= 0.0 { s } else { -s });
        if t != 0.0 {
            roots.push(polish(t));
            roots.push(polish(f / t));
        } else {
            roots.push(0.0);
            roots.push(0.0);
        }
    }
    roots.sort_by(|x, y| x.total_cmp(y));
    roots
}

// Largest-magnitude real root of the monic cubic via the depressed form.
fn resolvent_root(p: f64, q: f64, r: f64) -> f64 {
    let shift = p / 3.0;
    let pp = q - p * p / 3.0;
    let qq = 2.0 * p * p * p / 27.0 - p * q / 3.0 + r;
    let disc = (qq / 2.0).powi(2) + (pp / 3.0).powi(3);
    let t = if disc > 0.0 {
        let s = disc.sqrt();
        let u = (-qq / 2.0 - qq.signum() * s).cbrt();
        if u == 0.0 {
            0.0
        } else {
            u - pp / (3.0 * u)
        }
    } else if pp == 0.0 {
        0.0
    } else {
        let m = 2.0 * (-pp / 3.0).sqrt();
        let arg = (3.0 * qq / (pp * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .fold(f64::NAN, |acc, t| {
                if acc.is_nan() || (t - shift).abs() > (acc - shift).abs() {
                    t
                } else {
                    acc
                }
            })
    };
    t - shift
}
