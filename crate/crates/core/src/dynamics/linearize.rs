//! Small-fluctuation matrix about a driven steady state.
//!
//! Writing the intracavity field as `α + d e^{-iδt} + d̄* e^{iδt}` in the frame
//! of the drive and keeping first order in `(d, d̄)` gives `M(δ)·[d, d̄] = inputs`
//! with
//!
//! ```text
//! M11 = i(Δ + 2Kn) + γ/2 + 2γ3 n − iδ      M12 = (iK + γ3) α²
//! M21 = conj(M12)                           M22 = −i(Δ + 2Kn) + γ/2 + 2γ3 n − iδ
//! ```
//!
//! The Jacobian of the mean-field flow is `−M(0)`; a steady state is stable
//! when both of its eigenvalues have negative real part. The same matrix
//! yields the parametric gain.

use num_complex::Complex64;

use super::KerrResonatorParams;

/// 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    /// `None` when exactly singular.
    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == Complex64::new(0.0, 0.0) || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        Some(Mat2([
            [m[1][1] / d, -m[0][1] / d],
            [-m[1][0] / d, m[0][0] / d],
        ]))
    }

    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let half_tr = self.trace() / 2.0;
        let s = (half_tr * half_tr - self.det()).sqrt();
        [half_tr + s, half_tr - s]
    }
}

/// `M(δ)` for the state `alpha` driven at detuning `detuning = ω_r − ω_d`.
pub fn fluctuation_matrix(
    p: &KerrResonatorParams,
    detuning: f64,
    alpha: Complex64,
    delta: f64,
) -> Mat2 {
    let n = alpha.norm_sqr();
    let i = Complex64::i();
    let re = p.total_linear_loss() / 2.0 + 2.0 * p.gamma3 * n;
    let im = detuning + 2.0 * p.kerr * n;
    let m11 = Complex64::new(re, im - delta);
    let m22 = Complex64::new(re, -im - delta);
    let m12 = (i * p.kerr + p.gamma3) * alpha * alpha;
    Mat2([[m11, m12], [m12.conj(), m22]])
}

/// Eigenvalues of the mean-field Jacobian `−M(0)`.
pub fn jacobian_eigenvalues(
    p: &KerrResonatorParams,
    detuning: f64,
    alpha: Complex64,
) -> [Complex64; 2] {
    let [a, b] = fluctuation_matrix(p, detuning, alpha, 0.0).eigenvalues();
    [-a, -b]
}

pub fn is_stable(p: &KerrResonatorParams, detuning: f64, alpha: Complex64) -> bool {
    jacobian_eigenvalues(p, detuning, alpha)
        .iter()
        .all(|l| l.re < 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> KerrResonatorParams {
        KerrResonatorParams::from_hz(5.849e9, 11.0e6, 0.95e6, 11e3, -135e3).unwrap()
    }

    #[test]
    fn undriven_matrix_is_diagonal() {
        let p = params();
        let m = fluctuation_matrix(&p, 1e7, Complex64::new(0.0, 0.0), 3e6);
        assert_eq!(m.0[0][1], Complex64::new(0.0, 0.0));
        assert_eq!(m.0[1][0], Complex64::new(0.0, 0.0));
        assert_eq!(
            m.0[0][0],
            Complex64::new(p.total_linear_loss() / 2.0, 1e7 - 3e6)
        );
    }

    #[test]
    fn off_diagonal_conjugate_structure() {
        let p = params();
        for (x, y) in [(1.0, 2.0), (-3.0, 0.5), (7.0, -7.0)] {
            let m = fluctuation_matrix(&p, 2e7, Complex64::new(x, y), -1e6);
            assert_eq!(m.0[1][0], m.0[0][1].conj());
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn inverse_round_trip() {
        let p = params();
        let m = fluctuation_matrix(&p, 2e7, Complex64::new(3.0, 1.0), 5e5);
        let inv = m.inverse().unwrap();
        let a = &m.0;
        let b = &inv.0;
        for r in 0..2 {
            for c in 0..2 {
                let v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!((v - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn determinant_matches_cubic_slope() {
        // det M(0) equals d/dn of n[(Δ+Kn)^2 + (γ/2+γ3 n)^2]
        let p = params();
        let (det_d, n) = (3e7, 40.0_f64);
        let alpha = Complex64::from_polar(n.sqrt(), 0.3);
        let det = fluctuation_matrix(&p, det_d, alpha, 0.0).det();
        let f = |n: f64| {
            n * ((det_d + p.kerr * n).powi(2)
                + (p.total_linear_loss() / 2.0 + p.gamma3 * n).powi(2))
        };
        let h = 1e-3;
        let slope = (f(n + h) - f(n - h)) / (2.0 * h);
        assert!(det.im.abs() < 1e-6 * det.re.abs());
        assert!(((det.re - slope) / slope).abs() < 1e-8);
    }
}
