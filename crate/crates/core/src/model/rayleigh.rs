//! Two-fluid (Rayleigh) plane-wave reflection coefficient.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative density, relative sound speed and dimensionless absorption of the
/// lower half-space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayleighParams {
    pub rho_r: f64,
    pub c_r: f64,
    pub delta: f64,
}

impl RayleighParams {
    pub fn new(rho_r: f64, c_r: f64, delta: f64) -> Result<Self> {
        if !(rho_r > 0.0 && rho_r.is_finite()) {
            return Err(Error::invalid(format!("rho_r must be positive, got {rho_r}")));
        }
        if !(c_r > 0.0 && c_r.is_finite()) {
            return Err(Error::invalid(format!("c_r must be positive, got {c_r}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("delta must be non-negative, got {delta}")));
        }
        Ok(Self { rho_r, c_r, delta })
    }
}

/// Complex reflection coefficient at incidence angle `gamma` from the normal.
pub fn rayleigh_coeff(gamma: f64, rho_r: f64, c_r: f64, delta: f64) -> Result<Complex64> {
    RayleighParams::new(rho_r, c_r, delta)?;
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&gamma) {
        return Err(Error::invalid(format!("incidence angle {gamma} outside [0, π/2]")));
    }
    Ok(rayleigh_eval(gamma.cos(), rho_r, c_r, delta, None).0)
}

/// Principal square root; on the branch cut the root with positive imaginary
/// part is returned.
pub(crate) fn principal_sqrt(z: Complex64) -> Complex64 {
    let s = z.sqrt();
    if s.re == 0.0 && s.im < 0.0 {
        -s
    } else {
        s
    }
}

/// Coefficient as a function of `cos γ`, its derivative in `cos γ`, and
/// optionally `∂Γ/∂(rho_r, c_r, delta)`.
pub(crate) fn rayleigh_eval(
    cos_g: f64,
    rho_r: f64,
    c_r: f64,
    delta: f64,
    param_grad: Option<&mut [Complex64]>,
) -> (Complex64, Complex64) {
    let dbar = Complex64::new(1.0, delta);
    let sin2 = 1.0 - cos_g * cos_g;
    let ratio = dbar / c_r;
    let s2 = ratio * ratio - sin2;
    let s = principal_sqrt(s2);
    let rc = rho_r * cos_g;
    let num = rc - s;
    let den = rc + s;
    let gamma = num / den;

    // dΓ = 2 (S d(ρ cos) − ρ cos dS) / den²,  dS = d(S²) / 2S
    let inv_den2 = (den * den).inv();
    let inv_2s = if s.norm() > 1e-300 { (2.0 * s).inv() } else { Complex64::new(0.0, 0.0) };
    let d_gamma = |d_rc: f64, d_s2: Complex64| -> Complex64 {
        let ds = d_s2 * inv_2s;
        2.0 * (s * d_rc - rc * ds) * inv_den2
    };

    let d_cos = d_gamma(rho_r, Complex64::new(2.0 * cos_g, 0.0));
    if let Some(g) = param_grad {
        g[0] = d_gamma(cos_g, Complex64::new(0.0, 0.0));
        g[1] = d_gamma(0.0, -2.0 * dbar * dbar / (c_r * c_r * c_r));
        g[2] = d_gamma(0.0, 2.0 * dbar * Complex64::i() / (c_r * c_r));
    }
    (gamma, d_cos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn matched_medium_is_transparent() {
        // exact grazing is a 0/0 limit and is left out
        for i in 0..20 {
            let g = FRAC_PI_2 * i as f64 / 20.0;
            let c = rayleigh_coeff(g, 1.0, 1.0, 0.0).unwrap();
            assert!(c.norm() < 1e-12, "gamma {g}: {c}");
        }
    }

    #[test]
    fn normal_incidence_value() {
        let c = rayleigh_coeff(0.0, 1.5, 0.9, 0.0).unwrap();
        let expected = (1.5 - 1.0 / 0.9) / (1.5 + 1.0 / 0.9);
        assert!((c.re - expected).abs() < 1e-14);
        assert!(c.im.abs() < 1e-14);
        assert!((expected - 0.14894).abs() < 1e-5);
    }

    #[test]
    fn total_reflection_past_critical_angle() {
        let (rho, cr): (f64, f64) = (1.8, 1.2);
        let critical = (1.0 / cr).asin();
        for i in 1..20 {
            let g = critical + (FRAC_PI_2 - critical) * i as f64 / 20.0;
            let c = rayleigh_coeff(g, rho, cr, 0.0).unwrap();
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn passive_without_absorption() {
        for &(rho, cr) in &[(1.5, 0.9), (1.2, 1.1), (2.0, 1.8), (0.5, 0.7)] {
            for i in 0..=200 {
                let g = FRAC_PI_2 * i as f64 / 200.0;
                let c = rayleigh_coeff(g, rho, cr, 0.0).unwrap();
                assert!(c.norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn branch_choice_on_cut() {
        let s = principal_sqrt(Complex64::new(-4.0, -0.0));
        assert_eq!(s, Complex64::new(0.0, 2.0));
        let s = principal_sqrt(Complex64::new(-4.0, 0.0));
        assert_eq!(s, Complex64::new(0.0, 2.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(rayleigh_coeff(0.1, 0.0, 1.0, 0.0).is_err());
        assert!(rayleigh_coeff(0.1, 1.0, -1.0, 0.0).is_err());
        assert!(rayleigh_coeff(0.1, 1.0, 1.0, -0.1).is_err());
        assert!(rayleigh_coeff(2.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let (cos_g, rho, cr, delta) = (0.43, 1.4, 1.15, 0.02);
        let mut g = [Complex64::new(0.0, 0.0); 3];
        let (_, d_cos) = rayleigh_eval(cos_g, rho, cr, delta, Some(&mut g));
        let h = 1e-6;
        let f = |c: f64, r: f64, v: f64, d: f64| rayleigh_eval(c, r, v, d, None).0;
        let fd = [
            (f(cos_g + h, rho, cr, delta) - f(cos_g - h, rho, cr, delta)) / (2.0 * h),
            (f(cos_g, rho + h, cr, delta) - f(cos_g, rho - h, cr, delta)) / (2.0 * h),
            (f(cos_g, rho, cr + h, delta) - f(cos_g, rho, cr - h, delta)) / (2.0 * h),
            (f(cos_g, rho, cr, delta + h) - f(cos_g, rho, cr, delta - h)) / (2.0 * h),
        ];
        let an = [d_cos, g[0], g[1], g[2]];
        for (a, b) in an.iter().zip(fd.iter()) {
            assert!((a - b).norm() < 1e-7 * (1.0 + b.norm()), "{a} vs {b}");
        }
    }
}
