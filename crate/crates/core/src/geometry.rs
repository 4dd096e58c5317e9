//! Cartesian points and ray directions.
//!
//! Coordinates are in meters. `z` is depth, positive downward, with the sea
//! surface (or the tank's water line) at `z = 0`.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn ensure_finite(self, what: &str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::invalid(format!("{what} has non-finite components: {self:?}")))
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Unit propagation vector for azimuth `theta` and polar angle `psi`
/// measured from the +z axis.
pub fn direction_from_angles(theta: f64, psi: f64) -> Result<Vec3> {
    if !theta.is_finite() || !psi.is_finite() {
        return Err(Error::invalid(format!("non-finite angles ({theta}, {psi})")));
    }
    Ok(unit_direction(theta, psi))
}

/// Unchecked variant for hot loops where the angles are known finite.
#[inline]
pub(crate) fn unit_direction(theta: f64, psi: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    Vec3::new(ct * sp, st * sp, cp)
}

/// Direction together with its partial derivatives in `theta` and `psi`.
#[inline]
pub(crate) fn unit_direction_with_partials(theta: f64, psi: f64) -> (Vec3, Vec3, Vec3) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    let dir = Vec3::new(ct * sp, st * sp, cp);
    let d_theta = Vec3::new(-st * sp, ct * sp, 0.0);
    let d_psi = Vec3::new(ct * cp, st * cp, -sp);
    (dir, d_theta, d_psi)
}

/// Inverse of [`direction_from_angles`]: `theta` in `[0, 2π)`, `psi` in `[0, π]`.
/// At the poles `theta` is 0.
pub fn angles_from_direction(u: Vec3) -> Result<(f64, f64)> {
    if !u.is_finite() {
        return Err(Error::invalid("direction has non-finite components"));
    }
    let n = u.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("direction is not a unit vector (norm {n})")));
    }
    let psi = u.z.clamp(-1.0, 1.0).acos();
    let rho = u.x.hypot(u.y);
    let theta = if rho == 0.0 {
        0.0
    } else {
        let t = u.y.atan2(u.x);
        let t = if t < 0.0 { t + TAU } else { t };
        // atan2 can round up to exactly 2π for tiny negative y
        if t >= TAU {
            0.0
        } else {
            t
        }
    };
    Ok((theta, psi))
}

/// Wraps an unconstrained `(theta, psi)` pair to the canonical ranges used for
/// reporting, preserving the direction.
pub fn wrap_angles(theta: f64, psi: f64) -> (f64, f64) {
    let mut psi = psi.rem_euclid(TAU);
    let mut theta = theta;
    if psi > PI {
        psi = TAU - psi;
        theta += PI;
    }
    (theta.rem_euclid(TAU), psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).to_array().iter().all(|c| c.abs() < tol)
    }

    #[test]
    fn axis_directions() {
        assert!(close(direction_from_angles(0.0, PI / 2.0).unwrap(), Vec3::new(1.0, 0.0, 0.0), 1e-15));
        assert!(close(direction_from_angles(PI / 2.0, PI / 2.0).unwrap(), Vec3::new(0.0, 1.0, 0.0), 1e-15));
        for theta in [0.0, 1.3, -4.0, 10.0] {
            assert!(close(direction_from_angles(theta, 0.0).unwrap(), Vec3::new(0.0, 0.0, 1.0), 1e-15));
        }
    }

    #[test]
    fn non_finite_angles_rejected() {
        assert!(matches!(direction_from_angles(f64::NAN, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(direction_from_angles(0.0, f64::INFINITY), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(angles_from_direction(Vec3::new(0.0, 0.0, 1.0)).unwrap(), (0.0, 0.0));
        let (t, p) = angles_from_direction(Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(t, 0.0);
        assert!((p - PI / 2.0).abs() < 1e-15);
        let (t, p) = angles_from_direction(Vec3::new(0.0, -1.0, 0.0)).unwrap();
        assert!((t - 3.0 * PI / 2.0).abs() < 1e-15);
        assert!((p - PI / 2.0).abs() < 1e-15);
        let (t, p) = angles_from_direction(Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert_eq!(t, 0.0);
        assert!((p - PI).abs() < 1e-15);
    }

    #[test]
    fn non_unit_rejected() {
        assert!(angles_from_direction(Vec3::new(1.0, 1.0, 0.0)).is_err());
        assert!(angles_from_direction(Vec3::new(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn partials_match_finite_differences() {
        let (theta, psi) = (0.7, 2.1);
        let (_, dt, dp) = unit_direction_with_partials(theta, psi);
        let h = 1e-6;
        let fd_t = (unit_direction(theta + h, psi) - unit_direction(theta - h, psi)) * (0.5 / h);
        let fd_p = (unit_direction(theta, psi + h) - unit_direction(theta, psi - h)) * (0.5 / h);
        assert!(close(dt, fd_t, 1e-9));
        assert!(close(dp, fd_p, 1e-9));
    }

    proptest! {
        #[test]
        fn round_trip_away_from_poles(theta in 0.0..TAU, psi in 0.01..(PI - 0.01)) {
            let u = direction_from_angles(theta, psi).unwrap();
            prop_assert!((u.norm() - 1.0).abs() < 1e-12);
            let (t2, p2) = angles_from_direction(u).unwrap();
            let v = direction_from_angles(t2, p2).unwrap();
            prop_assert!(close(u, v, 1e-9));
            prop_assert!((0.0..TAU).contains(&t2));
            prop_assert!((0.0..=PI).contains(&p2));
        }

        #[test]
        fn wrapping_preserves_direction(theta in -20.0..20.0f64, psi in -20.0..20.0f64) {
            let (t, p) = wrap_angles(theta, psi);
            prop_assert!((0.0..=PI).contains(&p));
            prop_assert!(close(unit_direction(theta, psi), unit_direction(t, p), 1e-9));
        }
    }
}
