//! Nominal eigenray tables computed from approximate geometry.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::environment::{Environment, Face, Side};
use crate::error::{Error, Result};
use crate::geometry::{angles_from_direction, unit_direction, Vec3};
use crate::oracle::field::SINGULAR_DISTANCE;
use crate::oracle::images::enumerate_images;

/// Direction and distance of one image source as seen from the reference
/// point, so that the image sits at `reference - distance * k̂(theta, psi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NominalRay {
    pub theta: f64,
    pub psi: f64,
    pub distance: f64,
    pub n_s: u32,
    pub n_b: u32,
    /// Per-axis, per-side reflection counts (`[axis][low, high]`).
    pub hits: [[u32; 2]; 3],
    pub reference: Vec3,
}

/// Learned corrections applied on top of a nominal ray.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RayErrors {
    pub theta: f64,
    pub psi: f64,
    pub distance: f64,
}

/// Incidence angle of one reflection, in radians from the face normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incidence {
    pub face: Face,
    pub gamma: f64,
}

impl NominalRay {
    pub fn order(&self) -> u32 {
        self.n_s + self.n_b
    }

    /// Image position after applying `errors`.
    pub fn effective_image(&self, errors: RayErrors) -> Vec3 {
        let dir = unit_direction(self.theta + errors.theta, self.psi + errors.psi);
        self.reference - dir * (self.distance + errors.distance)
    }

    /// Reflection counts on lossy faces summed per axis; the surface is left out.
    pub fn lossy_axis_counts(&self) -> [u32; 3] {
        [self.hits[0][0] + self.hits[0][1], self.hits[1][0] + self.hits[1][1], self.hits[2][1]]
    }
}

/// One nominal ray per image of `source`, sorted by ascending distance from
/// `reference`.
pub fn nominal_rays(env: &Environment, source: Vec3, reference: Vec3, max_order: i64) -> Result<Vec<NominalRay>> {
    reference.ensure_finite("reference point")?;
    if !env.contains_strictly(reference) {
        return Err(Error::invalid(format!("reference point {reference:?} is outside the environment")));
    }
    let mut rays = Vec::new();
    for im in enumerate_images(env, source, max_order)? {
        let v = reference - im.position;
        let d = v.norm();
        if d < SINGULAR_DISTANCE {
            return Err(Error::Singularity(format!("reference point coincides with image at {:?}", im.position)));
        }
        let (theta, psi) = angles_from_direction(v * (1.0 / d))?;
        rays.push(NominalRay { theta, psi, distance: d, n_s: im.n_s, n_b: im.n_b, hits: im.hits, reference });
    }
    rays.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    Ok(rays)
}

/// Incidence angles of every reflection along `ray` (errors applied) for a
/// receiver at `receiver`. Reflections on one axis share an angle; the list
/// runs over axes x, y, z and low before high faces.
pub fn incidence_angles(ray: &NominalRay, errors: RayErrors, receiver: Vec3) -> Result<Vec<Incidence>> {
    receiver.ensure_finite("receiver")?;
    let v = receiver - ray.effective_image(errors);
    let d = v.norm();
    if !(d >= SINGULAR_DISTANCE) {
        return Err(Error::Singularity(format!("receiver {receiver:?} coincides with an effective image")));
    }
    let mut out = Vec::with_capacity(ray.order() as usize);
    for axis in 0..3 {
        let gamma = (v[axis].abs() / d).min(1.0).acos();
        for side in [Side::Low, Side::High] {
            for _ in 0..ray.hits[axis][side as usize] {
                out.push(Incidence { face: Face { axis, side }, gamma });
            }
        }
    }
    Ok(out)
}

/// Mean of `points`; the default reference point for nominal rays.
pub fn centroid(points: &[Vec3]) -> Result<Vec3> {
    if points.is_empty() {
        return Err(Error::invalid("centroid of an empty point set"));
    }
    let sum = points.iter().fold(Vec3::ZERO, |acc, &p| acc + p);
    Ok(sum * (1.0 / points.len() as f64))
}

#[derive(Serialize)]
struct RayRow {
    theta: f64,
    psi: f64,
    d: f64,
    n_s: u32,
    n_b: u32,
}

/// Writes the table as CSV with header `theta,psi,d,n_s,n_b`.
pub fn write_rays_csv<W: Write>(rays: &[NominalRay], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["theta", "psi", "d", "n_s", "n_b"])?;
    for r in rays {
        w.serialize(RayRow { theta: r.theta, psi: r.psi, d: r.distance, n_s: r.n_s, n_b: r.n_b })?;
    }
    w.flush()?;
    Ok(())
}
