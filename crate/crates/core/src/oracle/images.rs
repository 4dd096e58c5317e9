//! Image-source enumeration for flat waveguides and rectangular boxes.

use serde::{Deserialize, Serialize};

use crate::environment::{Environment, Face, Side};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// A mirrored copy of the source together with its boundary bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSource {
    pub position: Vec3,
    /// Reflections off the surface (the low z face).
    pub n_s: u32,
    /// Reflections off every other boundary.
    pub n_b: u32,
    /// Hit counts per axis and side: `hits[axis][0]` low face, `[1]` high face.
    pub hits: [[u32; 2]; 3],
}

impl ImageSource {
    pub fn direct(position: Vec3) -> Self {
        Self { position, n_s: 0, n_b: 0, hits: [[0; 2]; 3] }
    }

    pub fn from_hits(position: Vec3, hits: [[u32; 2]; 3]) -> Self {
        let total: u32 = hits.iter().flatten().sum();
        let n_s = hits[2][0];
        Self { position, n_s, n_b: total - n_s, hits }
    }

    pub fn order(&self) -> u32 {
        self.n_s + self.n_b
    }

    /// Total reflections along each axis.
    pub fn per_axis_counts(&self) -> [u32; 3] {
        [self.hits[0][0] + self.hits[0][1], self.hits[1][0] + self.hits[1][1], self.hits[2][0] + self.hits[2][1]]
    }

    /// `(face, count)` for every face hit at least once.
    pub fn face_hits(&self) -> impl Iterator<Item = (Face, u32)> + '_ {
        (0..3).flat_map(move |axis| {
            [Side::Low, Side::High]
                .into_iter()
                .map(move |side| (Face { axis, side }, self.hits[axis][side as usize]))
                .filter(|(_, n)| *n > 0)
        })
    }
}

/// One axis of the image lattice: coordinate `(1 - 2q) s + 2 n L` reached with
/// `|n - q|` low-face and `|n|` high-face reflections.
#[derive(Debug, Clone, Copy)]
struct LatticeEntry {
    coord: f64,
    low: u32,
    high: u32,
}

fn axis_entries(source: f64, length: f64, max_order: u32) -> Vec<LatticeEntry> {
    let n_max = max_order as i64;
    let mut out = Vec::new();
    for n in -n_max..=n_max {
        for q in 0..=1i64 {
            let low = (n - q).unsigned_abs() as u32;
            let high = n.unsigned_abs() as u32;
            if low + high > max_order {
                continue;
            }
            let coord = (1 - 2 * q) as f64 * source + 2.0 * n as f64 * length;
            out.push(LatticeEntry { coord, low, high });
        }
    }
    // order by reflection count, then low-face-first for a stable listing
    out.sort_by_key(|e| (e.low + e.high, e.high));
    out
}

fn check_order(max_order: i64) -> Result<u32> {
    u32::try_from(max_order).map_err(|_| Error::invalid(format!("max_order must be non-negative, got {max_order}")))
}

/// All images of `source` between the surface and the bottom of a waveguide
/// with at most `max_order` reflections: `2 max_order + 1` of them.
pub fn enumerate_images_waveguide(env: &Environment, source: Vec3, max_order: i64) -> Result<Vec<ImageSource>> {
    let max_order = check_order(max_order)?;
    let Environment::Waveguide { depth, .. } = env else {
        return Err(Error::invalid("enumerate_images_waveguide needs a waveguide environment"));
    };
    env.validate()?;
    source.ensure_finite("source")?;
    if !env.contains_strictly(source) {
        return Err(Error::invalid(format!("source depth {} is not strictly inside (0, {depth})", source.z)));
    }
    let images = axis_entries(source.z, *depth, max_order)
        .into_iter()
        .map(|e| {
            let mut hits = [[0; 2]; 3];
            hits[2] = [e.low, e.high];
            ImageSource::from_hits(Vec3::new(source.x, source.y, e.coord), hits)
        })
        .collect();
    Ok(images)
}

/// Lattice-unfolded images of `source` inside a box with total reflection
/// count at most `max_order`.
pub fn enumerate_images_box(env: &Environment, source: Vec3, max_order: i64) -> Result<Vec<ImageSource>> {
    let max_order = check_order(max_order)?;
    let Environment::Box { dims, .. } = env else {
        return Err(Error::invalid("enumerate_images_box needs a box environment"));
    };
    env.validate()?;
    source.ensure_finite("source")?;
    if !env.contains_strictly(source) {
        return Err(Error::invalid(format!("source {source:?} is not strictly inside the box {dims:?}")));
    }
    let ex = axis_entries(source.x, dims[0], max_order);
    let ey = axis_entries(source.y, dims[1], max_order);
    let ez = axis_entries(source.z, dims[2], max_order);
    let mut images = Vec::new();
    for a in &ex {
        let oa = a.low + a.high;
        for b in &ey {
            let ob = b.low + b.high;
            if oa + ob > max_order {
                continue;
            }
            for c in &ez {
                if oa + ob + c.low + c.high > max_order {
                    continue;
                }
                images.push(ImageSource::from_hits(
                    Vec3::new(a.coord, b.coord, c.coord),
                    [[a.low, a.high], [b.low, b.high], [c.low, c.high]],
                ));
            }
        }
    }
    images.sort_by_key(|im| im.order());
    Ok(images)
}

/// Images for any environment kind; free field yields the source alone.
pub fn enumerate_images(env: &Environment, source: Vec3, max_order: i64) -> Result<Vec<ImageSource>> {
    match env {
        Environment::FreeField { .. } => {
            check_order(max_order)?;
            env.validate()?;
            Ok(vec![ImageSource::direct(source.ensure_finite("source")?)])
        }
        Environment::Waveguide { .. } => enumerate_images_waveguide(env, source, max_order),
        Environment::Box { .. } => enumerate_images_box(env, source, max_order),
    }
}
