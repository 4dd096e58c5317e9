//! JSON job descriptions accepted by the command-line tool.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acoustics::WaveSpec;
use crate::dataset::{Dataset, Split};
use crate::environment::{Environment, ReflectionModel};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::model::{GeometryAidedModel, ImageSourceInit, ImageSourceModel, PlaneInit, PlaneWaveModel, RayBasisModel, RcnnWeights, DEFAULT_HIDDEN};
use crate::oracle::{add_position_noise, gen_zigzag_trajectory, make_dataset, SplitFractions, TrajectoryConfig};
use crate::raytrace::{centroid, nominal_rays, NominalRay};
use crate::train::TrainConfig;

fn default_order() -> i64 {
    6
}

fn default_splits() -> SplitFractions {
    SplitFractions::new(0.7, 0.3, 0.0)
}

/// Synthetic measurement campaign: image-source field sampled along a
/// profiling-float trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateJob {
    pub environment: Environment,
    pub frequency: f64,
    pub source: Vec3,
    pub trajectory: TrajectoryConfig,
    #[serde(default = "default_order")]
    pub max_order: i64,
    #[serde(default = "default_splits")]
    pub splits: SplitFractions,
    /// Per-axis bound of uniform error added to the recorded positions.
    #[serde(default)]
    pub position_noise: f64,
}

impl SimulateJob {
    pub fn run(&self, seed: u64) -> Result<Dataset> {
        let points = gen_zigzag_trajectory(&self.trajectory)?;
        let ds = make_dataset(&self.environment, self.frequency, self.source, &points, self.max_order, self.splits, seed)?;
        if self.position_noise > 0.0 {
            add_position_noise(&ds, self.position_noise, seed.wrapping_add(1))
        } else if self.position_noise == 0.0 {
            Ok(ds)
        } else {
            Err(Error::invalid("position noise bound must be non-negative"))
        }
    }
}

/// Nominal eigenray table for an approximate geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceJob {
    pub environment: Environment,
    pub source: Vec3,
    pub reference: Vec3,
    #[serde(default = "default_order")]
    pub max_order: i64,
}

impl TraceJob {
    pub fn run(&self) -> Result<Vec<NominalRay>> {
        nominal_rays(&self.environment, self.source, self.reference, self.max_order)
    }
}

/// Reflection layer of a geometry-aided model and how to initialize it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    /// Rayleigh parameters drawn uniformly from the given ranges.
    Rayleigh {
        #[serde(default = "rho_range")]
        rho_r: [f64; 2],
        #[serde(default = "c_range")]
        c_r: [f64; 2],
        #[serde(default = "delta_range")]
        delta: [f64; 2],
    },
    Rcnn {
        #[serde(default = "default_hidden")]
        hidden: usize,
    },
    /// A fixed layer copied verbatim.
    Fixed { model: ReflectionModel },
}

fn rho_range() -> [f64; 2] {
    [1.1, 2.0]
}

fn c_range() -> [f64; 2] {
    [0.8, 1.0]
}

fn delta_range() -> [f64; 2] {
    [0.0, 0.01]
}

fn default_hidden() -> usize {
    DEFAULT_HIDDEN
}

impl LayerSpec {
    pub fn rayleigh() -> Self {
        LayerSpec::Rayleigh { rho_r: rho_range(), c_r: c_range(), delta: delta_range() }
    }

    pub fn rcnn() -> Self {
        LayerSpec::Rcnn { hidden: DEFAULT_HIDDEN }
    }

    fn build<R: Rng>(&self, rng: &mut R) -> Result<ReflectionModel> {
        let mut draw = |r: [f64; 2]| if r[1] > r[0] { rng.gen_range(r[0]..r[1]) } else { r[0] };
        let layer = match self {
            LayerSpec::Rayleigh { rho_r, c_r, delta } => ReflectionModel::rayleigh(draw(*rho_r), draw(*c_r), draw(*delta)),
            LayerSpec::Rcnn { hidden } => ReflectionModel::LearnedRcnn { weights: RcnnWeights::random(*hidden, rng) },
            LayerSpec::Fixed { model } => model.clone(),
        };
        layer.validate()?;
        Ok(layer)
    }
}

fn default_plane_init() -> PlaneInit {
    PlaneInit::default()
}

/// How to build the initial model of a training run. The reference point of
/// geometry-based kinds defaults to the centroid of the training positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    PlaneWave {
        frequency: f64,
        sound_speed: f64,
        n_ray: usize,
        #[serde(default = "default_plane_init")]
        init: PlaneInit,
    },
    /// Free image sources started at the `n_ray` nearest nominal images.
    ImageSource {
        environment: Environment,
        frequency: f64,
        source: Vec3,
        n_ray: usize,
        #[serde(default = "default_order")]
        max_order: i64,
        #[serde(default)]
        reference: Option<Vec3>,
        #[serde(default = "unit_range")]
        amplitude: [f64; 2],
    },
    GeometryAided {
        environment: Environment,
        frequency: f64,
        source: Vec3,
        #[serde(default = "default_order")]
        max_order: i64,
        #[serde(default)]
        reference: Option<Vec3>,
        layer: LayerSpec,
    },
}

fn unit_range() -> [f64; 2] {
    [0.0, 1.0]
}

impl ModelSpec {
    /// Everything that does not depend on the restart seed.
    pub fn prepare(&self, dataset: &Dataset) -> Result<PreparedSpec> {
        let reference = |r: &Option<Vec3>| -> Result<Vec3> {
            match r {
                Some(p) => Ok(*p),
                None => {
                    let pts: Vec<Vec3> = dataset.samples(Split::Train).iter().map(|s| s.position).collect();
                    centroid(&pts)
                }
            }
        };
        Ok(match self {
            ModelSpec::PlaneWave { frequency, sound_speed, n_ray, init } => PreparedSpec::Plane {
                k: WaveSpec::new(*frequency, *sound_speed)?.wavenumber(),
                n_ray: *n_ray,
                init: *init,
            },
            ModelSpec::ImageSource { environment, frequency, source, n_ray, max_order, reference: r, amplitude } => {
                let k = WaveSpec::new(*frequency, environment.sound_speed())?.wavenumber();
                let reference = reference(r)?;
                let mut rays = nominal_rays(environment, *source, reference, *max_order)?;
                if rays.len() < *n_ray {
                    return Err(Error::invalid(format!("only {} images up to order {max_order}; raise max_order", rays.len())));
                }
                rays.truncate(*n_ray);
                PreparedSpec::Image { k, reference, absorption: environment.absorption(), rays, amplitude: *amplitude }
            }
            ModelSpec::GeometryAided { environment, frequency, source, max_order, reference: r, layer } => {
                let k = WaveSpec::new(*frequency, environment.sound_speed())?.wavenumber();
                let rays = nominal_rays(environment, *source, reference(r)?, *max_order)?;
                PreparedSpec::Geometry { k, absorption: environment.absorption(), rays, layer: layer.clone() }
            }
        })
    }
}

/// A [`ModelSpec`] with its ray tables resolved; builds one model per seed.
#[derive(Debug, Clone)]
pub enum PreparedSpec {
    Plane { k: f64, n_ray: usize, init: PlaneInit },
    Image { k: f64, reference: Vec3, absorption: f64, rays: Vec<NominalRay>, amplitude: [f64; 2] },
    Geometry { k: f64, absorption: f64, rays: Vec<NominalRay>, layer: LayerSpec },
}

impl PreparedSpec {
    pub fn build(&self, seed: u64) -> Result<RayBasisModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(match self {
            PreparedSpec::Plane { k, n_ray, init } => PlaneWaveModel::random(*n_ray, *k, *init, &mut rng)?.into(),
            PreparedSpec::Image { k, reference, absorption, rays, amplitude } => {
                let init = ImageSourceInit { amplitude: *amplitude, theta: [0.0, 0.0], psi: [0.0, 0.0], distance: [1.0, 1.0] };
                let mut m = ImageSourceModel::random(rays.len(), *k, *reference, *absorption, init, &mut rng)?;
                m.theta = rays.iter().map(|r| r.theta).collect();
                m.psi = rays.iter().map(|r| r.psi).collect();
                m.distance = rays.iter().map(|r| r.distance).collect();
                m.validate()?;
                m.into()
            }
            PreparedSpec::Geometry { k, absorption, rays, layer } => {
                GeometryAidedModel::new(rays.clone(), *k, layer.build(&mut rng)?, *absorption)?.into()
            }
        })
    }
}

/// Model description plus optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainJob {
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainConfig,
}

/// Geometry-aided inversion: the model kind is fixed, only the known
/// geometry is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionJob {
    pub environment: Environment,
    pub frequency: f64,
    pub source: Vec3,
    #[serde(default = "default_order")]
    pub max_order: i64,
    #[serde(default)]
    pub reference: Option<Vec3>,
    /// Overrides the default layer initialization.
    #[serde(default)]
    pub layer: Option<LayerSpec>,
    #[serde(default)]
    pub train: TrainConfig,
}

impl InversionJob {
    pub fn train_job(&self, default_layer: LayerSpec) -> TrainJob {
        TrainJob {
            model: ModelSpec::GeometryAided {
                environment: self.environment.clone(),
                frequency: self.frequency,
                source: self.source,
                max_order: self.max_order,
                reference: self.reference,
                layer: self.layer.clone().unwrap_or(default_layer),
            },
            train: self.train.clone(),
        }
    }
}

/// Initialization ranges suited to near-horizontal arrivals.
pub fn horizontal_plane_init() -> PlaneInit {
    PlaneInit { amplitude: [0.0, 1.0], theta: [0.0, TAU], psi: [0.5 * PI - 0.5, 0.5 * PI + 0.5] }
}

pub fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const WAVEGUIDE: &str = r#"{"type": "waveguide", "depth": 30, "sound_speed": 1500,
        "surface": {"type": "pressure_release"}, "bottom": {"type": "rayleigh", "rho_r": 1.5, "c_r": 0.9, "delta": 0.001}}"#;

    fn sim_json() -> String {
        format!(
            r#"{{"environment": {WAVEGUIDE}, "frequency": 500, "source": {{"x":0,"y":0,"z":15}},
            "trajectory": {{"start": {{"x":100,"y":0,"z":1}}, "drift_velocity": [0.1, 0], "vertical_speed": 0.2,
                "depth_bounds": [1, 29], "sample_interval": 7, "profiles": 2}}}}"#
        )
    }

    #[test]
    fn simulate_is_seeded() {
        let job: SimulateJob = parse(&sim_json()).unwrap();
        let a = job.run(4).unwrap();
        assert_eq!(a, job.run(4).unwrap());
        assert_eq!(a.len(), 40);
        assert_ne!(a, job.run(5).unwrap());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = sim_json().replacen('{', r#"{"bogus": 1, "#, 1);
        assert!(parse::<SimulateJob>(&text).is_err());
    }

    #[test]
    fn specs_build_every_kind() {
        let ds = parse::<SimulateJob>(&sim_json()).unwrap().run(0).unwrap();
        let specs = [
            format!(r#"{{"kind": "plane_wave", "frequency": 500, "sound_speed": 1500, "n_ray": 7}}"#),
            format!(r#"{{"kind": "image_source", "environment": {WAVEGUIDE}, "frequency": 500, "source": {{"x":0,"y":0,"z":15}}, "n_ray": 9}}"#),
            format!(r#"{{"kind": "geometry_aided", "environment": {WAVEGUIDE}, "frequency": 500, "source": {{"x":0,"y":0,"z":15}}, "max_order": 2, "layer": {{"type": "rcnn"}}}}"#),
        ];
        let rays: Vec<usize> = specs
            .iter()
            .map(|s| parse::<ModelSpec>(s).unwrap().prepare(&ds).unwrap().build(1).unwrap().n_ray())
            .collect();
        assert_eq!(rays, vec![7, 9, 5]);
    }

    #[test]
    fn too_few_images_is_an_error() {
        let ds = parse::<SimulateJob>(&sim_json()).unwrap().run(0).unwrap();
        let s = format!(r#"{{"kind": "image_source", "environment": {WAVEGUIDE}, "frequency": 500, "source": {{"x":0,"y":0,"z":15}}, "n_ray": 100, "max_order": 2}}"#);
        assert!(parse::<ModelSpec>(&s).unwrap().prepare(&ds).is_err());
    }
}
