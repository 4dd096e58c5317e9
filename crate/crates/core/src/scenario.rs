//! End-to-end simulation scenarios: synthesize measurements with the
//! image-source oracle, fit a ray-basis model and write the checkpoint,
//! metrics and field grids.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acoustics::WaveSpec;
use crate::dataset::{Dataset, Record, Sample, Split};
use crate::environment::{Environment, ReflectionModel};
use crate::error::{Error, Result};
use crate::eval::{compare_tables, idw_baseline, mate, predict_points, tabulate, FieldTable, GridSpec, MetricsReport};
use crate::geometry::{angles_from_direction, Vec3};
use crate::model::{GeometryAidedModel, ImageSourceModel, PlaneInit, PlaneWaveModel, RayBasisModel, RcnnWeights, DEFAULT_HIDDEN};
use crate::oracle::{add_position_noise, assign_splits, gen_zigzag_trajectory, IsmField, PlaneRay, SplitFractions, TrajectoryConfig};
use crate::raytrace::{centroid, nominal_rays, NominalRay};
use crate::train::{multi_restart_train, refine_positions, train, LossKind, RefineReport, TrainConfig, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    FarField,
    NearField,
    InvertRcnn,
    InvertRayleigh,
    TankSim,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 5] = [
        ScenarioName::FarField,
        ScenarioName::NearField,
        ScenarioName::InvertRcnn,
        ScenarioName::InvertRayleigh,
        ScenarioName::TankSim,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::FarField => "far-field",
            ScenarioName::NearField => "near-field",
            ScenarioName::InvertRcnn => "invert-rcnn",
            ScenarioName::InvertRayleigh => "invert-rayleigh",
            ScenarioName::TankSim => "tank-sim",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scenario {s:?}")))
    }
}

/// Ground truth used by the far-field scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarFieldTruth {
    /// Full image-source field of the waveguide.
    #[default]
    Ism,
    /// Plane-wave approximation of the five shortest eigenrays, matched at the
    /// AOI centre. The plane-wave model can represent it exactly.
    EigenrayPlanes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioOptions {
    pub seed: u64,
    pub restarts: Option<usize>,
    pub max_epochs: Option<usize>,
    /// Per-axis bound of injected position error (m). The tank uses its
    /// depth-dependent bounds when unset; other scenarios default to none.
    pub position_noise: Option<f64>,
    /// Grid spacing for dense evaluation (m).
    pub grid_resolution: Option<f64>,
    pub far_field_truth: FarFieldTruth,
    /// Amplitude L1 weights tried by the far-field scenario; the one with the
    /// lowest validation loss wins.
    pub alphas: Option<Vec<f64>>,
    /// Epochs of the reduced-rate pass that follows restart selection in the
    /// far-field scenario; 0 skips it.
    pub polish_epochs: Option<usize>,
    /// Weight of the offset penalty in the tank's second stage.
    pub refine_weight: Option<f64>,
    /// Replaces the scenario's training configuration. `restarts`,
    /// `max_epochs`, `seed` and `verbose` above still apply on top.
    pub train: Option<TrainConfig>,
    pub verbose: bool,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: None,
            max_epochs: None,
            position_noise: None,
            grid_resolution: None,
            far_field_truth: FarFieldTruth::Ism,
            alphas: None,
            polish_epochs: None,
            refine_weight: None,
            train: None,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayleighRecovery {
    /// `[rho_r, c_r, delta]`.
    pub truth: [f64; 3],
    pub estimate: [f64; 3],
    /// `(estimate - truth) / truth`.
    pub relative_error: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecovery {
    /// Mean `|ε(γ) - |Γ(γ)||` over bottom incidences of the training eigenrays.
    pub mean_abs_deviation: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementSummary {
    pub records: usize,
    /// Median of `‖estimated offset - true offset‖`.
    pub median_error: f64,
    /// Median norm of the injected errors, i.e. the error of a zero estimate.
    pub median_injected: f64,
    pub median_estimate: f64,
    /// Share of estimated offsets with norm below 4 cm.
    pub fraction_below_4cm: f64,
    pub best_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: String,
    pub seed: u64,
    pub train_count: usize,
    pub validation_count: usize,
    pub test_count: usize,
    pub n_ray: usize,
    pub best_validation_loss: f64,
    pub chosen_restart: usize,
    pub restart_best_losses: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Dense grid over the AOI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aoi: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extrapolation: Option<MetricsReport>,
    /// Held-out measurement points, evaluated at their true positions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<MetricsReport>,
    /// Inverse-distance baseline on the same held-out points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rayleigh: Option<RayleighRecovery>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection_curve: Option<CurveRecovery>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<RefinementSummary>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub summary: ScenarioSummary,
    pub model: RayBasisModel,
    pub report: TrainReport,
}

/// Sandy seabed shared by the waveguide scenarios.
pub fn seabed() -> ReflectionModel {
    ReflectionModel::rayleigh(1.5, 0.9, 0.001)
}

/// Plane-wave stand-ins for the `n` shortest eigenrays: each ray's complex
/// image-source term is matched at `centre`. Amplitudes are multiplied by
/// `scale`.
pub fn eigenray_planes(env: &Environment, frequency: f64, source: Vec3, centre: Vec3, n: usize, scale: f64) -> Result<Vec<PlaneRay>> {
    let field = IsmField::new(env, frequency, source, 1 + n as i64)?;
    let k = field.wavenumber();
    let mut images = field.images().to_vec();
    images.sort_by(|a, b| a.position.distance(centre).total_cmp(&b.position.distance(centre)));
    images
        .iter()
        .take(n)
        .map(|img| {
            let term = field.term(img, centre)?;
            let u = centre - img.position;
            let u = u * (1.0 / u.norm());
            let (theta, psi) = angles_from_direction(u)?;
            Ok(PlaneRay { amplitude: term.norm() * scale, phase: term.arg() - k * u.dot(centre), theta, psi })
        })
        .collect()
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(self.path(name), text)?;
        Ok(())
    }

    fn model(&mut self, model: &RayBasisModel) -> Result<()> {
        let p = self.path("model.json");
        model.save(&p)
    }

    fn dataset(&mut self, name: &str, ds: &Dataset) -> Result<()> {
        let p = self.path(name);
        ds.save(&p)
    }

    fn table(&mut self, name: &str, t: &FieldTable) -> Result<()> {
        let p = self.path(name);
        t.save(&p)
    }
}

/// Independent seeds for the random streams of one scenario run.
struct Seeds(ChaCha8Rng);

impl Seeds {
    fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed))
    }

    fn next(&mut self) -> u64 {
        self.0.next_u64()
    }
}

fn configure(opts: &ScenarioOptions, base: TrainConfig) -> Result<TrainConfig> {
    let mut c = opts.train.clone().unwrap_or(base);
    if let Some(r) = opts.restarts {
        c.restarts = r;
    }
    if let Some(e) = opts.max_epochs {
        c.max_epochs = e;
    }
    c.seed = opts.seed;
    c.verbose |= opts.verbose;
    c.validate()?;
    Ok(c)
}

fn labelled(positions: &[Vec3], amplitudes: &[f64], splits: &[Split]) -> Result<Dataset> {
    Dataset::new(
        positions
            .iter()
            .zip(amplitudes)
            .zip(splits)
            .map(|((&position, &amplitude), &split)| Record { position, amplitude, split })
            .collect(),
    )
}

fn amplitudes<F: Fn(Vec3) -> Result<f64> + Sync>(points: &[Vec3], f: F) -> Result<Vec<f64>> {
    tabulate(points, f)?
        .rows
        .into_iter()
        .map(|(p, a)| a.ok_or_else(|| Error::Singularity(format!("measurement point {p:?} coincides with an image source"))))
        .collect()
}

/// Model vs truth on a grid; writes both tables.
fn grid_metrics<F: Fn(Vec3) -> Result<f64> + Sync>(
    art: &mut Artifacts,
    prefix: &str,
    model: &RayBasisModel,
    grid: &GridSpec,
    truth: F,
) -> Result<MetricsReport> {
    let points = grid.points()?;
    let pred = predict_points(model, &points)?;
    let reference = tabulate(&points, truth)?;
    art.table(&format!("{prefix}_truth.csv"), &reference)?;
    art.table(&format!("{prefix}_predicted.csv"), &pred)?;
    compare_tables(&pred, &reference)
}

fn summary(name: ScenarioName, opts: &ScenarioOptions, ds: &Dataset, model: &RayBasisModel, report: &TrainReport) -> ScenarioSummary {
    ScenarioSummary {
        scenario: name.to_string(),
        seed: opts.seed,
        train_count: ds.count(Split::Train),
        validation_count: ds.count(Split::Validation),
        test_count: ds.count(Split::Test),
        n_ray: model.n_ray(),
        best_validation_loss: report.best_validation_loss,
        chosen_restart: report.chosen_restart,
        restart_best_losses: report.restart_best_losses.clone(),
        alpha: None,
        aoi: None,
        extrapolation: None,
        test: None,
        baseline: None,
        rayleigh: None,
        reflection_curve: None,
        refinement: None,
        files: Vec::new(),
    }
}

fn finish(mut art: Artifacts, mut s: ScenarioSummary, model: RayBasisModel, report: TrainReport) -> Result<ScenarioResult> {
    art.model(&model)?;
    art.json("report.json", &report)?;
    art.files.push("summary.json".into());
    s.files = art.files.clone();
    let mut text = serde_json::to_string_pretty(&s)?;
    text.push('\n');
    std::fs::write(art.dir.join("summary.json"), text)?;
    Ok(ScenarioResult { summary: s, model, report })
}

/// Runs scenario `name`, writing artifacts into `out_dir`.
pub fn run_scenario(name: ScenarioName, opts: &ScenarioOptions, out_dir: &Path) -> Result<ScenarioResult> {
    if let Some(r) = opts.grid_resolution {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid("grid resolution must be positive"));
        }
    }
    if let Some(n) = opts.position_noise {
        if !(n >= 0.0 && n.is_finite()) {
            return Err(Error::invalid("position noise bound must be non-negative"));
        }
    }
    match name {
        ScenarioName::FarField => far_field(opts, out_dir),
        ScenarioName::NearField => near_field(opts, out_dir),
        ScenarioName::InvertRcnn => invert_rcnn(opts, out_dir),
        ScenarioName::InvertRayleigh => invert_rayleigh(opts, out_dir),
        ScenarioName::TankSim => tank_sim(opts, out_dir),
    }
}

fn waveguide(depth: f64, sound_speed: f64) -> Environment {
    Environment::Waveguide {
        depth,
        sound_speed,
        surface: ReflectionModel::PressureRelease,
        bottom: seabed(),
        absorption: 0.0,
    }
}

/// Dataset sampled along a trajectory with a 70/30 split, positions
/// optionally perturbed.
fn float_dataset<F: Fn(Vec3) -> Result<f64> + Sync>(
    traj: &TrajectoryConfig,
    truth: F,
    opts: &ScenarioOptions,
    seeds: &mut Seeds,
) -> Result<(Dataset, Dataset)> {
    let points = gen_zigzag_trajectory(traj)?;
    let amps = amplitudes(&points, truth)?;
    let splits = assign_splits(points.len(), SplitFractions::new(0.7, 0.3, 0.0), seeds.next())?;
    let clean = labelled(&points, &amps, &splits)?;
    let noise_seed = seeds.next();
    let noisy = match opts.position_noise {
        Some(b) if b > 0.0 => add_position_noise(&clean, b, noise_seed)?,
        _ => clean.clone(),
    };
    Ok((clean, noisy))
}

const FAR_DEPTH: f64 = 30.0;
const FAR_FREQ: f64 = 10e3;
const FAR_SPEED: f64 = 1541.0;
const FAR_RANGE: f64 = 995.0;
const FAR_LENGTH: f64 = 50.0;

fn far_field(opts: &ScenarioOptions, out_dir: &Path) -> Result<ScenarioResult> {
    let mut art = Artifacts::new(out_dir)?;
    let mut seeds = Seeds::new(opts.seed);
    let env = waveguide(FAR_DEPTH, FAR_SPEED);
    let source = Vec3::new(0.0, 0.0, 5.0);
    let centre = Vec3::new(FAR_RANGE + FAR_LENGTH / 2.0, 0.0, FAR_DEPTH / 2.0);
    // amplitudes relative to spherical spreading at the AOI centre
    let scale = centre.distance(source);
    let k = WaveSpec::new(FAR_FREQ, FAR_SPEED)?.wavenumber();
    let ism = IsmField::new(&env, FAR_FREQ, source, 6)?;
    let planes = eigenray_planes(&env, FAR_FREQ, source, centre, 5, scale)?;
    let truth = |p: Vec3| -> Result<f64> {
        match opts.far_field_truth {
            FarFieldTruth::Ism => Ok(ism.amplitude(p)? * scale),
            FarFieldTruth::EigenrayPlanes => Ok(crate::oracle::synth_plane_field(&planes, k, p)?.norm()),
        }
    };
    let duration = 17.0 * FAR_DEPTH / 0.5;
    let traj = TrajectoryConfig {
        start: Vec3::new(FAR_RANGE, 0.0, 0.0),
        drift_velocity: [FAR_LENGTH / duration, 0.0],
        vertical_speed: 0.5,
        depth_bounds: [0.0, FAR_DEPTH],
        sample_interval: 1.036,
        profiles: 17,
    };
    let (_, ds) = float_dataset(&traj, truth, opts, &mut seeds)?;
    art.dataset("dataset.csv", &ds)?;

    let mut base = TrainConfig { max_epochs: 3000, patience: 1000, restarts: 10, ..TrainConfig::default() };
    base.group_learning_rates.angle = Some(1e-4);
    let mut cfg = configure(opts, base)?;
    let init = PlaneInit { amplitude: [0.0, 0.2], theta: [-0.1, 0.1], psi: [FRAC_PI_2 - 0.1, FRAC_PI_2 + 0.1] };
    let factory = |s: u64| -> Result<RayBasisModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        Ok(PlaneWaveModel::random(60, k, init, &mut rng)?.into())
    };
    let alphas = opts.alphas.clone().unwrap_or_else(|| vec![0.0, 1e-4, 1e-3]);
    if alphas.is_empty() {
        return Err(Error::invalid("at least one alpha candidate is required"));
    }
    let mut best: Option<(f64, RayBasisModel, TrainReport)> = None;
    for &alpha in &alphas {
        cfg.penalties.alpha = alpha;
        let (m, r) = multi_restart_train(factory, &ds, &cfg)?;
        if best.as_ref().map_or(true, |b| r.best_validation_loss < b.2.best_validation_loss) {
            best = Some((alpha, m, r));
        }
    }
    let (alpha, mut model, mut report) = best.expect("alpha candidates are non-empty");
    let polish = opts.polish_epochs.unwrap_or(2000);
    if polish > 0 {
        let mut fine = cfg.clone();
        fine.penalties.alpha = alpha;
        fine.restarts = 1;
        fine.max_epochs = polish;
        fine.learning_rate *= 0.1;
        let g = &mut fine.group_learning_rates;
        for r in [&mut g.amplitude, &mut g.phase, &mut g.angle, &mut g.distance, &mut g.reflection] {
            *r = r.map(|v| v * 0.1);
        }
        let (m, r) = train(model, &ds, &fine)?;
        report.best_validation_loss = r.best_validation_loss;
        report.train_loss.extend(r.train_loss);
        report.validation_loss.extend(r.validation_loss);
        report.epochs_run += r.epochs_run;
        if r.best_epoch > 0 {
            report.best_epoch = report.epochs_run - r.epochs_run + r.best_epoch;
        }
        report.final_params = r.final_params;
        model = m;
    }

    let h = opts.grid_resolution.unwrap_or(0.25);
    let aoi = GridSpec { min: [FAR_RANGE, 0.0, h], max: [FAR_RANGE + FAR_LENGTH, 0.0, FAR_DEPTH - h], resolution: [h, 0.0, h] };
    let ext = GridSpec {
        min: [FAR_RANGE + FAR_LENGTH, 0.0, h],
        max: [FAR_RANGE + 2.0 * FAR_LENGTH, 0.0, FAR_DEPTH - h],
        resolution: [h, 0.0, h],
    };
    let mut s = summary(ScenarioName::FarField, opts, &ds, &model, &report);
    s.alpha = Some(alpha);
    s.aoi = Some(grid_metrics(&mut art, "grid", &model, &aoi, truth)?);
    s.extrapolation = Some(grid_metrics(&mut art, "extrapolation", &model, &ext, truth)?);
    finish(art, s, model, report)
}

const NEAR_DEPTH: f64 = 30.0;
const NEAR_FREQ: f64 = 5e3;
const NEAR_SPEED: f64 = 1541.0;

fn near_field(opts: &ScenarioOptions, out_dir: &Path) -> Result<ScenarioResult> {
    let mut art = Artifacts::new(out_dir)?;
    let mut seeds = Seeds::new(opts.seed);
    let env = waveguide(NEAR_DEPTH, NEAR_SPEED);
    let source = Vec3::new(0.0, 0.0, 15.0);
    let ism = IsmField::new(&env, NEAR_FREQ, source, 6)?;
    let truth = |p: Vec3| ism.amplitude(p);
    let (x0, len, width) = (100.0, 50.0, 0.1);
    let duration = 2.0 * 28.0 / 0.2;
    let traj = TrajectoryConfig {
        start: Vec3::new(x0, 0.0, 1.0),
        drift_velocity: [len / duration, width / duration],
        vertical_speed: 0.2,
        depth_bounds: [1.0, 29.0],
        sample_interval: 1.67,
        profiles: 2,
    };
    let (_, ds) = float_dataset(&traj, truth, opts, &mut seeds)?;
    art.dataset("dataset.csv", &ds)?;

    let k = WaveSpec::new(NEAR_FREQ, NEAR_SPEED)?.wavenumber();
    let train_pos: Vec<Vec3> = ds.samples(Split::Train).iter().map(|s| s.position).collect();
    let reference = centroid(&train_pos)?;
    let mut rays = nominal_rays(&env, source, reference, 30)?;
    rays.truncate(60);
    let mut base = TrainConfig { max_epochs: 3000, restarts: 10, ..TrainConfig::default() };
    base.group_learning_rates.angle = Some(1e-4);
    let cfg = configure(opts, base)?;
    let factory = |s: u64| -> Result<RayBasisModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let n = rays.len();
        let m = ImageSourceModel {
            amplitude: (0..n).map(|_| rng.gen_range(0.0..1.0)).collect(),
            phase: (0..n).map(|_| rng.gen_range(0.0..2.0 * PI)).collect(),
            theta: rays.iter().map(|r| r.theta).collect(),
            psi: rays.iter().map(|r| r.psi).collect(),
            distance: rays.iter().map(|r| r.distance).collect(),
            wavenumber: k,
            reference,
            absorption: 0.0,
        };
        m.validate()?;
        Ok(m.into())
    };
    let (model, report) = multi_restart_train(factory, &ds, &cfg)?;

    let h = opts.grid_resolution.unwrap_or(0.25);
    let y = width / 2.0;
    let aoi = GridSpec { min: [x0, y, 1.0], max: [x0 + len, y, 29.0], resolution: [h, 0.0, h] };
    let ext = GridSpec { min: [x0 + len, y, 1.0], max: [x0 + 2.0 * len, y, 29.0], resolution: [h, 0.0, h] };
    let mut s = summary(ScenarioName::NearField, opts, &ds, &model, &report);
    s.aoi = Some(grid_metrics(&mut art, "grid", &model, &aoi, truth)?);
    s.extrapolation = Some(grid_metrics(&mut art, "extrapolation", &model, &ext, truth)?);
    finish(art, s, model, report)
}

/// Writes `gamma,eps,kappa` at 181 angles over `[0, π/2]`.
pub fn write_reflection_curve<W: std::io::Write>(layer: &ReflectionModel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["gamma", "eps", "kappa"])?;
    for i in 0..181 {
        let gamma = FRAC_PI_2 * i as f64 / 180.0;
        let (eps, kappa) = layer.magnitude_phase(gamma)?;
        w.write_record([gamma.to_string(), eps.to_string(), kappa.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Bottom incidence angles of every bottom-reflected ray at every point.
pub fn bottom_incidences(rays: &[NominalRay], points: &[Vec3]) -> Vec<f64> {
    let mut out = Vec::new();
    for ray in rays.iter().filter(|r| r.hits[2][1] > 0) {
        let image = ray.effective_image(Default::default());
        for &p in points {
            let d = p - image;
            let n = d.norm();
            if n > 0.0 {
                out.push((d.z.abs() / n).min(1.0).acos());
            }
        }
    }
    out
}

fn geometry_config(opts: &ScenarioOptions, base: TrainConfig) -> Result<TrainConfig> {
    configure(opts, base)
}

const INV_DEPTH: f64 = 30.0;
const INV_FREQ: f64 = 5e3;
const INV_SPEED: f64 = 1541.0;

fn inversion_setup(
    opts: &ScenarioOptions,
    seeds: &mut Seeds,
    length: f64,
    profiles: u32,
    interval: f64,
    truth_bottom: ReflectionModel,
) -> Result<(Environment, Vec3, IsmField, Dataset, Dataset)> {
    let env = Environment::Waveguide {
        depth: INV_DEPTH,
        sound_speed: INV_SPEED,
        surface: ReflectionModel::PressureRelease,
        bottom: truth_bottom,
        absorption: 0.0,
    };
    let source = Vec3::new(0.0, 0.0, 15.0);
    let ism = IsmField::new(&env, INV_FREQ, source, 6)?;
    let duration = profiles as f64 * 29.0 / 0.2;
    let traj = TrajectoryConfig {
        start: Vec3::new(100.0, 0.0, 0.5),
        drift_velocity: [length / duration, 0.0],
        vertical_speed: 0.2,
        depth_bounds: [0.5, 29.5],
        sample_interval: interval,
        profiles,
    };
    let (clean, noisy) = float_dataset(&traj, |p| ism.amplitude(p), opts, seeds)?;
    Ok((env, source, ism, clean, noisy))
}

fn invert_rcnn(opts: &ScenarioOptions, out_dir: &Path) -> Result<ScenarioResult> {
    let mut art = Artifacts::new(out_dir)?;
    let mut seeds = Seeds::new(opts.seed);
    let truth_layer = seabed();
    let (env, source, ism, clean, ds) = inversion_setup(opts, &mut seeds, 300.0, 10, 1.2605, truth_layer.clone())?;
    art.dataset("dataset.csv", &ds)?;
    let k = WaveSpec::new(INV_FREQ, INV_SPEED)?.wavenumber();
    let train_pos: Vec<Vec3> = ds.samples(Split::Train).iter().map(|s| s.position).collect();
    let rays = nominal_rays(&env, source, centroid(&train_pos)?, 6)?;
    let mut base = TrainConfig { max_epochs: 2000, restarts: 4, ..TrainConfig::default() };
    base.penalties.zeta0 = 1e-6;
    base.penalties.beta = 1e-6;
    base.penalties.eta = 1.0;
    base.group_learning_rates.angle = Some(1e-5);
    base.group_learning_rates.distance = Some(1e-3);
    let cfg = geometry_config(opts, base)?;
    let factory = |s: u64| -> Result<RayBasisModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let layer = ReflectionModel::LearnedRcnn { weights: RcnnWeights::random(DEFAULT_HIDDEN, &mut rng) };
        Ok(GeometryAidedModel::new(rays.clone(), k, layer, 0.0)?.into())
    };
    let (model, report) = multi_restart_train(factory, &ds, &cfg)?;
    let layer = match &model {
        RayBasisModel::GeometryAided(g) => g.reflection.clone(),
        _ => unreachable!("factory builds geometry-aided models"),
    };
    let clean_train: Vec<Vec3> = clean.records.iter().filter(|r| r.split == Split::Train).map(|r| r.position).collect();
    let gammas = bottom_incidences(&rays, &clean_train);
    let mut learned = Vec::with_capacity(gammas.len());
    let mut reference = Vec::with_capacity(gammas.len());
    for &g in &gammas {
        learned.push(layer.magnitude_phase(g)?.0);
        reference.push(truth_layer.magnitude_phase(g)?.0);
    }
    let curve = CurveRecovery {
        mean_abs_deviation: mate(&learned, &reference)?,
        gamma_min: gammas.iter().copied().fold(f64::INFINITY, f64::min),
        gamma_max: gammas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        samples: gammas.len(),
    };
    let p = art.path("reflection_curve.csv");
    write_reflection_curve(&layer, std::fs::File::create(p)?)?;
    let p = art.path("reflection_truth.csv");
    write_reflection_curve(&truth_layer, std::fs::File::create(p)?)?;

    let h = opts.grid_resolution.unwrap_or(0.5);
    let aoi = GridSpec { min: [100.0, 0.0, 0.5], max: [400.0, 0.0, 29.5], resolution: [h, 0.0, h] };
    let mut s = summary(ScenarioName::InvertRcnn, opts, &ds, &model, &report);
    s.reflection_curve = Some(curve);
    s.aoi = Some(grid_metrics(&mut art, "grid", &model, &aoi, |p| ism.amplitude(p))?);
    finish(art, s, model, report)
}

/// Ground-truth seabed of the Rayleigh inversion.
pub const RAYLEIGH_TRUTH: [f64; 3] = [1.5, 0.9, 0.001];

fn invert_rayleigh(opts: &ScenarioOptions, out_dir: &Path) -> Result<ScenarioResult> {
    let mut art = Artifacts::new(out_dir)?;
    let mut seeds = Seeds::new(opts.seed);
    let [rho, c, delta] = RAYLEIGH_TRUTH;
    let truth_layer = ReflectionModel::rayleigh(rho, c, delta);
    let (env, source, ism, _, ds) = inversion_setup(opts, &mut seeds, 100.0, 2, 1.74, truth_layer.clone())?;
    art.dataset("dataset.csv", &ds)?;
    let k = WaveSpec::new(INV_FREQ, INV_SPEED)?.wavenumber();
    let train_pos: Vec<Vec3> = ds.samples(Split::Train).iter().map(|s| s.position).collect();
    let rays = nominal_rays(&env, source, centroid(&train_pos)?, 6)?;
    let mut base = TrainConfig { max_epochs: 3000, restarts: 4, batch_size: 256, ..TrainConfig::default() };
    base.penalties.zeta0 = 1e-6;
    base.penalties.beta = 1e-6;
    base.group_learning_rates.angle = Some(1e-5);
    base.group_learning_rates.distance = Some(1e-3);
    base.group_learning_rates.reflection = Some(3e-3);
    let cfg = geometry_config(opts, base)?;
    let factory = |s: u64| -> Result<RayBasisModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let layer = ReflectionModel::rayleigh(rng.gen_range(1.1..2.0), rng.gen_range(0.8..1.0), rng.gen_range(0.0..0.01));
        Ok(GeometryAidedModel::new(rays.clone(), k, layer, 0.0)?.into())
    };
    let (model, report) = multi_restart_train(factory, &ds, &cfg)?;
    let est = match &model {
        RayBasisModel::GeometryAided(g) => g.reflection.params(),
        _ => unreachable!("factory builds geometry-aided models"),
    };
    let estimate = [est[0], est[1], est[2]];
    let recovery = RayleighRecovery {
        truth: RAYLEIGH_TRUTH,
        estimate,
        relative_error: [0, 1, 2].map(|i| (estimate[i] - RAYLEIGH_TRUTH[i]) / RAYLEIGH_TRUTH[i]),
    };
    if let RayBasisModel::GeometryAided(g) = &model {
        let p = art.path("reflection_curve.csv");
        write_reflection_curve(&g.reflection, std::fs::File::create(p)?)?;
    }
    let h = opts.grid_resolution.unwrap_or(0.25);
    let aoi = GridSpec { min: [100.0, 0.0, 0.5], max: [200.0, 0.0, 29.5], resolution: [h, 0.0, h] };
    let mut s = summary(ScenarioName::InvertRayleigh, opts, &ds, &model, &report);
    s.rayleigh = Some(recovery);
    s.aoi = Some(grid_metrics(&mut art, "grid", &model, &aoi, |p| ism.amplitude(p))?);
    finish(art, s, model, report)
}

/// Tank geometry: true box, the slightly wrong box known to the model, and
/// the AOI split at `TANK_SPLIT_DEPTH`.
pub const TANK_DIMS: [f64; 3] = [2.5, 1.2, 0.8];
pub const TANK_KNOWN_DIMS: [f64; 3] = [2.51, 1.215, 0.82];
pub const TANK_SOURCE: [f64; 3] = [0.5, 0.6, 0.3];
pub const TANK_KNOWN_SOURCE: [f64; 3] = [0.52, 0.6, 0.3];
pub const TANK_AOI_MIN: [f64; 3] = [1.0, 0.15, 0.10];
pub const TANK_AOI_MAX: [f64; 3] = [1.36, 1.05, 0.54];
pub const TANK_SPLIT_DEPTH: f64 = 0.36;

pub fn tank_env(dims: [f64; 3]) -> Environment {
    let wall = ReflectionModel::rayleigh(1.5, 0.9, 0.0);
    Environment::Box {
        dims,
        sound_speed: 1505.0,
        walls: [
            wall.clone(),
            wall.clone(),
            wall.clone(),
            wall.clone(),
            ReflectionModel::PressureRelease,
            wall,
        ],
        absorption: 0.0,
    }
}

fn uniform_points(rng: &mut ChaCha8Rng, n: usize, lo: [f64; 3], hi: [f64; 3]) -> Vec<Vec3> {
    (0..n)
        .map(|_| Vec3::new(rng.gen_range(lo[0]..hi[0]), rng.gen_range(lo[1]..hi[1]), rng.gen_range(lo[2]..hi[2])))
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn tank_sim(opts: &ScenarioOptions, out_dir: &Path) -> Result<ScenarioResult> {
    let mut art = Artifacts::new(out_dir)?;
    let mut seeds = Seeds::new(opts.seed);
    let freq = 10e3;
    let env = tank_env(TANK_DIMS);
    let source = Vec3::from_array(TANK_SOURCE);
    let ism = IsmField::new(&env, freq, source, 4)?;
    let truth = |p: Vec3| ism.amplitude(p);

    let mut rng = ChaCha8Rng::seed_from_u64(seeds.next());
    let mut upper_hi = TANK_AOI_MAX;
    upper_hi[2] = TANK_SPLIT_DEPTH;
    let mut lower_lo = TANK_AOI_MIN;
    lower_lo[2] = TANK_SPLIT_DEPTH;
    let mut points = uniform_points(&mut rng, 278, TANK_AOI_MIN, upper_hi);
    points.extend(uniform_points(&mut rng, 222, lower_lo, TANK_AOI_MAX));
    let mut splits = assign_splits(278, SplitFractions::new(250.0 / 278.0, 28.0 / 278.0, 0.0), seeds.next())?;
    splits.extend(std::iter::repeat(Split::Test).take(222));
    let amps = amplitudes(&points, truth)?;
    let clean = labelled(&points, &amps, &splits)?;
    let noise_seed = seeds.next();
    let ds = match opts.position_noise {
        Some(b) => add_position_noise(&clean, b, noise_seed)?,
        None => crate::oracle::add_position_noise_with(
            &clean,
            |p| if p.z < TANK_SPLIT_DEPTH { 0.02 } else { 0.04 },
            noise_seed,
        )?,
    };
    art.dataset("dataset.csv", &ds)?;
    art.dataset("dataset_true_positions.csv", &clean)?;

    let k = WaveSpec::new(freq, 1505.0)?.wavenumber();
    let train_pos: Vec<Vec3> = ds.samples(Split::Train).iter().map(|s| s.position).collect();
    let known = tank_env(TANK_KNOWN_DIMS);
    let rays = nominal_rays(&known, Vec3::from_array(TANK_KNOWN_SOURCE), centroid(&train_pos)?, 4)?;
    let mut base = TrainConfig { max_epochs: 1500, restarts: 4, loss: LossKind::AbsoluteError, ..TrainConfig::default() };
    base.penalties.zeta0 = 100.0;
    base.penalties.beta = 10.0;
    base.penalties.eta = 1.0;
    base.group_learning_rates.angle = Some(1e-3);
    base.group_learning_rates.distance = Some(1e-3);
    let cfg = geometry_config(opts, base)?;
    let factory = |s: u64| -> Result<RayBasisModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let layer = ReflectionModel::LearnedRcnn { weights: RcnnWeights::random(DEFAULT_HIDDEN, &mut rng) };
        Ok(GeometryAidedModel::new(rays.clone(), k, layer, 0.0)?.into())
    };
    let (model, report) = multi_restart_train(factory, &ds, &cfg)?;

    // held-out region, scored at the true positions
    let test_true: Vec<Sample> = clean.samples(Split::Test);
    let test_points: Vec<Vec3> = test_true.iter().map(|s| s.position).collect();
    let test_truth: Vec<f64> = test_true.iter().map(|s| s.amplitude).collect();
    let pred = predict_points(&model, &test_points)?;
    let truth_table = FieldTable { rows: test_true.iter().map(|s| (s.position, Some(s.amplitude))).collect() };
    let test_metrics = compare_tables(&pred, &truth_table)?;
    let idw = idw_baseline(&ds.samples(Split::Train), &test_points, 2.0)?;
    let baseline = MetricsReport::compute(&idw, &test_truth)?;
    art.table("test_predicted.csv", &pred)?;
    art.table("test_baseline_idw.csv", &FieldTable { rows: test_points.iter().copied().zip(idw.iter().map(|&v| Some(v))).collect() })?;

    // second stage: per-record position errors with the model frozen
    let weight = opts.refine_weight.unwrap_or(1.0);
    let refine_cfg = TrainConfig { max_epochs: 1500, patience: 300, loss: cfg.loss, verbose: cfg.verbose, ..TrainConfig::default() };
    let refined = refine_positions(&model, &ds, weight, &refine_cfg)?;
    let refinement = refinement_summary(&refined, &ds, &clean);
    write_offsets(&mut art, &refined, &ds, &clean)?;

    let h = opts.grid_resolution.unwrap_or(0.01);
    let grid = GridSpec {
        min: [TANK_AOI_MIN[0], TANK_AOI_MIN[1], TANK_AOI_MIN[2]],
        max: [TANK_AOI_MAX[0], TANK_AOI_MAX[1], TANK_AOI_MAX[2] - 0.04],
        resolution: [h, h, 0.05],
    };
    let mut s = summary(ScenarioName::TankSim, opts, &ds, &model, &report);
    s.test = Some(test_metrics);
    s.baseline = Some(baseline);
    s.refinement = Some(refinement);
    s.aoi = Some(grid_metrics(&mut art, "grid", &model, &grid, truth)?);
    finish(art, s, model, report)
}

/// Statistics of estimated offsets against the injected ones.
pub fn refinement_summary(refined: &RefineReport, recorded: &Dataset, truth: &Dataset) -> RefinementSummary {
    let mut errors = Vec::new();
    let mut injected = Vec::new();
    let mut norms = Vec::new();
    for ((o, r), t) in refined.offsets.iter().zip(&recorded.records).zip(&truth.records) {
        let true_offset = t.position - r.position;
        errors.push((*o - true_offset).norm());
        injected.push(true_offset.norm());
        norms.push(o.norm());
    }
    let below = norms.iter().filter(|&&n| n < 0.04).count();
    RefinementSummary {
        records: norms.len(),
        fraction_below_4cm: below as f64 / norms.len().max(1) as f64,
        median_error: median(errors),
        median_injected: median(injected),
        median_estimate: median(norms),
        best_loss: refined.best_loss,
    }
}

fn write_offsets(art: &mut Artifacts, refined: &RefineReport, recorded: &Dataset, truth: &Dataset) -> Result<()> {
    let p = art.path("offsets.csv");
    let mut w = csv::Writer::from_path(p)?;
    w.write_record(["x", "y", "z", "dx", "dy", "dz", "true_dx", "true_dy", "true_dz"])?;
    for ((o, r), t) in refined.offsets.iter().zip(&recorded.records).zip(&truth.records) {
        let d = t.position - r.position;
        w.write_record(
            [r.position.x, r.position.y, r.position.z, o.x, o.y, o.z, d.x, d.y, d.z].map(|v| v.to_string()),
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for n in ScenarioName::ALL {
            assert_eq!(n.as_str().parse::<ScenarioName>().unwrap(), n);
        }
        assert!("nope".parse::<ScenarioName>().is_err());
    }

    #[test]
    fn eigenray_planes_match_image_terms_at_centre() {
        let env = waveguide(30.0, 1541.0);
        let source = Vec3::new(0.0, 0.0, 5.0);
        let centre = Vec3::new(1000.0, 0.0, 15.0);
        let planes = eigenray_planes(&env, 10e3, source, centre, 3, 1.0).unwrap();
        let k = WaveSpec::new(10e3, 1541.0).unwrap().wavenumber();
        let plane = crate::oracle::synth_plane_field(&planes, k, centre).unwrap();
        let field = IsmField::new(&env, 10e3, source, 1).unwrap();
        let direct = field.field(centre).unwrap();
        assert!((plane - direct).norm() < 1e-9 * direct.norm());
    }

    #[test]
    fn far_field_uses_table_split() {
        let dir = tempfile::tempdir().unwrap();
        let opts = ScenarioOptions { max_epochs: Some(1), restarts: Some(1), alphas: Some(vec![0.0]), polish_epochs: Some(0), grid_resolution: Some(5.0), ..Default::default() };
        let r = run_scenario(ScenarioName::FarField, &opts, dir.path()).unwrap();
        assert_eq!((r.summary.train_count, r.summary.validation_count), (688, 296));
        assert_eq!(r.model.n_ray(), 60);
        for f in &r.summary.files {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }

    #[test]
    fn near_field_uses_table_split() {
        let dir = tempfile::tempdir().unwrap();
        let opts = ScenarioOptions { max_epochs: Some(1), restarts: Some(1), grid_resolution: Some(5.0), ..Default::default() };
        let r = run_scenario(ScenarioName::NearField, &opts, dir.path()).unwrap();
        assert_eq!((r.summary.train_count, r.summary.validation_count), (116, 51));
    }

    #[test]
    fn tank_splits_vertically() {
        let dir = tempfile::tempdir().unwrap();
        let opts = ScenarioOptions { max_epochs: Some(1), restarts: Some(1), grid_resolution: Some(0.1), ..Default::default() };
        let r = run_scenario(ScenarioName::TankSim, &opts, dir.path()).unwrap();
        assert_eq!((r.summary.train_count, r.summary.validation_count, r.summary.test_count), (250, 28, 222));
        assert_eq!(r.model.n_ray(), 129);
        let clean = Dataset::load(&dir.path().join("dataset_true_positions.csv")).unwrap();
        for rec in &clean.records {
            assert_eq!(rec.split == Split::Test, rec.position.z >= TANK_SPLIT_DEPTH);
        }
    }

    #[test]
    fn reflection_curve_has_181_rows() {
        let mut buf = Vec::new();
        write_reflection_curve(&seabed(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 182);
        assert!(text.starts_with("gamma,eps,kappa\n"));
    }
}
