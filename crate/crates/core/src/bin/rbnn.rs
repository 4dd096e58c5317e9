use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use rbnn::dataset::{Dataset, Split};
use rbnn::error::{Error, Result};
use rbnn::eval::{compare_tables, idw_baseline, predict_grid, predict_points, FieldTable, GridSpec};
use rbnn::geometry::Vec3;
use rbnn::jobs::{parse, InversionJob, LayerSpec, SimulateJob, TraceJob, TrainJob};
use rbnn::model::RayBasisModel;
use rbnn::raytrace::write_rays_csv;
use rbnn::scenario::{run_scenario, write_reflection_curve, ScenarioName, ScenarioOptions};
use rbnn::train::{multi_restart_train, refine_positions, TrainConfig, TrainReport};

/// Ray-basis acoustic field models: simulate, train, invert and evaluate.
#[derive(Parser)]
#[command(name = "rbnn", version)]
struct Cli {
    /// Seed for every random choice; overrides seeds in config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Per-epoch progress on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the image-source field along a trajectory -> dataset.csv
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Nominal eigenray table -> rays.csv
    Trace {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit a model -> model.json, report.json
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimate per-record position errors against a trained model
    /// -> offsets.csv, refine_report.json, dataset_refined.csv
    RefinePositions {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Weight of the squared-offset penalty.
        #[arg(long, default_value_t = 1.0)]
        weight: f64,
        /// Training config JSON (epochs, patience, position learning rate, loss).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate a model on a grid or point list -> field.csv
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        query: Query,
    },
    /// Geometry-aided model with a Rayleigh layer
    /// -> model.json, report.json, rayleigh.json, reflection_curve.csv
    InvertRayleigh {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Geometry-aided model with a learned reflection layer
    /// -> model.json, report.json, reflection_curve.csv
    InvertRcnn {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare two field tables -> metrics.json
    Eval {
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Inverse-distance interpolation of the training split -> baseline.csv
    BaselineIdw {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        query: Query,
        #[arg(long, default_value_t = 2.0)]
        power: f64,
    },
    /// Run a built-in simulation scenario
    RunScenario {
        /// far-field, near-field, invert-rcnn, invert-rayleigh or tank-sim
        name: String,
        /// Scenario options JSON.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
#[group(required = true, multiple = false)]
struct Query {
    /// Grid JSON: {"min": [..], "max": [..], "resolution": [..]}
    #[arg(long)]
    grid: Option<PathBuf>,
    /// CSV with columns x,y,z
    #[arg(long)]
    points: Option<PathBuf>,
}

#[derive(Deserialize)]
struct PointRow {
    x: f64,
    y: f64,
    z: f64,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_points(path: &Path) -> Result<Vec<Vec3>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize::<PointRow>().map(|row| row.map(|p| Vec3::new(p.x, p.y, p.z)).map_err(Error::from)).collect()
}

fn query_points(q: &Query) -> Result<Vec<Vec3>> {
    match (&q.grid, &q.points) {
        (Some(g), _) => GridSpec::from_json(&read_text(g)?)?.points(),
        (None, Some(p)) => read_points(p),
        (None, None) => Err(Error::InvalidArgument("either --grid or --points is required".into())),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

struct Ctx {
    seed: Option<u64>,
    verbose: bool,
    out: PathBuf,
}

impl Ctx {
    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn config(&self, mut c: TrainConfig) -> Result<TrainConfig> {
        if let Some(s) = self.seed {
            c.seed = s;
        }
        c.verbose |= self.verbose;
        c.validate()?;
        Ok(c)
    }

    fn fit(&self, job: &TrainJob, data: &Path) -> Result<(Dataset, RayBasisModel, TrainReport)> {
        let ds = Dataset::load(data)?;
        let cfg = self.config(job.train.clone())?;
        let spec = job.model.prepare(&ds)?;
        let (model, report) = multi_restart_train(|s| spec.build(s), &ds, &cfg)?;
        model.save(&self.file("model.json"))?;
        write_json(&self.file("report.json"), &report)?;
        Ok((ds, model, report))
    }
}

fn fit_summary(ds: &Dataset, model: &RayBasisModel, report: &TrainReport) -> Value {
    json!({
        "kind": model.kind(),
        "n_ray": model.n_ray(),
        "num_params": model.num_params(),
        "train_count": ds.count(Split::Train),
        "validation_count": ds.count(Split::Validation),
        "best_validation_loss": report.best_validation_loss,
        "best_epoch": report.best_epoch,
        "chosen_restart": report.chosen_restart,
    })
}

fn reflection_layer(model: &RayBasisModel) -> Result<&rbnn::environment::ReflectionModel> {
    match model {
        RayBasisModel::GeometryAided(g) => Ok(&g.reflection),
        _ => Err(Error::InvalidArgument("model has no reflection layer".into())),
    }
}

fn run(cli: Cli) -> Result<Value> {
    let ctx = Ctx { seed: cli.seed, verbose: cli.verbose, out: cli.out };
    fs::create_dir_all(&ctx.out)?;
    match cli.command {
        Command::Simulate { config } => {
            let job: SimulateJob = parse(&read_text(&config)?)?;
            let ds = job.run(ctx.seed.unwrap_or(0))?;
            ds.save(&ctx.file("dataset.csv"))?;
            Ok(json!({
                "files": ["dataset.csv"],
                "records": ds.len(),
                "train_count": ds.count(Split::Train),
                "validation_count": ds.count(Split::Validation),
                "test_count": ds.count(Split::Test),
            }))
        }
        Command::Trace { config } => {
            let job: TraceJob = parse(&read_text(&config)?)?;
            let rays = job.run()?;
            write_rays_csv(&rays, fs::File::create(ctx.file("rays.csv"))?)?;
            Ok(json!({ "files": ["rays.csv"], "rays": rays.len() }))
        }
        Command::Train { data, config } => {
            let job: TrainJob = parse(&read_text(&config)?)?;
            let (ds, model, report) = ctx.fit(&job, &data)?;
            let mut v = fit_summary(&ds, &model, &report);
            v["files"] = json!(["model.json", "report.json"]);
            Ok(v)
        }
        Command::RefinePositions { model, data, weight, config } => {
            let model = RayBasisModel::load(&model)?;
            let ds = Dataset::load(&data)?;
            let cfg = match config {
                Some(p) => TrainConfig::from_json(&read_text(&p)?)?,
                None => TrainConfig::default(),
            };
            let cfg = ctx.config(cfg)?;
            let rep = refine_positions(&model, &ds, weight, &cfg)?;
            rep.write_csv(&ds, fs::File::create(ctx.file("offsets.csv"))?)?;
            write_json(&ctx.file("refine_report.json"), &rep)?;
            rep.corrected(&ds).save(&ctx.file("dataset_refined.csv"))?;
            let mut norms: Vec<f64> = rep.offsets.iter().map(|o| o.norm()).collect();
            norms.sort_by(f64::total_cmp);
            Ok(json!({
                "files": ["offsets.csv", "refine_report.json", "dataset_refined.csv"],
                "records": ds.len(),
                "best_loss": rep.best_loss,
                "initial_loss": rep.loss_history.first(),
                "epochs_run": rep.epochs_run,
                "median_offset": norms[norms.len() / 2],
                "max_offset": norms.last(),
            }))
        }
        Command::Predict { model, query } => {
            let model = RayBasisModel::load(&model)?;
            let table = match &query.grid {
                Some(g) => predict_grid(&model, &GridSpec::from_json(&read_text(g)?)?)?,
                None => predict_points(&model, &query_points(&query)?)?,
            };
            table.save(&ctx.file("field.csv"))?;
            let singular = table.rows.iter().filter(|r| r.1.is_none()).count();
            Ok(json!({ "files": ["field.csv"], "rows": table.rows.len(), "singular": singular }))
        }
        Command::InvertRayleigh { data, config } => {
            let job: InversionJob = parse(&read_text(&config)?)?;
            let tj = job.train_job(LayerSpec::rayleigh());
            let (ds, model, report) = ctx.fit(&tj, &data)?;
            let layer = reflection_layer(&model)?;
            let p = layer.params();
            if p.len() != 3 {
                return Err(Error::InvalidArgument("invert-rayleigh needs a rayleigh layer".into()));
            }
            let est = json!({ "rho_r": p[0], "c_r": p[1], "delta": p[2] });
            write_json(&ctx.file("rayleigh.json"), &est)?;
            write_reflection_curve(layer, fs::File::create(ctx.file("reflection_curve.csv"))?)?;
            let mut v = fit_summary(&ds, &model, &report);
            v["rayleigh"] = est;
            v["files"] = json!(["model.json", "report.json", "rayleigh.json", "reflection_curve.csv"]);
            Ok(v)
        }
        Command::InvertRcnn { data, config } => {
            let job: InversionJob = parse(&read_text(&config)?)?;
            let tj = job.train_job(LayerSpec::rcnn());
            let (ds, model, report) = ctx.fit(&tj, &data)?;
            write_reflection_curve(reflection_layer(&model)?, fs::File::create(ctx.file("reflection_curve.csv"))?)?;
            let mut v = fit_summary(&ds, &model, &report);
            v["files"] = json!(["model.json", "report.json", "reflection_curve.csv"]);
            Ok(v)
        }
        Command::Eval { predicted, truth } => {
            let report = compare_tables(&FieldTable::load(&predicted)?, &FieldTable::load(&truth)?)?;
            write_json(&ctx.file("metrics.json"), &report)?;
            Ok(serde_json::to_value(report)?)
        }
        Command::BaselineIdw { data, query, power } => {
            let ds = Dataset::load(&data)?;
            let points = query_points(&query)?;
            let amps = idw_baseline(&ds.samples(Split::Train), &points, power)?;
            let table = FieldTable { rows: points.into_iter().zip(amps.into_iter().map(Some)).collect() };
            table.save(&ctx.file("baseline.csv"))?;
            Ok(json!({ "files": ["baseline.csv"], "rows": table.rows.len() }))
        }
        Command::RunScenario { name, config } => {
            let name: ScenarioName = name.parse()?;
            let mut opts: ScenarioOptions = match config {
                Some(p) => parse(&read_text(&p)?)?,
                None => ScenarioOptions::default(),
            };
            if let Some(s) = ctx.seed {
                opts.seed = s;
            }
            opts.verbose |= ctx.verbose;
            let result = run_scenario(name, &opts, &ctx.out)?;
            Ok(serde_json::to_value(result.summary)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let doc = json!({ "error": { "kind": "usage", "message": e.to_string().trim_end() } });
            eprintln!("{doc}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            ExitCode::FAILURE
        }
    }
}
