//! Regular grids and field tables.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::metrics::MetricsReport;
use crate::geometry::Vec3;
use crate::model::RayBasisModel;

/// Axis-aligned grid. An axis with `min == max` is flat and has one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub resolution: [f64; 3],
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let mut extended = false;
        for a in 0..3 {
            let (lo, hi, h) = (self.min[a], self.max[a], self.resolution[a]);
            if !(lo.is_finite() && hi.is_finite() && h.is_finite()) {
                return Err(Error::invalid("grid bounds and resolution must be finite"));
            }
            if hi < lo {
                return Err(Error::invalid(format!("grid axis {a}: max {hi} below min {lo}")));
            }
            if hi > lo {
                if !(h > 0.0) {
                    return Err(Error::invalid(format!("grid axis {a}: resolution must be positive")));
                }
                extended = true;
            }
        }
        if !extended {
            return Err(Error::invalid("grid must extend along at least one axis"));
        }
        Ok(())
    }

    pub fn axis_counts(&self) -> [usize; 3] {
        let mut n = [1; 3];
        for (a, c) in n.iter_mut().enumerate() {
            if self.max[a] > self.min[a] {
                *c = ((self.max[a] - self.min[a]) / self.resolution[a] + 1e-9).floor() as usize + 1;
            }
        }
        n
    }

    pub fn len(&self) -> usize {
        self.axis_counts().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes with x varying slowest and z fastest.
    pub fn points(&self) -> Result<Vec<Vec3>> {
        self.validate()?;
        let [nx, ny, nz] = self.axis_counts();
        let coord = |a: usize, i: usize| self.min[a] + i as f64 * self.resolution[a];
        let mut out = Vec::with_capacity(nx * ny * nz);
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    out.push(Vec3::new(coord(0, i), coord(1, j), coord(2, k)));
                }
            }
        }
        Ok(out)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: Self = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }
}

/// Positions with an amplitude each; `None` marks a node where the field is
/// undefined (written as an empty cell).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FieldTable {
    pub rows: Vec<(Vec3, Option<f64>)>,
}

fn fmt(v: f64) -> String {
    v.to_string()
}

impl FieldTable {
    pub fn amplitudes(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.1).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "y", "z", "amplitude"])?;
        for (p, a) in &self.rows {
            w.write_record([fmt(p.x), fmt(p.y), fmt(p.z), a.map(fmt).unwrap_or_default()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads any CSV with `x`, `y`, `z` and `amplitude` columns; other
    /// columns (such as a dataset's `split`) are ignored.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::invalid(format!("CSV lacks a `{name}` column")))
        };
        let idx = [col("x")?, col("y")?, col("z")?, col("amplitude")?];
        let num = |s: &str, line: usize| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::invalid(format!("line {line}: bad number {s:?}: {e}")))
        };
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let get = |c: usize| rec.get(c).unwrap_or("");
            let p = Vec3::new(num(get(idx[0]), line)?, num(get(idx[1]), line)?, num(get(idx[2]), line)?);
            let a = get(idx[3]).trim();
            let a = if a.is_empty() { None } else { Some(num(a, line)?) };
            rows.push((p, a));
        }
        Ok(Self { rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Evaluates `model` at `points`; singular points become `None`.
pub fn predict_points(model: &RayBasisModel, points: &[Vec3]) -> Result<FieldTable> {
    let values = model.predict_many(points)?;
    let rows = points
        .iter()
        .zip(values)
        .map(|(&p, v)| match v {
            Ok(a) => Ok((p, Some(a))),
            Err(Error::Singularity(_)) => Ok((p, None)),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldTable { rows })
}

/// Evaluates `model` at every grid node in row-major order.
pub fn predict_grid(model: &RayBasisModel, grid: &GridSpec) -> Result<FieldTable> {
    predict_points(model, &grid.points()?)
}

/// Evaluates an arbitrary amplitude function over points in parallel, mapping
/// singularities to `None`.
pub fn tabulate<F>(points: &[Vec3], f: F) -> Result<FieldTable>
where
    F: Fn(Vec3) -> Result<f64> + Sync,
{
    let rows = points
        .par_iter()
        .map(|&p| match f(p) {
            Ok(a) => Ok((p, Some(a))),
            Err(Error::Singularity(_)) => Ok((p, None)),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldTable { rows })
}

/// Metrics between two tables paired row by row. Rows must share positions
/// (to 1e-9 m); rows missing a value on either side are skipped.
pub fn compare_tables(predicted: &FieldTable, truth: &FieldTable) -> Result<MetricsReport> {
    if predicted.rows.len() != truth.rows.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} predicted rows vs {} reference rows",
            predicted.rows.len(),
            truth.rows.len()
        )));
    }
    let (mut p, mut t) = (Vec::new(), Vec::new());
    let mut skipped = 0;
    for (i, ((pp, pa), (tp, ta))) in predicted.rows.iter().zip(&truth.rows).enumerate() {
        if pp.distance(*tp) > 1e-9 {
            return Err(Error::invalid(format!("row {i}: positions differ between tables")));
        }
        match (pa, ta) {
            (Some(a), Some(b)) => {
                p.push(*a);
                t.push(*b);
            }
            _ => skipped += 1,
        }
    }
    let mut report = MetricsReport::compute(&p, &t)?;
    report.skipped = skipped;
    Ok(report)
}
