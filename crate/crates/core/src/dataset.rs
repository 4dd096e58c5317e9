//! Measurement datasets and their CSV representation.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// One measured amplitude at a recorded position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub position: Vec3,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub position: Vec3,
    pub amplitude: f64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<Record>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    x: f64,
    y: f64,
    z: f64,
    amplitude: f64,
    split: Split,
}

impl Dataset {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        let ds = Self { records };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if !r.position.is_finite() {
                return Err(Error::invalid(format!("record {i} has a non-finite position")));
            }
            if !(r.amplitude >= 0.0 && r.amplitude.is_finite()) {
                return Err(Error::invalid(format!("record {i} has invalid amplitude {}", r.amplitude)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn samples(&self, split: Split) -> Vec<Sample> {
        self.records
            .iter()
            .filter(|r| r.split == split)
            .map(|r| Sample { position: r.position, amplitude: r.amplitude })
            .collect()
    }

    pub fn all_samples(&self) -> Vec<Sample> {
        self.records.iter().map(|r| Sample { position: r.position, amplitude: r.amplitude }).collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.records.iter().filter(|r| r.split == split).count()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        w.write_record(["x", "y", "z", "amplitude", "split"])?;
        for r in &self.records {
            w.serialize(CsvRow { x: r.position.x, y: r.position.y, z: r.position.z, amplitude: r.amplitude, split: r.split })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(reader);
        let headers = rd.headers()?.clone();
        let expected = ["x", "y", "z", "amplitude", "split"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::invalid(format!("dataset CSV header must be `{}`", expected.join(","))));
        }
        let mut records = Vec::new();
        for row in rd.deserialize() {
            let row: CsvRow = row?;
            records.push(Record { position: Vec3::new(row.x, row.y, row.z), amplitude: row.amplitude, split: row.split });
        }
        Dataset::new(records)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
