pub mod acoustics;
pub mod dataset;
pub mod environment;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod jobs;
pub mod model;
pub mod oracle;
pub mod raytrace;
pub mod scenario;
pub mod train;
