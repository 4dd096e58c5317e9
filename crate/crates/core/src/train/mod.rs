//! Losses, gradients, optimization and position refinement.

pub mod adam;
pub mod config;
pub mod loss;
pub mod refine;
pub mod trainer;

pub use config::{GroupRates, LossKind, Penalties, TrainConfig};
pub use loss::{data_loss, energy_penalty, gradients, loss_geometry, loss_plane, objective, zeta_schedule, LossParts};
pub use refine::{refine_positions, RefineReport};
pub use trainer::{multi_restart_train, train, TrainReport};
