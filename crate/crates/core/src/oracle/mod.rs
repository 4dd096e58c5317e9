//! Ground-truth acoustic fields: the image source method for waveguides and
//! boxes, plane-wave synthesis, and dataset generation along float
//! trajectories.

pub mod field;
pub mod images;
pub mod sampling;
pub mod trajectory;

pub use field::{field_ism, synth_plane_field, IsmField, PlaneRay};
pub use images::{enumerate_images, enumerate_images_box, enumerate_images_waveguide, ImageSource};
pub use sampling::{add_position_noise, add_position_noise_with, assign_splits, make_dataset, SplitFractions};
pub use trajectory::{gen_zigzag_trajectory, TrajectoryConfig};
