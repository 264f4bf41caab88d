//! Optical response: height-map smoothing, surface gradients, and the learned
//! reflectance mapping from gradients to RGB intensity.

pub mod dataset;
pub mod gradient;
pub mod mlp;
pub mod shade;
pub mod smoothing;
pub mod train;

pub use dataset::{build_rgb_normal_dataset, CalibrationCapture, DatasetOptions, RgbNormalDataset, RgbNormalRecord};
pub use gradient::{gradients, SurfaceGradientMap};
pub use mlp::{Network, ReflectanceModel};
pub use shade::{background_deviation, render_optical, shade, ShadeParams};
pub use smoothing::{default_pyramid, smooth_height_map, GaussianKernel};
pub use train::{train_reflectance, TrainReport, TrainSpec};
