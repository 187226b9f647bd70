//! Single-hidden-layer MLP training with optimal input gains.
//!
//! The network has bypass (input-to-output) weights and a trailing constant
//! input. Training algorithms: OWO-BP, OIG-BP, OIG-HWO, scaled conjugate
//! gradient and Levenberg-Marquardt.

pub mod data;
pub mod error;
pub mod gains;
pub mod gradients;
pub mod kfold;
pub mod linalg;
pub mod network;
pub mod trainers;

pub use error::{Error, Result};
pub use network::{Activation, Dataset, MlpParams, Task};
pub use trainers::{Algorithm, TrainConfig, TrainTrace};
