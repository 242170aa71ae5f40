//! Even activation functions and a small, deterministic MLP training stack
//! for regressing partially exchangeable targets `f(u, v, w) = f(v, u, w)`.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`] and [`autodiff`]: dense `f64` tensors and a reverse-mode tape.
//! - [`activation`]: the activation catalog, including `ln(1 + x²)` ("Seagull").
//! - [`network`] and [`checkpoint`]: fully connected networks and their files.
//! - [`optimizer`]: RMSProp training with a halving learning-rate schedule.
//! - [`datagen`]: triangle-area and solid-angle regression data.
//! - [`symmetry`]: exchange/evenness gap diagnostics and the `sin(xy)` network.
//! - [`bench`]: experiment grids, run records and report tables.

pub mod activation;
pub mod autodiff;
pub mod bench;
pub mod checkpoint;
pub mod datagen;
pub mod error;
pub mod gradcheck;
pub mod network;
pub mod optimizer;
pub mod symmetry;
pub mod tensor;

pub use activation::{ActivationKind, LogPowAbs};
pub use datagen::{Dataset, Domain, NoiseMode, NoiseSpec, Point9, TargetKind, TransformKind};
pub use error::{Error, Result};
pub use network::{LayerSpec, Network, NetworkSpec, Predictor};
pub use optimizer::{train, TrainConfig, TrainReport};
pub use symmetry::{measure_symmetry, SymmetryReport};
pub use tensor::Tensor;
