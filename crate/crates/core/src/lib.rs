//! Gaussian process regression by random subsampling.
//!
//! The crate provides exact GPR, the constant-time subsampled predictor,
//! Nyström and random-Fourier baselines, cross-validation over `(ν², h)`,
//! and step-graphon tools (cut norm, graphon loss) for checking how well a
//! subsample represents the full kernel matrix.
//!
//! ```
//! use subgpr::data::synthetic_regression;
//! use subgpr::{ExactGpr, KernelSpec, SubsampleModel, Truth};
//!
//! let data = synthetic_regression(Truth::Sin2Pi, 2000, 0.1, 1, 7)?.data;
//! let kernel = KernelSpec::gaussian(1.0);
//! let nu2 = 0.01;
//!
//! let exact = ExactGpr::fit(&data, kernel, nu2)?;
//! // λ = ν²/n, fitted on 256 random points.
//! let sub = SubsampleModel::fit(&data, kernel, nu2 / data.n() as f64, 256, 7)?;
//!
//! let x = [0.3];
//! let (a, b) = (exact.predict(&x)?, sub.predict(&x)?);
//! assert!((a.mean - b.mean).abs() < 0.1);
//! # Ok::<(), subgpr::Error>(())
//! ```

pub mod baselines;
pub mod data;
pub mod error;
pub mod gpr;
pub mod graphon;
pub mod kernels;
pub mod linalg;
pub mod model_selection;
pub mod seed;
pub mod subsampling;

pub use baselines::{FourierFeatures, NystromModel, RfeModel};
pub use data::{Dataset, FeatureMatrix, Scaler, Truth};
pub use error::{Error, Result};
pub use gpr::{ExactGpr, GprConfig, PredictiveDistribution};
pub use graphon::{StepFunction, StepGraphon};
pub use kernels::{KernelQuery, KernelSpec};
pub use model_selection::{CvPredictor, CvReport, Hyper, HyperGrid, LambdaConvention};
pub use subsampling::SubsampleModel;
