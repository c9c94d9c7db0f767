//! Numerical rank estimation and fixed-precision low-rank approximation by
//! two-sided randomized sketching.
//!
//! The pipeline is: sketch `A` from the right (`AX`), mix and subsample
//! from the left (`ΘAX`), read off singular values of the small sketch and
//! threshold them. The same sketch feeds a randomized rangefinder when a QB
//! factorization of prescribed Frobenius accuracy is wanted.
//!
//! Modules:
//! - [`linalg`]: dense matrix type, QR, singular values, norms, coherence.
//! - [`sketch`]: Gaussian, subsampled (SRTT) and hashed (HRTT) randomized
//!   trigonometric embeddings.
//! - [`rank`]: the ε-rank estimator with adaptive restart.
//! - [`rangefinder`]: QB factorization and the fixed-precision driver.
//! - [`synthetic`]: test spectra and matrices.
//! - [`theory`]: closed-form bounds and their Monte-Carlo checkers.
//! - [`io`]: MatrixMarket and raw binary matrix files.

pub mod error;
pub mod io;
pub mod linalg;
pub mod rangefinder;
pub mod rank;
pub mod rng;
pub mod sketch;
pub mod synthetic;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, QrFactors, SingularValues};
pub use rangefinder::{FixedPrecisionConfig, QbFactors};
pub use rank::{RankEstimateConfig, RankReport, RankStatus, SvMethod};
pub use sketch::{SketchKind, SketchOperator, TransformKind};
pub use synthetic::{FactorKind, SpectrumSpec};
