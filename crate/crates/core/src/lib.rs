//! Scan-specific dynamic MRI reconstruction with a hash-encoded implicit
//! neural representation.
//!
//! A coordinate network `f_θ(x, y, t)` is fitted directly to undersampled
//! golden-angle radial k-space through a Kaiser–Bessel NUFFT, regularised by
//! temporal total variation and the nuclear norm of the Casorati matrix.
//! Once trained it can be queried at any time point, which gives temporal
//! super-resolution for free.

pub mod error;
pub mod image;
pub mod inr;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod numerics;
pub mod nufft;
pub mod optim;
pub mod phantom;
pub mod pipeline;
pub mod trajectory;

pub use error::{Error, Result};
pub use image::DynamicImage;
pub use numerics::{ComplexArray, C64};
