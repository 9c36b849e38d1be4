//! Planar piecewise-smooth systems split by the line `y = 0`.

pub mod error;
pub mod roots;
pub mod scalar;
pub mod flow;
pub mod loops;
pub mod maps;
pub mod system;
pub mod tangency;
pub mod unfolding;

pub use error::{PwsError, Result};
pub use scalar::{constant_field, expr_field, Field, Scalar};
pub use system::{PwsSystem, Side, SigmaDecomposition, Subsystem, Window};
pub use tangency::{TangentPointRecord, Visibility};
