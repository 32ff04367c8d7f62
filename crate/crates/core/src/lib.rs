//! Statistics of random tensors.
//!
//! Order-2D tensors with dimensional lengths `n × n` are handled through
//! their matricization, an `n* × n*` matrix with `n* = n_1 ⋯ n_D`. On top of
//! that sit tensor determinants and inverses, covariance and correlation
//! tensors estimated from samples, and the tensor normal and elliptical
//! distributions with either a dense or a Kronecker-factored scale.
//!
//! ```
//! use tensorstat::distributions::{normal_log_density, TensorNormalParams};
//! use tensorstat::tensor::{DenseTensor, Shape, SquareTensor};
//!
//! let shape = Shape::new(vec![2, 2]).unwrap();
//! let p = TensorNormalParams::new(
//!     DenseTensor::zeros(shape.clone()),
//!     SquareTensor::identity(shape.clone()),
//! )
//! .unwrap();
//! let lp = normal_log_density(&p, &DenseTensor::zeros(shape)).unwrap();
//! assert!((lp + 2.0 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
//! ```

pub mod distributions;
pub mod error;
pub mod linalg;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{BlockTensor, DenseTensor, Shape, SquareTensor};
