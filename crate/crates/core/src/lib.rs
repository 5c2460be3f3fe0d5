//! Distances, geodesics, cut locus and heat kernels on step-two Carnot groups.

pub mod bessel;
pub mod cli;
pub mod error;
pub mod geodesics;
pub mod group;
pub mod heatkernel;
pub mod linalg;
pub mod matfun;
pub mod minimize;
pub mod optimize;
pub mod oracle;
pub mod quadrature;
pub mod reference;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use group::{builtin_group, validate_group, Covector, GroupPoint, GroupSpec, StepTwoGroup};
pub use linalg::Matrix;
pub use scalar::{Field, Real};

pub type Group = StepTwoGroup<f64>;
pub type Point = GroupPoint<f64>;
pub type Cov = Covector<f64>;
pub type Mat = Matrix<f64>;
