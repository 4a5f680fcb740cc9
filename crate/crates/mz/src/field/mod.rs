//! Grid fields and the operations defined on them: the `FLD1` binary file
//! format, finite-difference application of homogeneous operators, discrete
//! integrals and sup norms, and ball averaging with fixed or variable radius.

pub mod average;
pub mod grid;
pub mod integral;
pub mod io;
pub mod operator;

pub use average::{ball_average, variable_mollify};
pub use grid::{Boundary, Grid, GridField};
pub use integral::{distance_field, l1_dist_integral, l1_dist_integral_inflated, pairwise_sum};
pub use io::{read_field, write_field};
pub use operator::{
    apply_operator, derivative_tensor, operator_constant, sup_norm_derivative, HomogeneousOperator,
};
