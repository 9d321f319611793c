//! One-dimensional marginals on the extended real line and discrete measures
//! on finite product grids.

mod ext_real;
mod marginal;
mod tensor;

pub use ext_real::ExtReal;
pub use marginal::{Marginal, MarginalKind};
pub use tensor::{Grid, TensorMeasure};

pub(crate) use tensor::{check_labels, subset_axes, sum_out};
