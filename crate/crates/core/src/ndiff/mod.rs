//! Minimal reverse-mode differentiation over small dense row-major tensors.
//!
//! A [`Tape`] records every primitive as it is evaluated; [`Tape::backward`]
//! walks the records in reverse and accumulates gradients. Tensors are at
//! most 2-D apart from bias vectors and scalar losses, which is all the
//! recurrent graph models need.

mod gradcheck;
mod neighborhood;
mod snapshot;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use neighborhood::{Aggregator, Neighborhood};
pub use snapshot::{read_snapshot, write_snapshot};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
