// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fock;
pub mod homodyne;
pub mod maxlik;
pub mod mlp;
pub mod pipeline;
pub mod seeding;
pub mod stellar;
pub mod tsne;
pub mod witness;

pub use error::{CvError, Result};
