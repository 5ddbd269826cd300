// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod copula;
pub mod distributions;
pub mod empirical;
pub mod error;
pub mod gof;
pub mod optimize;
pub mod quadrature;
pub mod reference;
pub mod rng;
pub mod special;
pub mod two_component;

pub use copula::{CopulaEvaluator, CopulaParams, Family};
pub use error::{Error, Result};
pub use rng::StreamRng;
