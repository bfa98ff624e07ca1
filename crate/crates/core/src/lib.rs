//! Pricing VIX futures and options under mixed one- and two-factor Bergomi
//! models by optimal quantisation of the Ornstein–Uhlenbeck factors.

// `!(x > 0.0)` style guards reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod conventions;
pub mod error;
pub mod marketdata;
pub mod models;
pub mod normal;
pub mod optim;
pub mod oracle;
pub mod output;
pub mod pricing;
pub mod quadrature;
pub mod quantiser;
pub mod stability;
pub mod synthetic;

pub use error::{Error, Result};
