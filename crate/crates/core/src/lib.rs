#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Digital-twin platform engine and discrete-event smart city simulator.

pub mod autoscaler;
pub mod broker;
pub mod definitions;
pub mod engine;
pub mod metrics;
pub mod routing;
pub mod runtime;
pub mod scalar;
pub mod store;

pub use scalar::Scalar;
