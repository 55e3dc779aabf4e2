// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod cli;
pub mod config;
pub mod display;
pub mod experiment;
pub mod melody;
pub mod model;
pub mod pipeline;
pub mod recorder;
pub mod rng;
pub mod wire;
