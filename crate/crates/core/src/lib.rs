// `!(a <= b)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arithmetic;
pub mod cli;
pub mod cocycle;
pub mod config;
pub mod directions;
pub mod error;
pub mod harness;
pub mod induction;
pub mod sl2;
pub mod spectral;
