// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dual;
pub mod error;
pub mod feynman_kac;
pub mod harness;
pub mod market;
pub mod roots;
pub mod strategy;
pub mod turnpike;
