// `!(x > 0.0)` style guards reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axioms;
pub mod batch;
pub mod decompose;
pub mod error;
pub mod fixtures;
pub mod flow;
pub mod lp;
pub mod mechanisms;
pub mod model;
pub mod rational;
pub mod solver;
pub mod suite;
