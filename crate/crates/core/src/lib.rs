#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod montecarlo;
pub mod multicell;
pub mod numerics;
pub mod singlecell;
