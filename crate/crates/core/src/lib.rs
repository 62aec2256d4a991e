//! Neighbourhood renewable-energy balancing market simulator.

// `!(x > 0.0)` is deliberate: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod auction;
pub mod grid;
pub mod hems;
pub mod ledger;
pub mod lp;
pub mod scenario;
pub mod sim;
pub mod units;
