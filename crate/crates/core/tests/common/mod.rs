//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod auction_oracle;
pub mod grid_oracle;
pub mod hems_check;
pub mod lp_oracle;
