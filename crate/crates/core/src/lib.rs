#![allow(clippy::needless_range_loop)]

pub mod bnp;
pub mod cli;
pub mod colgen;
pub mod cuts;
pub mod lp;
pub mod master;
pub mod model;
pub mod oracle;
pub mod subsolver;
pub mod tkp;
