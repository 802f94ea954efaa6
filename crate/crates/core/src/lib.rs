#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiment;
pub mod fosmodel;
pub mod fsim;
pub mod lmisolve;
pub mod matnum;
pub mod phiexpr;
pub mod synthesis;
