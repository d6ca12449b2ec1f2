//! Numerical companion for dynamical Virasoro constraints of β-ensembles
//! under Dyson Brownian motion.

pub mod boson;
pub mod dyson;
pub mod fseries;
pub mod kernel;
pub mod nptransform;
pub mod svconstraints;
