//! Mobile-robot dispersion on port-labeled anonymous grids: a synchronous
//! simulator, crash adversaries, three dispersion protocols and the checkers
//! that validate their runs.

pub mod adversary;
pub mod cli;
pub mod config;
pub mod constants;
pub mod engine;
pub mod grid;
pub mod kernels;
pub mod protocols;
pub mod runner;
pub mod sweep;
pub mod trace;
pub mod verify;
