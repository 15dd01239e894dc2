//! Analytical queue model for collision-free TDMA (TSCH) mesh schedules.

pub mod chain;
pub mod conflict;
pub mod matrix;
pub mod metrics;
pub mod schedule;
pub mod stationary;
pub mod topology;
pub mod traffic;
pub mod schedulers;
pub mod multihop;
pub mod sim;
pub mod cli;
pub mod sweep;
