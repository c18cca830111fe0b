//! Voronoi-seeded genetic optimization of wireless node deployments, with a
//! simulated coordinator/worker protocol for running the optimizer as an
//! island model.

pub mod cli;
pub mod config;
pub mod geometry;
pub mod harness;
pub mod optimizer;
pub mod protocol;
pub mod seeding;
pub mod simnet;
pub mod streams;
