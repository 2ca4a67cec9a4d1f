//! Restart and checkpointing of tasks under failures.
//!
//! Analytic expected actual times for a single task, sequential simulation
//! of restart and checkpointing over marked point processes, asymptotic
//! efficiency estimates, universal checkpoints and random-walk task
//! repetition.

pub mod dist;
pub mod quad;
pub mod rng;
pub mod analytic;
pub mod procgen;
pub mod restart;
pub mod checkpoint;
pub mod stats;
pub mod universal;
pub mod rwalk;
pub mod scenario;
