//! Transient thermo-mechanical finite elements for rotor start-up and an
//! SQP optimizer for the start-up schedule.

pub mod fem;
pub mod linsolve;
pub mod mesh;
pub mod sparse;
pub mod fd;
pub mod heat;
pub mod ocp;
pub mod sqp;
pub mod thermoelastic;
pub mod io;
pub mod config;
pub mod cli;
