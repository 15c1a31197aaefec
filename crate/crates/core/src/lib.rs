//! Energy-aware solver for the single-bay container relocation problem.
//!
//! The crate models a container bay served by one gantry crane, simulates
//! relocation rules (a relocation scheme driving a priority function), and
//! accounts the total energy consumed by every crane move. On top of the
//! simulator it provides two hyperheuristics that design priority functions
//! automatically — a steady-state GA tuning the 12 coefficients of the GRH
//! penalty function, and genetic programming evolving free-form expression
//! trees — plus benchmark instance handling, a nonparametric statistics
//! pipeline, and the `crp` command-line experiment harness.
//!
//! Entry points:
//! - [`yard::Bay`] / [`scheme::run_restricted`] / [`scheme::run_unrestricted`]
//!   for plain simulation,
//! - [`evolve::evolve`] for training a rule,
//! - [`cli::run`] for everything the `crp` binary does.

pub mod cli;
pub mod config;
pub mod energy;
pub mod evolve;
pub mod features;
pub mod ga;
pub mod gp;
pub mod instance;
pub mod priority;
pub mod rng;
pub mod scheme;
pub mod stats;
pub mod yard;
