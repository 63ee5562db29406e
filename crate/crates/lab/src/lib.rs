//! Experiment harness, file formats, plotting and the `prony` command line
//! for [`prony_core`].

pub mod audits;
pub mod checks;
pub mod cli;
pub mod fit;
pub mod io;
pub mod methods;
pub mod naive;
pub mod plot;
pub mod presets;
pub mod sweep;
