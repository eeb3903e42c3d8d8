//! Simulation experiments: configuration, resumable runner and plot tables.

mod config;
mod plotdata;
mod runner;

pub use config::*;
pub use plotdata::{emit_plotdata, write_plotdata, PlotTable};
pub use runner::*;
