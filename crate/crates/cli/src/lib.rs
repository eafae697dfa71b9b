//! Command-line workflows for drop-the-loser designs: calibrate a design,
//! evaluate it, cross-check it by simulation and compare it with
//! single-stage alternatives.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

pub use commands::{load_input, render_json, render_table, run, Command, DesignRecord, Input, Overrides, Report};
pub use config::{parse_config, ConfigError, DesignInputs, EndpointInput};

/// The bundled configuration for the three-arm atrial fibrillation trial.
pub const BUNDLED_CONFIG: &str = include_str!("../poptarts.cfg");
