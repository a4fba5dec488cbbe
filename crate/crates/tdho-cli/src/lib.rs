//! Scenario configuration, command drivers and tabular output for the
//! oscillator trajectory simulations.

pub mod commands;
pub mod config;
pub mod output;
pub mod scenarios;
