//! Experiment runner: configuration files, a content-addressed cache of
//! offline inputs, single runs, parallel sweeps and score reports.

pub mod cache;
pub mod config;
pub mod plot;
pub mod report;
pub mod run;
pub mod sweep;
