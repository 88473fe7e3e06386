//! Discounted-cashflow pricing of music royalty assets.
//!
//! The crate prices royalty contracts as annuities on trailing revenue,
//! fits model parameters to observed deal multipliers, and backtests a
//! buy-and-hold strategy at model-implied prices.

pub mod backtest;
pub mod calibration;
pub mod cli;
pub mod data_model;
pub mod error;
pub mod pricing;
pub mod synthgen;

pub use error::{Error, Result};
