//! Co-evolution of feature subsets and MLP topologies for day-ahead stock
//! index movement forecasting, with multi-objective search in full- and
//! split-learning environments and hypervolume-based comparison.

pub mod architecture;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod market_data;
pub mod moea_core;
pub mod neural_model;
pub mod search_algorithms;
pub mod stats_report;

pub use error::{Error, Result};
