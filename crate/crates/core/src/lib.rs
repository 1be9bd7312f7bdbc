pub mod baselines;
pub mod config;
pub mod error;
pub mod eval;
pub mod evidential;
pub mod features;
pub mod fixtures;
pub mod io;
pub mod maxent;
pub mod merging;
pub mod pairs;
pub mod partition;
pub mod pipeline;
pub mod report;
pub mod set;
pub mod synth;
pub mod template;

pub use error::{CorefError, Result};
