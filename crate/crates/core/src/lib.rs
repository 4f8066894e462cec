pub mod chain;
pub mod cli;
pub mod distortion;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod joint;
pub mod ncd;
pub mod numeric;
pub mod oracle;
pub mod partition;
pub mod schedule;
pub mod solver;

pub use error::{Error, Result};
